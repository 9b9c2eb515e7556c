"""Statement distances, best-match scoring, corruption, and the corruption sweep."""

from __future__ import annotations

import logging
import random
import re
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import Levenshtein
import numpy as np
import pandas as pd

from .encode import DatasetTensors, encode_inputs, slot_layout
from .kb import Axiom, KnowledgeBase, Name, Signature, Sub, SubEx, parse_axiom, strip_comment
from .reasoner import Conclusion, completion_set, saturate
from .training import FoldResult, predict

LOGGER = logging.getLogger("el_mimic")

REPORT_COLUMNS = [
    "level",
    "metric",
    "baseline",
    "mean_dist",
    "min_dist",
    "max_dist",
    "precision",
    "recall",
    "f1",
    "fold_count",
]
DEFAULT_LEVELS = tuple(round(0.1 * step, 1) for step in range(10))

_NUMBER_RUN = re.compile(r"\d{2,}")
_FRESH_SYMBOLS = 0xE000


def char_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit insert, delete and substitute."""
    return int(Levenshtein.distance(a, b))


def atomic_distance(a: str, b: str) -> int:
    """Edit distance after every multi-digit number becomes one fresh symbol.

    The same number maps to the same symbol in both strings.
    """
    symbols: dict[str, str] = {}

    def replace(match: re.Match[str]) -> str:
        number = match.group(0)
        if number not in symbols:
            symbols[number] = chr(_FRESH_SYMBOLS + len(symbols))
        return symbols[number]

    return char_distance(_NUMBER_RUN.sub(replace, a), _NUMBER_RUN.sub(replace, b))


def slot_distance(guess: Name | None, actual: Name | None) -> int:
    """0 on a match, the index gap for the same kind, the index sum across kinds.

    Padding counts as index 0 of whatever kind it is compared with.
    """
    if guess == actual:
        return 0
    if guess is None or actual is None:
        present = guess or actual
        assert present is not None
        return present.index
    if guess.kind is actual.kind:
        return abs(guess.index - actual.index)
    return guess.index + actual.index


def _as_axiom(value: Axiom | str) -> Axiom:
    return parse_axiom(value) if isinstance(value, str) else value


def predicate_distance(guess: Axiom | str, actual: Axiom | str) -> int:
    """Sum of slot distances over the two 4-tuple layouts, position by position."""
    pairs = zip(slot_layout(_as_axiom(guess)), slot_layout(_as_axiom(actual)))
    return sum(slot_distance(g, a) for g, a in pairs)


class Metric(str, Enum):
    CHARACTER = "character"
    ATOMIC = "atomic"
    PREDICATE = "predicate"

    def distance(self, guess: Axiom, actual: Axiom) -> int:
        if self is Metric.PREDICATE:
            return predicate_distance(guess, actual)
        if self is Metric.ATOMIC:
            return atomic_distance(guess.render(), actual.render())
        return char_distance(guess.render(), actual.render())


@dataclass(frozen=True)
class MatchScore:
    """Best-match distances of each prediction and the derived classification scores.

    ``precision_defined`` / ``recall_defined`` are false when there were no
    predictions / answers; the score is then reported as 0.
    """

    distances: tuple[int, ...]
    true_positives: int
    predictions: int
    answers: int
    precision: float
    recall: float
    f1: float
    precision_defined: bool = True
    recall_defined: bool = True


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def best_match_score(
    predictions: Sequence[Axiom], answers: Sequence[Axiom], metric: Metric
) -> MatchScore:
    """Distance of each prediction to its closest answer; exact hits are true positives."""
    distances: tuple[int, ...] = ()
    if answers:
        distances = tuple(
            min(metric.distance(guess, actual) for actual in answers) for guess in predictions
        )
    hits = sum(1 for d in distances if d == 0)
    precision = hits / len(predictions) if predictions else 0.0
    recall = hits / len(answers) if answers else 0.0
    return MatchScore(
        distances,
        hits,
        len(predictions),
        len(answers),
        precision,
        recall,
        f1_score(precision, recall),
        precision_defined=bool(predictions),
        recall_defined=bool(answers),
    )


@dataclass(frozen=True)
class CorruptionConfig:
    probability: float
    seed: int = 0
    max_redraws: int = 100

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"corruption probability must be in [0, 1], got {self.probability}")


@dataclass(frozen=True)
class CorruptedKB:
    kb: KnowledgeBase
    flagged: tuple[int, ...]


def _redraw(axiom: Axiom, signature: Signature, rng: random.Random) -> Axiom:
    return axiom.rename(lambda name: Name(name.kind, rng.randint(1, signature.bound(name.kind))))


def corrupt_kb(kb: KnowledgeBase, cfg: CorruptionConfig) -> CorruptedKB:
    """Resample every name of each axiom flagged with probability ``cfg.probability``.

    The axiom form is kept. A redraw that repeats another axiom of the result is drawn
    again; after ``cfg.max_redraws`` failures the original axiom stays, or is dropped
    when an earlier redraw already produced it.
    """
    rng = random.Random(cfg.seed)
    flags = [rng.random() < cfg.probability for _ in kb.axioms]
    taken = {axiom for axiom, flag in zip(kb.axioms, flags) if not flag}
    result: list[Axiom] = []
    for axiom, flag in zip(kb.axioms, flags):
        if not flag:
            result.append(axiom)
            continue
        replacement = axiom
        for _ in range(cfg.max_redraws):
            candidate = _redraw(axiom, kb.signature, rng)
            if candidate not in taken:
                replacement = candidate
                break
        if replacement in taken:
            LOGGER.debug("dropped %s: no distinct redraw found", axiom)
            continue
        taken.add(replacement)
        result.append(replacement)
    flagged = tuple(i for i, flag in enumerate(flags) if flag)
    return CorruptedKB(KnowledgeBase(kb.signature, tuple(result)), flagged)


def random_answers(signature: Signature, count: int, seed: int) -> list[Conclusion]:
    """``count`` uniformly drawn ``C < D`` / ``C < R . D`` statements, never ``C < C``."""
    rng = random.Random(seed)
    statements: list[Conclusion] = []
    concepts = signature.max_concepts
    for _ in range(count):
        if concepts > 1 and rng.random() < 0.5:
            c = rng.randint(1, concepts)
            d = rng.randint(1, concepts - 1)
            statements.append(Sub(c, d if d < c else d + 1))
        else:
            statements.append(
                SubEx(
                    rng.randint(1, concepts),
                    rng.randint(1, signature.max_roles),
                    rng.randint(1, concepts),
                )
            )
    return statements


class Baseline(str, Enum):
    """Which statements are scored against the correct answers.

    ``reasoner``: model predictions; ``random``: random statements; ``corrupted``: the
    reasoner's own conclusions on the corrupted KB.
    """

    REASONER = "reasoner"
    RANDOM = "random"
    CORRUPTED = "corrupted"


@dataclass
class _Tally:
    distances: list[int] = field(default_factory=list)
    hits: int = 0
    predictions: int = 0
    answers: int = 0

    def add(self, score: MatchScore) -> None:
        self.distances.extend(score.distances)
        self.hits += score.true_positives
        self.predictions += score.predictions
        self.answers += score.answers


@dataclass(frozen=True)
class ReportRow:
    level: float
    metric: Metric
    baseline: Baseline
    mean_dist: float
    min_dist: float
    max_dist: float
    precision: float
    recall: float
    f1: float
    fold_count: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[ReportRow, ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    **{name: getattr(row, name) for name in REPORT_COLUMNS},
                    "metric": row.metric.value,
                    "baseline": row.baseline.value,
                }
                for row in self.rows
            ],
            columns=REPORT_COLUMNS,
        )

    def row(self, level: float, metric: Metric, baseline: Baseline) -> ReportRow:
        for row in self.rows:
            if row.level == level and row.metric is metric and row.baseline is baseline:
                return row
        raise KeyError((level, metric, baseline))


def _unique(statements: Iterable[Axiom]) -> list[Axiom]:
    return list(dict.fromkeys(statements))


def _sample_seed(seed: int, sample: int, level: float) -> int:
    state = np.random.SeedSequence([seed, sample, round(level * 1000)]).generate_state(1)
    return int(state[0])


def _score_fold(
    fold: FoldResult,
    dataset: DatasetTensors,
    level: float,
    seed: int,
    metrics: Sequence[Metric],
) -> dict[tuple[Metric, Baseline], _Tally]:
    tallies = {(m, b): _Tally() for m in metrics for b in Baseline}
    model = fold.result.model
    capacity = (dataset.out_width // 4) * dataset.steps
    for index in fold.test_indices:
        kb = dataset.kbs[index]
        correct = sorted(completion_set(saturate(kb)), key=str)
        sample_seed = _sample_seed(seed, index, level)
        corrupted = corrupt_kb(kb, CorruptionConfig(level, sample_seed)).kb
        x = encode_inputs(corrupted, dataset.signature, dataset.steps, dataset.kb_width)
        sources: dict[Baseline, list[Axiom]] = {
            Baseline.REASONER: _unique(
                axiom for step in predict(model, x, dataset.signature) for axiom in step
            ),
            Baseline.RANDOM: list(random_answers(dataset.signature, capacity, sample_seed)),
            Baseline.CORRUPTED: sorted(completion_set(saturate(corrupted)), key=str),
        }
        for metric in metrics:
            for baseline, statements in sources.items():
                tallies[(metric, baseline)].add(best_match_score(statements, correct, metric))
    return tallies


def _fold_figures(tally: _Tally) -> tuple[float, float, float, float, float, float]:
    distances = tally.distances
    mean = float(np.mean(distances)) if distances else float("nan")
    low = float(min(distances)) if distances else float("nan")
    high = float(max(distances)) if distances else float("nan")
    precision = tally.hits / tally.predictions if tally.predictions else 0.0
    recall = tally.hits / tally.answers if tally.answers else 0.0
    return mean, low, high, precision, recall, f1_score(precision, recall)


def _nanmean(values: list[float]) -> float:
    finite = [v for v in values if not np.isnan(v)]
    return float(np.mean(finite)) if finite else float("nan")


def run_sweep(
    folds: Sequence[FoldResult],
    dataset: DatasetTensors,
    levels: Sequence[float] = DEFAULT_LEVELS,
    seed: int = 0,
    metrics: Sequence[Metric] = tuple(Metric),
    threads: int = 1,
) -> EvalReport:
    """Score every fold model on corrupted held-out KBs at each corruption level.

    Distances and precision/recall are computed per fold over all of its held-out
    statements, then averaged across folds (min and max take the extremes).
    """
    tasks = [(level, fold) for level in levels for fold in folds]

    def run(task: tuple[float, FoldResult]) -> dict[tuple[Metric, Baseline], _Tally]:
        level, fold = task
        return _score_fold(fold, dataset, level, seed, metrics)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(task) for task in tasks]

    rows: list[ReportRow] = []
    for level in levels:
        per_fold = [r for (lvl, _), r in zip(tasks, results) if lvl == level]
        for metric in metrics:
            for baseline in Baseline:
                figures = [_fold_figures(r[(metric, baseline)]) for r in per_fold]
                lows = [f[1] for f in figures if not np.isnan(f[1])]
                highs = [f[2] for f in figures if not np.isnan(f[2])]
                rows.append(
                    ReportRow(
                        level,
                        metric,
                        baseline,
                        _nanmean([f[0] for f in figures]),
                        min(lows) if lows else float("nan"),
                        max(highs) if highs else float("nan"),
                        float(np.mean([f[3] for f in figures])),
                        float(np.mean([f[4] for f in figures])),
                        float(np.mean([f[5] for f in figures])),
                        len(figures),
                    )
                )
        LOGGER.info("scored corruption level %.1f over %d fold(s)", level, len(per_fold))
    return EvalReport(tuple(rows))


def write_report(report: EvalReport, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    report.to_frame().to_csv(target, index=False, float_format="%.6f")
    return target


def write_plot_data(report: EvalReport, directory: str | Path) -> list[Path]:
    """``x y`` files of mean distance and F1 against corruption level, per curve."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    frame = report.to_frame()
    written = []
    for (metric, baseline), group in frame.groupby(["metric", "baseline"], sort=True):
        ordered = group.sort_values("level")
        for column, prefix in (("mean_dist", "dist"), ("f1", "f1")):
            target = root / f"{prefix}-{metric}-{baseline}.dat"
            ordered[["level", column]].to_csv(
                target, sep=" ", header=False, index=False, float_format="%.6f"
            )
            written.append(target)
    return written


def read_statements(path: str | Path) -> list[Axiom]:
    """One canonical axiom per line; blank lines and ``#`` comments are ignored."""
    statements = []
    for line_number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = strip_comment(raw)
        if not line:
            continue
        try:
            statements.append(parse_axiom(line))
        except ValueError as exc:
            raise ValueError(f"{path}:{line_number}: {exc}") from exc
    return statements


def score_statements(
    predictions: Sequence[Axiom], answers: Sequence[Axiom]
) -> dict[Metric, MatchScore]:
    """All three metrics for one prediction list against one answer list."""
    unique = _unique(predictions)
    return {metric: best_match_score(unique, answers, metric) for metric in Metric}

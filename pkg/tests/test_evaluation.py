import math
import random
from collections import Counter
from pathlib import Path

import pytest

from el_mimic.encode import DatasetTensors, build_dataset
from el_mimic.evaluation import (
    DEFAULT_LEVELS,
    REPORT_COLUMNS,
    Baseline,
    CorruptionConfig,
    Metric,
    atomic_distance,
    best_match_score,
    char_distance,
    corrupt_kb,
    predicate_distance,
    random_answers,
    read_statements,
    run_sweep,
    score_statements,
    slot_distance,
    write_plot_data,
    write_report,
)
from el_mimic.kb import AXIOM_FORMS, Axiom, Kind, Name, Signature, Sub, SubEx, parse_kb
from el_mimic.lstm import Architecture, ModelSpec
from el_mimic.training import FoldResult, TrainConfig, cross_validate


@pytest.mark.parametrize(
    ("a", "b", "expected"),
    [("C1 < C2", "C1 < C2", 0), ("C1 < C2", "C1 < C3", 1), ("C15 < C3", "C51 < C3", 2)],
)
def test_char_distance(a: str, b: str, expected: int) -> None:
    assert char_distance(a, b) == expected


@pytest.mark.parametrize(
    ("a", "b", "expected"),
    [
        ("C15 < C3", "C15 < C4", 1),
        ("C15 < C3", "C51 < C3", 1),
        ("C7 < R12 . C7", "C7 < R12 . C7", 0),
    ],
)
def test_atomic_distance(a: str, b: str, expected: int) -> None:
    assert atomic_distance(a, b) == expected


def test_slot_distance_examples() -> None:
    c1, c2, c15 = (Name(Kind.CONCEPT, i) for i in (1, 2, 15))
    r2 = Name(Kind.ROLE, 2)

    assert slot_distance(c1, c2) == 1
    assert slot_distance(r2, c15) == 17
    assert slot_distance(None, c15) == 15
    assert slot_distance(c15, c15) == 0


def test_predicate_distance_examples() -> None:
    assert predicate_distance("C1 < C3", "C2 < C3") == 1
    assert predicate_distance(Sub(4, 2), Sub(4, 2)) == 0
    # [0, C4, R2, C1] against [0, C4, C15, 0]: 2 + 15 across kinds, then 1 against padding.
    assert predicate_distance(SubEx(4, 2, 1), Sub(4, 15)) == 18


def test_predicate_distance_rejects_undecodable_text() -> None:
    with pytest.raises(ValueError):
        predicate_distance("C1 <", "C1 < C2")


def _random_statement(rng: random.Random, form: type | None = None) -> Axiom:
    chosen = form or rng.choice(AXIOM_FORMS)
    indices = [rng.randint(1, 120 if kind is Kind.CONCEPT else 12) for kind in chosen.KINDS]
    return chosen(*indices)  # type: ignore[no-any-return]


@pytest.mark.parametrize("metric", [Metric.CHARACTER, Metric.ATOMIC])
def test_string_metrics_are_symmetric_and_obey_triangle_inequality(metric: Metric) -> None:
    rng = random.Random(0)
    for _ in range(10_000):
        a, b, c = (_random_statement(rng) for _ in range(3))

        assert metric.distance(a, b) == metric.distance(b, a)
        assert metric.distance(a, c) <= metric.distance(a, b) + metric.distance(b, c)


def test_atomic_never_exceeds_character_for_same_form_statements() -> None:
    rng = random.Random(1)
    for _ in range(10_000):
        form = rng.choice(AXIOM_FORMS)
        a, b = _random_statement(rng, form), _random_statement(rng, form)

        assert Metric.ATOMIC.distance(a, b) <= Metric.CHARACTER.distance(a, b), (str(a), str(b))


def test_best_match_precision_recall() -> None:
    score = best_match_score([Sub(1, 2)], [Sub(1, 2), Sub(1, 3)], Metric.PREDICATE)

    assert score.distances == (0,)
    assert (score.precision, score.recall) == (1.0, 0.5)
    assert score.f1 == pytest.approx(2 / 3)


def test_best_match_with_no_predictions() -> None:
    score = best_match_score([], [Sub(1, 2)], Metric.CHARACTER)

    assert not score.precision_defined
    assert (score.precision, score.recall, score.f1) == (0.0, 0.0, 0.0)


def test_best_match_with_no_answers() -> None:
    score = best_match_score([Sub(1, 2)], [], Metric.ATOMIC)

    assert not score.recall_defined
    assert score.distances == ()
    assert score.recall == 0.0


@pytest.mark.parametrize("metric", list(Metric))
def test_best_match_perfect_hits(metric: Metric) -> None:
    statements = [Sub(1, 2), SubEx(2, 1, 3), Sub(3, 1)]

    score = best_match_score(statements, list(reversed(statements)), metric)

    assert score.distances == (0, 0, 0)
    assert (score.precision, score.recall, score.f1) == (1.0, 1.0, 1.0)


def test_best_match_takes_closest_answer() -> None:
    score = best_match_score([Sub(1, 5)], [Sub(1, 9), Sub(1, 6)], Metric.PREDICATE)

    assert score.distances == (1,)
    assert score.true_positives == 0


def test_corruption_with_zero_probability_is_identity(make_random_kb) -> None:
    kb = make_random_kb(2, axioms=30)

    corrupted = corrupt_kb(kb, CorruptionConfig(0.0, seed=9))

    assert corrupted.kb == kb
    assert corrupted.flagged == ()


def test_full_corruption_flags_every_axiom_and_keeps_forms(make_random_kb) -> None:
    kb = make_random_kb(3, axioms=30, max_concepts=200, max_roles=50)

    corrupted = corrupt_kb(kb, CorruptionConfig(1.0, seed=1))

    assert corrupted.flagged == tuple(range(30))
    assert [type(a) for a in corrupted.kb] == [type(a) for a in kb]
    assert corrupted.kb.signature == kb.signature


def test_half_corruption_stays_within_binomial_bound(make_random_kb) -> None:
    kb = make_random_kb(4, axioms=1000, max_concepts=50, max_roles=10)

    corrupted = corrupt_kb(kb, CorruptionConfig(0.5, seed=2))

    assert abs(len(corrupted.flagged) - 500) <= 3 * math.sqrt(1000 * 0.25)
    assert len(set(corrupted.kb.axioms)) == len(corrupted.kb)


def test_corruption_is_seeded(make_random_kb) -> None:
    kb = make_random_kb(5, axioms=30)

    assert corrupt_kb(kb, CorruptionConfig(0.3, 4)) == corrupt_kb(kb, CorruptionConfig(0.3, 4))


def test_corruption_config_rejects_probability_outside_unit_interval() -> None:
    with pytest.raises(ValueError):
        CorruptionConfig(1.5)


def test_random_answers() -> None:
    sig = Signature(6, 2)

    answers = random_answers(sig, 500, seed=3)

    assert random_answers(sig, 0, seed=3) == []
    assert answers == random_answers(sig, 500, seed=3)
    assert len(answers) == 500
    assert {type(a) for a in answers} == {Sub, SubEx}
    assert all(a.c != a.d for a in answers if isinstance(a, Sub))
    assert all(sig.contains(n) for a in answers for n in a.names())


def test_random_answers_on_single_concept_signature() -> None:
    assert random_answers(Signature(1, 1), 3, seed=0) == [SubEx(1, 1, 1)] * 3


def _folds() -> tuple[DatasetTensors, list[FoldResult]]:
    dataset = build_dataset(
        [
            parse_kb("sig 4 1\nC1 < C2\nC2 < C3\nC3 < C4\n"),
            parse_kb("sig 4 1\nC2 < C3\nC3 < C1\nC1 < R1 . C4\n"),
            parse_kb("sig 4 1\nC4 < C1\nC1 < R1 . C2\nR1 . C2 < C3\n"),
            parse_kb("sig 4 1\nC3 < C2\nC2 & C3 < C1\nC1 < C4\n"),
        ]
    )
    spec = ModelSpec.from_dataset(Architecture.FLAT, dataset)
    return dataset, cross_validate(spec, dataset, TrainConfig(epochs=2, folds=2))


def test_sweep_has_a_row_per_level_metric_and_baseline() -> None:
    dataset, folds = _folds()

    report = run_sweep(folds, dataset, DEFAULT_LEVELS, seed=0)

    assert len(report.rows) == 10 * 3 * 3
    assert list(report.to_frame().columns) == REPORT_COLUMNS
    assert all(row.fold_count == 2 for row in report.rows)


def test_sweep_uncorrupted_reasoner_baseline_is_exact() -> None:
    dataset, folds = _folds()

    report = run_sweep(folds, dataset, (0.0,), seed=0)

    for metric in Metric:
        row = report.row(0.0, metric, Baseline.CORRUPTED)
        assert (row.mean_dist, row.precision, row.recall, row.f1) == (0.0, 1.0, 1.0, 1.0)


def test_sweep_is_deterministic_across_thread_counts() -> None:
    dataset, folds = _folds()

    serial = run_sweep(folds, dataset, (0.0, 0.5), seed=3)
    threaded = run_sweep(folds, dataset, (0.0, 0.5), seed=3, threads=3)

    assert serial.to_frame().equals(threaded.to_frame())


def test_report_and_plot_files(tmp_path: Path) -> None:
    dataset, folds = _folds()
    report = run_sweep(folds, dataset, (0.0, 0.9), seed=0, metrics=(Metric.PREDICATE,))

    path = write_report(report, tmp_path / "reports" / "flat.csv")
    written = write_plot_data(report, tmp_path / "plots")

    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert len(lines) == 1 + 2 * 3
    assert sorted(p.name for p in written) == sorted(
        f"{prefix}-predicate-{b.value}.dat" for prefix in ("dist", "f1") for b in Baseline
    )
    f1_rows = (tmp_path / "plots" / "f1-predicate-corrupted.dat").read_text().splitlines()
    assert f1_rows[0] == "0.000000 1.000000"


def test_read_statements_and_score(tmp_path: Path) -> None:
    predictions = tmp_path / "pred.txt"
    answers = tmp_path / "answers.txt"
    predictions.write_text("# model output\nC1 < C2\nC1 < C2\n\nC15 < C3\n", encoding="utf-8")
    answers.write_text("C1 < C2\nC51 < C3\n", encoding="utf-8")

    scores = score_statements(read_statements(predictions), read_statements(answers))

    assert scores[Metric.CHARACTER].distances == (0, 2)
    assert scores[Metric.ATOMIC].distances == (0, 1)
    assert scores[Metric.PREDICATE].distances == (0, 15)
    assert Counter(score.precision for score in scores.values()) == Counter({0.5: 3})


def test_read_statements_reports_bad_line(tmp_path: Path) -> None:
    path = tmp_path / "bad.txt"
    path.write_text("C1 < C2\nC1 < \n", encoding="utf-8")

    with pytest.raises(ValueError, match="bad.txt:2"):
        read_statements(path)

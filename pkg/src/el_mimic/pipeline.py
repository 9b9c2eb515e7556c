"""Staged experiment orchestration: generate, dataset, cross-validate, sweep, report."""

from __future__ import annotations

import json
import logging
import platform
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from . import __version__
from .config import ExperimentConfig
from .encode import DatasetTensors, build_dataset, encode_inputs, save_dataset
from .evaluation import run_sweep, write_plot_data, write_report
from .kb import Axiom, KnowledgeBase, read_kb
from .lstm import ModelSpec, checkpoint_signature, load_checkpoint, save_checkpoint
from .ontosample import load_ontology, sample_many
from .reasoner import rule_counts, saturate
from .supports import extract_supports, step_support_union
from .syngen import GenConfig, generate
from .training import FoldResult, cross_validate, decode_step, write_loss_curve

LOGGER = logging.getLogger("el_mimic")

MANIFEST = "manifest.json"


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str, log: Callable[[str], None]) -> Iterator[None]:
    log(f"stage: {name}")
    try:
        yield
    except StageError:
        raise
    except KeyboardInterrupt:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    log(f"stage done: {name}")


@dataclass(frozen=True)
class GeneratedKB:
    name: str
    kb: KnowledgeBase
    seed: int


def _gen_config(cfg: ExperimentConfig, seed: int) -> GenConfig:
    section = cfg.generate
    return GenConfig(
        iterations=section.iterations,
        random_axioms=section.random_axioms,
        concept_headroom=section.concept_headroom,
        role_headroom=section.role_headroom,
        seed=seed,
        max_concepts=section.max_concepts,
        max_roles=section.max_roles,
    )


def generate_kbs(cfg: ExperimentConfig) -> list[GeneratedKB]:
    """KBs for one experiment, synthetic or sampled, seeded from ``[run] seed``."""
    seed = cfg.run.seed
    count = cfg.generate.count
    if cfg.generate.mode == "synthetic":
        return [
            GeneratedKB(f"kb-{i:04d}", generate(_gen_config(cfg, seed + i)), seed + i)
            for i in range(count)
        ]

    ontology = load_ontology(cfg.sample.ontology)
    samples = sample_many(
        ontology.kb,
        count,
        cfg.sample.size,
        cfg.sample.min_steps,
        seed,
        cfg.sample.max_retries,
        cfg.run.threads,
    )
    return [
        GeneratedKB(
            f"kb-{i:04d}",
            KnowledgeBase(sample.kb.signature, sample.kb.axioms, sample.labels),
            seed + i,
        )
        for i, sample in enumerate(samples)
    ]


def write_kbs(items: list[GeneratedKB], directory: Path, mode: str) -> dict[str, Any]:
    """Write one ``.txt`` per KB plus ``manifest.json``; returns the manifest."""
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for item in items:
        path = directory / f"{item.name}.txt"
        path.write_text(item.kb.render(), encoding="utf-8")
        trace = saturate(item.kb)
        counts = rule_counts(trace)
        entries.append(
            {
                "file": path.name,
                "seed": item.seed,
                "axioms": len(item.kb),
                "trace_length": len(trace),
                "rule_counts": {str(int(rule)): n for rule, n in sorted(counts.items())},
            }
        )
    manifest = {"mode": mode, "count": len(items), "kbs": entries}
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def read_kb_dir(directory: Path) -> list[tuple[str, KnowledgeBase]]:
    """KBs listed in the manifest, or every ``*.txt`` in name order without one."""
    manifest_path = directory / MANIFEST
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        names = [entry["file"] for entry in manifest["kbs"]]
    else:
        names = sorted(p.name for p in directory.glob("*.txt"))
    if not names:
        raise ValueError(f"no KB files in {directory}")
    return [(name, read_kb(str(directory / name))) for name in names]


@dataclass
class RunSummary:
    run_dir: Path
    reports: dict[str, Path] = field(default_factory=dict)
    curves: list[Path] = field(default_factory=list)


def _versions() -> dict[str, str]:
    return {
        "el_mimic": __version__,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "python": platform.python_version(),
    }


def run_experiment(
    cfg: ExperimentConfig,
    kb_dir: str | Path | None = None,
    verbose: bool = False,
    diagnostics: Callable[[str], None] | None = None,
) -> RunSummary:
    """Run every stage into ``<out>/run-<digest>``; partial outputs stay on failure.

    A ``kb_dir`` argument replaces ``[dataset] kb_dir`` before hashing, so the digest and
    ``summary.json`` name the KB source.
    """
    if kb_dir:
        cfg = replace(cfg, dataset=replace(cfg.dataset, kb_dir=str(kb_dir)))

    def log(message: str) -> None:
        if verbose and diagnostics is not None:
            diagnostics(message)

    run_dir = Path(cfg.run.out) / f"run-{cfg.digest()}"
    run_dir.mkdir(parents=True, exist_ok=True)
    summary = RunSummary(run_dir)
    (run_dir / "summary.json").write_text(
        json.dumps({"config": cfg.to_dict(), "versions": _versions()}, indent=2) + "\n",
        encoding="utf-8",
    )
    log(f"run directory: {run_dir}")

    source_dir = cfg.dataset.kb_dir
    with stage("kbs", log):
        if source_dir:
            named = read_kb_dir(Path(source_dir))
        else:
            generated = generate_kbs(cfg)
            write_kbs(generated, run_dir / "kbs", cfg.generate.mode)
            named = [(f"{item.name}.txt", item.kb) for item in generated]
        log(f"kbs: {len(named)}")

    with stage("dataset", log):
        dataset = build_dataset(
            [kb for _, kb in named], [name for name, _ in named], threads=cfg.run.threads
        )
        save_dataset(dataset, run_dir / "dataset")

    train_cfg = cfg.train_config()
    for architecture in cfg.train.architectures:
        arch = architecture.value
        spec = ModelSpec.from_dataset(architecture, dataset, cfg.train.cell)
        with stage(f"train:{arch}", log):
            folds = cross_validate(spec, dataset, train_cfg)
            for fold in folds:
                save_checkpoint(
                    fold.result.model,
                    run_dir / "checkpoints" / arch / f"fold-{fold.fold:02d}",
                    dataset.signature,
                )
                for part, curve in fold.result.curves.items():
                    summary.curves.append(
                        write_loss_curve(
                            curve, run_dir / "curves" / arch / f"fold-{fold.fold:02d}-{part}.csv"
                        )
                    )
        with stage(f"sweep:{arch}", log):
            report = run_sweep(
                folds,
                dataset,
                cfg.eval.levels,
                seed=cfg.run.seed,
                metrics=cfg.eval.metrics,
                threads=cfg.run.threads,
            )
            summary.reports[arch] = write_report(report, run_dir / "reports" / f"{arch}.csv")
            write_plot_data(report, run_dir / "plots" / arch)
        _write_fold_table(folds, dataset, run_dir / "folds" / f"{arch}.tsv")

    log(f"run complete: {len(summary.reports)} report(s)")
    return summary


def _write_fold_table(folds: list[FoldResult], dataset: DatasetTensors, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        {"fold": fold.fold, "sample": index, "source": dataset.sources[index]}
        for fold in folds
        for index in fold.test_indices
    ]
    pd.DataFrame(rows, columns=["fold", "sample", "source"]).to_csv(path, sep="\t", index=False)


@dataclass(frozen=True)
class InspectView:
    """Support-layer activations at one step, decoded, beside the true supports."""

    step: int
    predicted: list[Axiom]
    expected: list[Axiom]

    @property
    def overlap(self) -> list[Axiom]:
        expected = set(self.expected)
        return [axiom for axiom in self.predicted if axiom in expected]

    def render(self) -> str:
        width = max([len("decoded support layer"), *(len(str(a)) for a in self.predicted)])
        lines = [f"step {self.step}", f"{'decoded support layer':<{width}}  true support"]
        for row in range(max(len(self.predicted), len(self.expected))):
            left = str(self.predicted[row]) if row < len(self.predicted) else ""
            right = str(self.expected[row]) if row < len(self.expected) else ""
            lines.append(f"{left:<{width}}  {right}".rstrip())
        lines.append(f"overlap: {len(self.overlap)} of {len(self.expected)}")
        return "\n".join(lines)


class InspectError(ValueError):
    """The checkpoint has no intermediate layer to inspect."""


def inspect(checkpoint: str | Path, kb_path: str | Path, step: int) -> InspectView:
    """Decode the support layer of a Deep or Piecewise model at ``step`` (1-based)."""
    if step < 1:
        raise ValueError("step must be >= 1")
    model = load_checkpoint(checkpoint)
    if not model.has_support_layer:
        raise InspectError("flat models have no intermediate layer to inspect")
    kb = read_kb(str(kb_path))
    signature = checkpoint_signature(checkpoint) or kb.signature
    spec = model.spec

    trace = saturate(kb)
    expected: list[Axiom] = []
    if step <= len(trace):
        supports = extract_supports(trace)
        expected = [kb.axioms[i] for i in step_support_union(trace, supports, step)]
    if step > spec.steps:
        return InspectView(step, [], expected)

    x = encode_inputs(kb, signature, spec.steps, spec.kb_width)
    support = model.forward(x).support
    assert support is not None
    predicted = decode_step(support[0, step - 1], signature)
    return InspectView(step, predicted, expected)


def with_generate_overrides(cfg: ExperimentConfig, count: int | None) -> ExperimentConfig:
    if count is None:
        return cfg
    return replace(cfg, generate=replace(cfg.generate, count=count))

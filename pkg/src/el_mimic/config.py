"""Experiment configuration: INI sections per stage plus environment overrides."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .evaluation import DEFAULT_LEVELS, Metric
from .lstm import Architecture, Cell
from .training import OPTIMIZERS, TrainConfig

ENV_SEED = "EL_MIMIC_SEED"
ENV_THREADS = "EL_MIMIC_THREADS"
MODES = ("synthetic", "ontology")


class ConfigError(ValueError):
    """The configuration file or one of its values is invalid."""


@dataclass(frozen=True)
class GenerateSection:
    mode: str = "synthetic"
    count: int = 10
    iterations: int = 4
    random_axioms: int | None = None
    concept_headroom: int | None = None
    role_headroom: int = 4
    max_concepts: int | None = None
    max_roles: int | None = None


@dataclass(frozen=True)
class SampleSection:
    ontology: str = ""
    size: int = 20
    min_steps: int = 3
    max_retries: int = 1000


@dataclass(frozen=True)
class DatasetSection:
    kb_dir: str = ""


@dataclass(frozen=True)
class TrainSection:
    architectures: tuple[Architecture, ...] = (
        Architecture.FLAT,
        Architecture.DEEP,
        Architecture.PIECEWISE,
    )
    epochs: int = 20000
    piecewise_epochs: int = 10000
    learning_rate: float = 1e-4
    folds: int = 10
    optimizer: str = "sgd"
    cell: Cell = Cell.LSTM
    log_every: int = 1000


@dataclass(frozen=True)
class EvalSection:
    levels: tuple[float, ...] = DEFAULT_LEVELS
    metrics: tuple[Metric, ...] = tuple(Metric)


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    threads: int = 1
    out: str = "runs"


@dataclass(frozen=True)
class ExperimentConfig:
    generate: GenerateSection = field(default_factory=GenerateSection)
    sample: SampleSection = field(default_factory=SampleSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    run: RunSection = field(default_factory=RunSection)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.train.epochs,
            piecewise_epochs=self.train.piecewise_epochs,
            learning_rate=self.train.learning_rate,
            folds=self.train.folds,
            optimizer=self.train.optimizer,
            seed=self.run.seed,
            log_every=self.train.log_every,
            threads=self.run.threads,
        )

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = json.loads(json.dumps(dataclasses.asdict(self), default=_plain))
        return data

    def digest(self) -> str:
        """First 12 hex digits of the SHA-256 of the canonical JSON form.

        The output root is excluded so the same experiment hashes the same anywhere.
        """
        data = self.to_dict()
        data["run"].pop("out", None)
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _plain(value: object) -> object:
    if isinstance(value, (Architecture, Cell, Metric)):
        return value.value
    raise TypeError(f"cannot serialise {value!r}")


_SECTIONS: dict[str, type] = {
    "generate": GenerateSection,
    "sample": SampleSection,
    "dataset": DatasetSection,
    "train": TrainSection,
    "eval": EvalSection,
    "run": RunSection,
}


def _split(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _convert(section: str, key: str, raw: str, default: object) -> object:
    text = raw.strip()
    try:
        if key == "architectures":
            return tuple(Architecture(item.lower()) for item in _split(text))
        if key == "cell":
            return Cell(text.lower())
        if key == "metrics":
            return tuple(Metric(item.lower()) for item in _split(text))
        if key == "levels":
            return tuple(float(item) for item in _split(text))
        if default is None or (isinstance(default, int) and not isinstance(default, bool)):
            if default is None and text.lower() in ("", "none", "auto"):
                return None
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _validate(cfg: ExperimentConfig) -> None:
    problems = []
    if cfg.generate.mode not in MODES:
        problems.append(f"[generate] mode must be one of {', '.join(MODES)}")
    if cfg.generate.count < 1:
        problems.append("[generate] count must be >= 1")
    if cfg.generate.iterations < 1:
        problems.append("[generate] iterations must be >= 1")
    if cfg.generate.mode == "ontology" and not cfg.sample.ontology:
        problems.append("[sample] ontology is required when [generate] mode = ontology")
    if cfg.sample.size < 1 or cfg.sample.min_steps < 0 or cfg.sample.max_retries < 1:
        problems.append("[sample] needs size >= 1, min_steps >= 0, max_retries >= 1")
    if not cfg.train.architectures:
        problems.append("[train] architectures must name at least one architecture")
    if cfg.train.epochs < 0 or cfg.train.piecewise_epochs < 0:
        problems.append("[train] epoch counts must be >= 0")
    if cfg.train.learning_rate <= 0:
        problems.append("[train] learning_rate must be > 0")
    if cfg.train.folds < 1:
        problems.append("[train] folds must be >= 1")
    if cfg.train.optimizer not in OPTIMIZERS:
        problems.append(f"[train] optimizer must be one of {', '.join(OPTIMIZERS)}")
    if any(not 0.0 <= level <= 1.0 for level in cfg.eval.levels) or not cfg.eval.levels:
        problems.append("[eval] levels must be a non-empty list of values in [0, 1]")
    if not cfg.eval.metrics:
        problems.append("[eval] metrics must name at least one metric")
    if cfg.run.threads < 1:
        problems.append("[run] threads must be >= 1")
    if problems:
        raise ConfigError("; ".join(problems))


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse INI text; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    sections: dict[str, Any] = {}
    for name in parser.sections():
        section_type = _SECTIONS.get(name)
        if section_type is None:
            raise ConfigError(f"{source}: unknown section [{name}]")
        defaults = section_type()
        known = {f.name for f in fields(section_type)}
        values = {}
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigError(f"{source}: unknown key '{key}' in [{name}]")
            values[key] = _convert(name, key, raw, getattr(defaults, key))
        sections[name] = replace(defaults, **values)
    cfg = ExperimentConfig(**sections)
    _validate(cfg)
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def _env_int(name: str) -> int | None:
    raw = os.getenv(name, "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}={raw!r} is not an integer") from exc


def resolve(
    cfg: ExperimentConfig,
    seed: int | None = None,
    threads: int | None = None,
    out: str | None = None,
) -> ExperimentConfig:
    """Apply CLI flags, then environment variables, over the file values."""
    run = cfg.run
    env_seed = _env_int(ENV_SEED)
    env_threads = _env_int(ENV_THREADS)
    resolved = replace(
        run,
        seed=seed if seed is not None else env_seed if env_seed is not None else run.seed,
        threads=(
            threads
            if threads is not None
            else env_threads
            if env_threads is not None
            else run.threads
        ),
        out=out if out else run.out,
    )
    updated = replace(cfg, run=resolved)
    _validate(updated)
    return updated

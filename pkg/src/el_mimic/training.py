"""Loss, optimizers, the training loop, cross-validation and prediction."""

from __future__ import annotations

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .encode import DatasetTensors, decode_vector
from .kb import Axiom, Signature
from .lstm import Architecture, DimensionError, ModelSpec, Network, SequenceModel

LOGGER = logging.getLogger("el_mimic")

OPTIMIZERS = ("sgd", "adam")


class TrainingDivergedError(RuntimeError):
    """The loss stopped being finite."""

    def __init__(self, epoch: int, learning_rate: float, loss: float) -> None:
        super().__init__(
            f"loss became {loss} at epoch {epoch}; learning rate {learning_rate} is "
            "probably too high"
        )
        self.epoch = epoch
        self.learning_rate = learning_rate


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean of squared differences over every step and feature."""
    if pred.shape != target.shape:
        raise DimensionError(f"shape mismatch: {list(pred.shape)} vs {list(target.shape)}")
    return float(np.mean((pred - target) ** 2))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20000
    piecewise_epochs: int = 10000
    learning_rate: float = 1e-4
    folds: int = 10
    optimizer: str = "sgd"
    seed: int = 0
    log_every: int = 1000
    threads: int = 1

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.piecewise_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.folds < 1:
            raise ValueError("folds must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {', '.join(OPTIMIZERS)}")


class GradientDescent:
    def __init__(self, params: list[np.ndarray], learning_rate: float) -> None:
        self.params = params
        self.learning_rate = learning_rate

    def step(self, grads: list[np.ndarray]) -> None:
        for param, grad in zip(self.params, grads):
            param -= self.learning_rate * grad


class Adam:
    def __init__(
        self,
        params: list[np.ndarray],
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for param, grad, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad**2
            param -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def _optimizer(
    name: str, params: list[np.ndarray], learning_rate: float
) -> GradientDescent | Adam:
    return Adam(params, learning_rate) if name == "adam" else GradientDescent(params, learning_rate)


def fit_network(
    network: Network,
    x: np.ndarray,
    target: np.ndarray,
    epochs: int,
    cfg: TrainConfig,
    label: str = "main",
) -> list[float]:
    """Full-batch training; the curve holds the loss before each update."""
    optimizer = _optimizer(cfg.optimizer, network.parameters(), cfg.learning_rate)
    curve: list[float] = []
    for epoch in range(1, epochs + 1):
        loss, grads = network.gradients(x, target)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch, cfg.learning_rate, loss)
        curve.append(loss)
        optimizer.step(grads)
        if cfg.log_every and epoch % cfg.log_every == 0:
            LOGGER.info("[%s] epoch %d/%d loss %.6g", label, epoch, epochs, loss)
    return curve


@dataclass
class TrainResult:
    model: SequenceModel
    curves: dict[str, list[float]] = field(default_factory=dict)


def train(
    spec: ModelSpec, dataset: DatasetTensors, cfg: TrainConfig, seed: int | None = None
) -> TrainResult:
    """Initialise a model for ``spec`` and fit it to ``dataset``.

    Piecewise fits its support half on ``x -> s`` and its answer half on ``s -> y``,
    each for ``cfg.piecewise_epochs``.
    """
    if not len(dataset):
        raise ValueError("cannot train on an empty dataset")
    model = SequenceModel.initialise(spec, cfg.seed if seed is None else seed)
    curves: dict[str, list[float]] = {}
    if spec.architecture is Architecture.PIECEWISE:
        curves["support"] = fit_network(
            model.parts["support"], dataset.x, dataset.s, cfg.piecewise_epochs, cfg, "support"
        )
        curves["answer"] = fit_network(
            model.parts["answer"], dataset.s, dataset.y, cfg.piecewise_epochs, cfg, "answer"
        )
    else:
        curves["main"] = fit_network(model.parts["main"], dataset.x, dataset.y, cfg.epochs, cfg)
    return TrainResult(model, curves)


@dataclass
class FoldResult:
    fold: int
    train_indices: list[int]
    test_indices: list[int]
    result: TrainResult


def fold_partition(samples: int, folds: int, seed: int) -> list[list[int]]:
    """Seeded random split of ``range(samples)`` into ``folds`` disjoint test sets."""
    if folds > samples:
        raise ValueError(f"{folds} folds need at least {folds} samples, got {samples}")
    order = np.random.default_rng(seed).permutation(samples)
    return [sorted(int(i) for i in part) for part in np.array_split(order, folds)]


def cross_validate(
    spec: ModelSpec,
    dataset: DatasetTensors,
    cfg: TrainConfig,
    on_fold: Callable[[FoldResult], None] | None = None,
) -> list[FoldResult]:
    """Train one model per fold on the other folds; fold ``k`` uses seed ``cfg.seed + k``.

    With one fold the model trains and tests on every sample.
    """
    if cfg.folds == 1:
        everything = list(range(len(dataset)))
        partitions = [everything]
    else:
        partitions = fold_partition(len(dataset), cfg.folds, cfg.seed)

    def run(fold: int) -> FoldResult:
        test = partitions[fold]
        held = set(test)
        train_idx = [i for i in range(len(dataset)) if i not in held] or list(test)
        LOGGER.info(
            "fold %d/%d: %d train, %d test", fold + 1, len(partitions), len(train_idx), len(test)
        )
        result = train(spec, dataset.subset(train_idx), cfg, seed=cfg.seed + fold)
        outcome = FoldResult(fold, train_idx, test, result)
        if on_fold is not None:
            on_fold(outcome)
        return outcome

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(run, range(len(partitions))))
    return [run(fold) for fold in range(len(partitions))]


def decode_step(vector: np.ndarray, signature: Signature) -> list[Axiom]:
    """Decode one output step, dropping padding and repeated statements."""
    return list(dict.fromkeys(decode_vector(vector, signature)))


def predict(model: SequenceModel, x: np.ndarray, signature: Signature) -> list[list[Axiom]]:
    """Decoded statements per step for one sample ``x`` of shape ``[steps, kb_width]``."""
    output = model.forward(x).y[0]
    return [decode_step(output[t], signature) for t in range(output.shape[0])]


def write_loss_curve(curve: list[float], path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"epoch": range(1, len(curve) + 1), "loss": curve})
    frame.to_csv(target, index=False, float_format="%.10g")
    return target

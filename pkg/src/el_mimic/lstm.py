"""NumPy recurrent layers (LSTM, GRU, plain RNN), the three architectures, BPTT, checkpoints."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from .kb import Signature

if TYPE_CHECKING:
    from .encode import DatasetTensors

LOGGER = logging.getLogger("el_mimic")


class DimensionError(ValueError):
    """Tensor shapes do not match what the model or loss expects."""


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class Cell(str, Enum):
    """Recurrent cell used by every layer of a model."""

    LSTM = "lstm"
    GRU = "gru"
    RNN = "rnn"


@dataclass
class _LSTMStep:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray


@dataclass
class _GRUStep:
    x: np.ndarray
    h_prev: np.ndarray
    r: np.ndarray
    z: np.ndarray
    n: np.ndarray
    un_h: np.ndarray


@dataclass
class _RNNStep:
    x: np.ndarray
    h_prev: np.ndarray
    h: np.ndarray


class RecurrentLayer:
    """Shared weights of a recurrent layer with ``GATES`` stacked blocks.

    ``forward`` returns the per-step cache alongside the outputs and ``backward`` takes
    it back, so a layer holds no state between calls.
    """

    GATES = 1

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> None:
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        limit = 1.0 / np.sqrt(input_dim + hidden_dim)
        self.w = rng.uniform(-limit, limit, size=(self.GATES * hidden_dim, input_dim))
        self.u = rng.uniform(-limit, limit, size=(self.GATES * hidden_dim, hidden_dim))
        self.b = np.zeros(self.GATES * hidden_dim)

    def parameters(self) -> list[np.ndarray]:
        return [self.w, self.u, self.b]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[Any]]:
        raise NotImplementedError

    def backward(
        self, d_out: np.ndarray, cache: list[Any]
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        raise NotImplementedError


class LSTMLayer(RecurrentLayer):
    """Gate blocks in ``w``, ``u``, ``b`` are ordered i, f, o, g."""

    GATES = 4

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[Any]]:
        """Run ``x`` of shape ``[batch, steps, input_dim]`` into ``[batch, steps, hidden]``."""
        batch, steps, _ = x.shape
        hidden = self.hidden_dim
        h = np.zeros((batch, hidden))
        c = np.zeros((batch, hidden))
        out = np.zeros((batch, steps, hidden))
        cache: list[Any] = []
        for t in range(steps):
            x_t = x[:, t, :]
            z = x_t @ self.w.T + h @ self.u.T + self.b
            i = sigmoid(z[:, :hidden])
            f = sigmoid(z[:, hidden : 2 * hidden])
            o = sigmoid(z[:, 2 * hidden : 3 * hidden])
            g = np.tanh(z[:, 3 * hidden :])
            c_next = f * c + i * g
            cache.append(_LSTMStep(x_t, h, c, i, f, o, g, c_next))
            h = o * np.tanh(c_next)
            c = c_next
            out[:, t, :] = h
        return out, cache

    def backward(
        self, d_out: np.ndarray, cache: list[Any]
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        """Backpropagate through time; returns ``(d_input, [dw, du, db])``."""
        batch, steps, _ = d_out.shape
        dw = np.zeros_like(self.w)
        du = np.zeros_like(self.u)
        db = np.zeros_like(self.b)
        d_input = np.zeros((batch, steps, self.input_dim))
        dh_next = np.zeros((batch, self.hidden_dim))
        dc_next = np.zeros((batch, self.hidden_dim))
        for t in reversed(range(steps)):
            step: _LSTMStep = cache[t]
            dh = d_out[:, t, :] + dh_next
            tanh_c = np.tanh(step.c)
            do = dh * tanh_c
            dc = dh * step.o * (1.0 - tanh_c**2) + dc_next
            di = dc * step.g
            dg = dc * step.i
            df = dc * step.c_prev
            dc_next = dc * step.f
            dz = np.concatenate(
                [
                    di * step.i * (1.0 - step.i),
                    df * step.f * (1.0 - step.f),
                    do * step.o * (1.0 - step.o),
                    dg * (1.0 - step.g**2),
                ],
                axis=1,
            )
            dw += dz.T @ step.x
            du += dz.T @ step.h_prev
            db += dz.sum(axis=0)
            d_input[:, t, :] = dz @ self.w
            dh_next = dz @ self.u
        return d_input, [dw, du, db]


class GRULayer(RecurrentLayer):
    """Gate blocks ordered r (reset), z (update), n (candidate).

    ``h' = (1 - z) * n + z * h`` with ``n = tanh(W_n x + r * (U_n h) + b_n)``.
    """

    GATES = 3

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[Any]]:
        batch, steps, _ = x.shape
        hidden = self.hidden_dim
        h = np.zeros((batch, hidden))
        out = np.zeros((batch, steps, hidden))
        cache: list[Any] = []
        for t in range(steps):
            x_t = x[:, t, :]
            wx = x_t @ self.w.T + self.b
            uh = h @ self.u.T
            r = sigmoid(wx[:, :hidden] + uh[:, :hidden])
            z = sigmoid(wx[:, hidden : 2 * hidden] + uh[:, hidden : 2 * hidden])
            un_h = uh[:, 2 * hidden :]
            n = np.tanh(wx[:, 2 * hidden :] + r * un_h)
            cache.append(_GRUStep(x_t, h, r, z, n, un_h))
            h = (1.0 - z) * n + z * h
            out[:, t, :] = h
        return out, cache

    def backward(
        self, d_out: np.ndarray, cache: list[Any]
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        batch, steps, _ = d_out.shape
        hidden = self.hidden_dim
        dw = np.zeros_like(self.w)
        du = np.zeros_like(self.u)
        db = np.zeros_like(self.b)
        d_input = np.zeros((batch, steps, self.input_dim))
        dh_next = np.zeros((batch, hidden))
        for t in reversed(range(steps)):
            step: _GRUStep = cache[t]
            dh = d_out[:, t, :] + dh_next
            dn = dh * (1.0 - step.z) * (1.0 - step.n**2)
            dz = dh * (step.h_prev - step.n) * step.z * (1.0 - step.z)
            dr = dn * step.un_h * step.r * (1.0 - step.r)
            d_wx = np.concatenate([dr, dz, dn], axis=1)
            d_uh = np.concatenate([dr, dz, dn * step.r], axis=1)
            dw += d_wx.T @ step.x
            du += d_uh.T @ step.h_prev
            db += d_wx.sum(axis=0)
            d_input[:, t, :] = d_wx @ self.w
            dh_next = dh * step.z + d_uh @ self.u
        return d_input, [dw, du, db]


class RNNLayer(RecurrentLayer):
    """Plain ``h' = tanh(W x + U h + b)``."""

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[Any]]:
        batch, steps, _ = x.shape
        h = np.zeros((batch, self.hidden_dim))
        out = np.zeros((batch, steps, self.hidden_dim))
        cache: list[Any] = []
        for t in range(steps):
            x_t = x[:, t, :]
            h_next = np.tanh(x_t @ self.w.T + h @ self.u.T + self.b)
            cache.append(_RNNStep(x_t, h, h_next))
            h = h_next
            out[:, t, :] = h
        return out, cache

    def backward(
        self, d_out: np.ndarray, cache: list[Any]
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        batch, steps, _ = d_out.shape
        dw = np.zeros_like(self.w)
        du = np.zeros_like(self.u)
        db = np.zeros_like(self.b)
        d_input = np.zeros((batch, steps, self.input_dim))
        dh_next = np.zeros((batch, self.hidden_dim))
        for t in reversed(range(steps)):
            step: _RNNStep = cache[t]
            d_pre = (d_out[:, t, :] + dh_next) * (1.0 - step.h**2)
            dw += d_pre.T @ step.x
            du += d_pre.T @ step.h_prev
            db += d_pre.sum(axis=0)
            d_input[:, t, :] = d_pre @ self.w
            dh_next = d_pre @ self.u
        return d_input, [dw, du, db]


LAYERS: dict[Cell, type[RecurrentLayer]] = {
    Cell.LSTM: LSTMLayer,
    Cell.GRU: GRULayer,
    Cell.RNN: RNNLayer,
}


class Readout:
    """Per-step affine map from hidden state to output width."""

    def __init__(self, input_dim: int, output_dim: int, rng: np.random.Generator) -> None:
        limit = 1.0 / np.sqrt(input_dim)
        self.v = rng.uniform(-limit, limit, size=(output_dim, input_dim))
        self.c = np.zeros(output_dim)

    def parameters(self) -> list[np.ndarray]:
        return [self.v, self.c]

    def forward(self, h: np.ndarray) -> np.ndarray:
        return np.asarray(h @ self.v.T + self.c)

    def backward(self, d_out: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """``h`` is the input the matching ``forward`` saw."""
        flat_h = h.reshape(-1, h.shape[-1])
        d = d_out.reshape(-1, d_out.shape[-1])
        return d_out @ self.v, [d.T @ flat_h, d.sum(axis=0)]


@dataclass
class ForwardResult:
    output: np.ndarray
    hidden: list[np.ndarray]
    caches: list[list[Any]] = field(default_factory=list, repr=False)


class Network:
    """Stacked recurrent layers followed by a linear readout."""

    def __init__(
        self,
        dims: list[int],
        output_dim: int,
        rng: np.random.Generator,
        cell: Cell = Cell.LSTM,
    ) -> None:
        if len(dims) < 2:
            raise ValueError("a network needs an input width and at least one layer width")
        self.dims = list(dims)
        self.cell = cell
        layer_type = LAYERS[cell]
        self.layers = [layer_type(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.readout = Readout(dims[-1], output_dim, rng)

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return int(self.readout.v.shape[0])

    def parameters(self) -> list[np.ndarray]:
        params = [p for layer in self.layers for p in layer.parameters()]
        return params + self.readout.parameters()

    def forward(self, x: np.ndarray) -> ForwardResult:
        if x.ndim != 3 or x.shape[2] != self.input_dim:
            raise DimensionError(
                f"expected input [batch, steps, {self.input_dim}], got {list(x.shape)}"
            )
        hidden = []
        caches = []
        current = x
        for layer in self.layers:
            current, cache = layer.forward(current)
            hidden.append(current)
            caches.append(cache)
        return ForwardResult(self.readout.forward(current), hidden, caches)

    def gradients(self, x: np.ndarray, target: np.ndarray) -> tuple[float, list[np.ndarray]]:
        """MSE loss on ``x`` against ``target`` and its gradient per parameter."""
        result = self.forward(x)
        if result.output.shape != target.shape:
            raise DimensionError(
                f"target shape {list(target.shape)} != output {list(result.output.shape)}"
            )
        diff = result.output - target
        loss = float(np.mean(diff**2))
        d_current, readout_grads = self.readout.backward(2.0 * diff / diff.size, result.hidden[-1])
        layer_grads: list[list[np.ndarray]] = []
        for layer, cache in zip(reversed(self.layers), reversed(result.caches)):
            d_current, grads = layer.backward(d_current, cache)
            layer_grads.append(grads)
        flat = [g for grads in reversed(layer_grads) for g in grads]
        return loss, flat + readout_grads


class Architecture(str, Enum):
    FLAT = "flat"
    DEEP = "deep"
    PIECEWISE = "piecewise"


@dataclass(frozen=True)
class ModelSpec:
    architecture: Architecture
    kb_width: int
    support_width: int
    out_width: int
    steps: int
    cell: Cell = Cell.LSTM

    @classmethod
    def from_dataset(
        cls, architecture: Architecture, dataset: DatasetTensors, cell: Cell = Cell.LSTM
    ) -> ModelSpec:
        return cls(
            architecture,
            dataset.kb_width,
            dataset.support_width,
            dataset.out_width,
            dataset.steps,
            cell,
        )


@dataclass
class ModelOutput:
    """Per-step answers and, for Deep and Piecewise, the support-layer activations."""

    y: np.ndarray
    support: np.ndarray | None = None


@dataclass
class SequenceModel:
    """A trained or freshly initialised model made of one or two networks.

    Flat and Deep own a single ``main`` network; Piecewise owns ``support`` (KB to
    supports) and ``answer`` (supports to conclusions).
    """

    spec: ModelSpec
    seed: int
    parts: dict[str, Network] = field(default_factory=dict)

    @classmethod
    def initialise(cls, spec: ModelSpec, seed: int) -> SequenceModel:
        rng = np.random.default_rng(seed)
        arch = spec.architecture

        def network(dims: list[int], output_dim: int) -> Network:
            return Network(dims, output_dim, rng, spec.cell)

        if arch is Architecture.FLAT:
            parts = {"main": network([spec.kb_width, spec.out_width], spec.out_width)}
        elif arch is Architecture.DEEP:
            parts = {
                "main": network(
                    [spec.kb_width, spec.support_width, spec.out_width], spec.out_width
                )
            }
        else:
            parts = {
                "support": network([spec.kb_width, spec.support_width], spec.support_width),
                "answer": network([spec.support_width, spec.out_width], spec.out_width),
            }
        return cls(spec, seed, parts)

    @property
    def has_support_layer(self) -> bool:
        return self.spec.architecture is not Architecture.FLAT

    def parameters(self) -> list[np.ndarray]:
        return [p for name in sorted(self.parts) for p in self.parts[name].parameters()]

    def forward(self, x: np.ndarray) -> ModelOutput:
        if x.ndim == 2:
            x = x[np.newaxis]
        if self.spec.architecture is Architecture.PIECEWISE:
            support = self.parts["support"].forward(x).output
            return ModelOutput(self.parts["answer"].forward(support).output, support)
        result = self.parts["main"].forward(x)
        support = result.hidden[0] if self.spec.architecture is Architecture.DEEP else None
        return ModelOutput(result.output, support)


def save_checkpoint(
    model: SequenceModel, directory: str | Path, signature: Signature | None = None
) -> Path:
    """Write ``header.json`` and a flat ``params.npy`` vector.

    ``signature`` is the encoding signature of the training data, kept so the outputs
    of a reloaded model can be decoded.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    spec = model.spec
    header: dict[str, Any] = {
        "architecture": spec.architecture.value,
        "cell": spec.cell.value,
        "kb_width": spec.kb_width,
        "support_width": spec.support_width,
        "out_width": spec.out_width,
        "steps": spec.steps,
        "seed": model.seed,
        "shapes": [list(p.shape) for p in model.parameters()],
    }
    if signature is not None:
        header["max_concepts"] = signature.max_concepts
        header["max_roles"] = signature.max_roles
    (root / "header.json").write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
    flat = np.concatenate([p.ravel() for p in model.parameters()])
    np.save(root / "params.npy", flat)
    return root


def _read_header(root: Path) -> dict[str, Any]:
    return dict(json.loads((root / "header.json").read_text(encoding="utf-8")))


def checkpoint_signature(directory: str | Path) -> Signature | None:
    header = _read_header(Path(directory))
    if "max_concepts" not in header:
        return None
    return Signature(int(header["max_concepts"]), int(header["max_roles"]))


def load_checkpoint(directory: str | Path) -> SequenceModel:
    root = Path(directory)
    header = _read_header(root)
    spec = ModelSpec(
        Architecture(header["architecture"]),
        int(header["kb_width"]),
        int(header["support_width"]),
        int(header["out_width"]),
        int(header["steps"]),
        Cell(header.get("cell", Cell.LSTM.value)),
    )
    model = SequenceModel.initialise(spec, int(header["seed"]))
    flat = np.load(root / "params.npy")
    params = model.parameters()
    expected = [list(p.shape) for p in params]
    if expected != header["shapes"] or flat.size != sum(p.size for p in params):
        raise DimensionError(f"checkpoint at {root} does not match its header")
    offset = 0
    for param in params:
        param[...] = flat[offset : offset + param.size].reshape(param.shape)
        offset += param.size
    LOGGER.debug("loaded %s checkpoint from %s", spec.architecture.value, root)
    return model

"""Reversible 4-tuple encoding of axioms and assembly of training tensors.

A concept ``Cn`` encodes as ``n / max_concepts`` in ``(0, 1]``, a role ``Rn`` as
``-n / max_roles`` in ``[-1, 0)`` and padding as ``0.0``. Layouts::

    C < D            [0, c, d, 0]        C & D < E        [c, d, e, 0]
    C < R . D        [0, c, r, d]        R . C < D        [r, c, d, 0]
    R < S            [0, r, s, 0]        R * S < T        [r, s, t, 0]
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .kb import (
    AXIOM_FORMS,
    Axiom,
    ExSub,
    Kind,
    KnowledgeBase,
    Name,
    RoleChain,
    RoleSub,
    Signature,
    Sub,
    SubConj,
    SubEx,
    read_kb,
)
from .reasoner import Conclusion, ReasoningTrace, saturate
from .supports import extract_supports, step_support_union

LOGGER = logging.getLogger("el_mimic")

WIDTH = 4

_OFFSETS: dict[type, int] = {Sub: 1, SubConj: 0, SubEx: 1, ExSub: 0, RoleSub: 1, RoleChain: 0}


def _pattern(form: type) -> tuple[Kind | None, ...]:
    offset = _OFFSETS[form]
    kinds: list[Kind | None] = [None] * WIDTH
    for position, kind in enumerate(form.KINDS):  # type: ignore[attr-defined]
        kinds[offset + position] = kind
    return tuple(kinds)


_FORM_BY_PATTERN: dict[tuple[Kind | None, ...], type] = {
    _pattern(form): form for form in AXIOM_FORMS
}


def slot_layout(axiom: Axiom) -> tuple[Name | None, ...]:
    """The names of ``axiom`` placed in their 4-tuple slots, ``None`` for padding."""
    slots: list[Name | None] = [None] * WIDTH
    offset = _OFFSETS[type(axiom)]
    for position, name in enumerate(axiom.names()):
        slots[offset + position] = name
    return tuple(slots)


def encode_name(kind: Kind, index: int, signature: Signature) -> float:
    if kind is Kind.CONCEPT:
        return index / signature.max_concepts
    return -index / signature.max_roles


def encode_axiom(axiom: Axiom, signature: Signature) -> np.ndarray:
    """Encode one axiom as a length-4 float vector."""
    vector = np.zeros(WIDTH, dtype=np.float64)
    offset = _OFFSETS[type(axiom)]
    for position, name in enumerate(axiom.names()):
        signature.check(name)
        vector[offset + position] = encode_name(name.kind, name.index, signature)
    return vector


def _decode_slot(value: float, signature: Signature) -> tuple[Kind, int] | None:
    value = min(1.0, max(-1.0, float(value)))
    kind = Kind.CONCEPT if value > 0 else Kind.ROLE
    bound = signature.bound(kind)
    index = min(bound, math.floor(abs(value) * bound + 0.5))
    if index == 0:
        return None
    return kind, index


def decode_axiom(vector: Sequence[float] | np.ndarray, signature: Signature) -> Axiom | None:
    """Decode a (possibly noisy) 4-tuple; ``None`` when no form matches.

    Slots round half away from zero and clamp to the signature bound; the pattern of
    padding, concept and role slots picks the form.
    """
    if len(vector) != WIDTH:
        raise ValueError(f"expected {WIDTH} values, got {len(vector)}")
    slots = [_decode_slot(v, signature) for v in vector]
    pattern = tuple(slot[0] if slot else None for slot in slots)
    form = _FORM_BY_PATTERN.get(pattern)
    if form is None:
        return None
    return form(*(slot[1] for slot in slots if slot))  # type: ignore[no-any-return]


def encode_axioms(axioms: Sequence[Axiom], signature: Signature) -> np.ndarray:
    """Concatenated encodings, in the given order."""
    if not axioms:
        return np.zeros(0, dtype=np.float64)
    return np.concatenate([encode_axiom(axiom, signature) for axiom in axioms])


def encode_kb(kb: KnowledgeBase, signature: Signature | None = None) -> np.ndarray:
    return encode_axioms(kb.axioms, signature or kb.signature)


def encode_inputs(
    kb: KnowledgeBase, signature: Signature, steps: int, kb_width: int
) -> np.ndarray:
    """The ``[steps, kb_width]`` input block for ``kb``: its vector repeated per step."""
    vector = encode_kb(kb, signature)
    if len(vector) > kb_width:
        raise ValueError(f"KB of {len(kb)} axioms does not fit input width {kb_width}")
    block = np.zeros((steps, kb_width))
    block[:, : len(vector)] = vector
    return block


def decode_vector(vector: np.ndarray, signature: Signature) -> list[Axiom]:
    """Decode consecutive 4-tuples, dropping those that decode to nothing."""
    usable = len(vector) - len(vector) % WIDTH
    decoded = (decode_axiom(vector[i : i + WIDTH], signature) for i in range(0, usable, WIDTH))
    return [axiom for axiom in decoded if axiom is not None]


class DatasetError(ValueError):
    """A KB cannot contribute to a dataset."""

    def __init__(self, index: int, message: str) -> None:
        super().__init__(f"KB {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class DatasetTensors:
    """``x``/``s`` are ``[samples, steps, kb_width]``; ``y`` is ``[samples, steps, out_width]``."""

    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    signature: Signature
    trace_lengths: tuple[int, ...]
    kbs: tuple[KnowledgeBase, ...]
    sources: tuple[str, ...]

    def __len__(self) -> int:
        return int(self.x.shape[0])

    @property
    def steps(self) -> int:
        return int(self.x.shape[1])

    @property
    def kb_width(self) -> int:
        return int(self.x.shape[2])

    @property
    def support_width(self) -> int:
        return int(self.s.shape[2])

    @property
    def out_width(self) -> int:
        return int(self.y.shape[2])

    def subset(self, indices: Sequence[int]) -> DatasetTensors:
        picked = list(indices)
        return DatasetTensors(
            self.x[picked],
            self.s[picked],
            self.y[picked],
            self.signature,
            tuple(self.trace_lengths[i] for i in picked),
            tuple(self.kbs[i] for i in picked),
            tuple(self.sources[i] for i in picked),
        )

    def answers(self, index: int) -> list[list[Conclusion]]:
        """Reasoner conclusions per step for sample ``index``, decoded from ``y``."""
        return [
            decode_vector(self.y[index, t], self.signature)  # type: ignore[misc]
            for t in range(self.trace_lengths[index])
        ]


@dataclass(frozen=True)
class _Prepared:
    trace: ReasoningTrace
    supports: list[list[int]]


def _prepare(index: int, kb: KnowledgeBase) -> _Prepared:
    trace = saturate(kb)
    if not len(trace):
        raise DatasetError(index, "empty reasoning trace, nothing to learn")
    support_map = extract_supports(trace)
    supports = [step_support_union(trace, support_map, t) for t in range(1, len(trace) + 1)]
    return _Prepared(trace, supports)


def build_dataset(
    kbs: Sequence[KnowledgeBase], sources: Sequence[str] | None = None, threads: int = 1
) -> DatasetTensors:
    """Saturate every KB and pack inputs, step supports and step conclusions.

    All KBs are encoded over one signature, the per-kind maximum of theirs, so a name
    encodes the same way in every sample. ``x`` repeats the KB vector at every step;
    shorter entries are zero padded.
    """
    if not kbs:
        raise ValueError("cannot build a dataset from zero KBs")
    labels = list(sources) if sources is not None else [f"kb-{i:04d}" for i in range(len(kbs))]
    if len(labels) != len(kbs):
        raise ValueError("sources must match kbs one to one")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            prepared = list(pool.map(_prepare, range(len(kbs)), kbs))
    else:
        prepared = [_prepare(i, kb) for i, kb in enumerate(kbs)]

    signature = kbs[0].signature
    for kb in kbs[1:]:
        signature = signature.union(kb.signature)
    steps = max(len(p.trace) for p in prepared)
    kb_width = WIDTH * max(len(kb) for kb in kbs)
    out_width = WIDTH * max(p.trace.max_step_width() for p in prepared)

    x = np.zeros((len(kbs), steps, kb_width))
    s = np.zeros((len(kbs), steps, kb_width))
    y = np.zeros((len(kbs), steps, out_width))
    for i, (kb, item) in enumerate(zip(kbs, prepared)):
        x[i] = encode_inputs(kb, signature, steps, kb_width)
        for t in range(len(item.trace)):
            support = encode_axioms([kb.axioms[j] for j in item.supports[t]], signature)
            s[i, t, : len(support)] = support
            conclusions = encode_axioms(item.trace.step_conclusions(t + 1), signature)
            y[i, t, : len(conclusions)] = conclusions

    LOGGER.info(
        "dataset: %d samples, %d steps, kb width %d, out width %d",
        len(kbs),
        steps,
        kb_width,
        out_width,
    )
    return DatasetTensors(
        x,
        s,
        y,
        signature,
        tuple(len(p.trace) for p in prepared),
        tuple(kbs),
        tuple(labels),
    )


def save_dataset(dataset: DatasetTensors, directory: str | Path) -> Path:
    """Write ``x.npy``, ``s.npy``, ``y.npy``, ``header.json``, ``samples.tsv`` and KB files."""
    root = Path(directory)
    (root / "kbs").mkdir(parents=True, exist_ok=True)
    np.save(root / "x.npy", dataset.x)
    np.save(root / "s.npy", dataset.s)
    np.save(root / "y.npy", dataset.y)
    header = {
        "samples": len(dataset),
        "steps": dataset.steps,
        "kb_width": dataset.kb_width,
        "support_width": dataset.support_width,
        "out_width": dataset.out_width,
        "max_concepts": dataset.signature.max_concepts,
        "max_roles": dataset.signature.max_roles,
    }
    (root / "header.json").write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")

    files = []
    for index, kb in enumerate(dataset.kbs):
        name = f"kbs/kb-{index:04d}.txt"
        (root / name).write_text(kb.render(include_labels=False), encoding="utf-8")
        files.append(name)
    pd.DataFrame(
        {
            "index": range(len(dataset)),
            "source": dataset.sources,
            "kb_file": files,
            "trace_length": dataset.trace_lengths,
        }
    ).to_csv(root / "samples.tsv", sep="\t", index=False)
    return root


def load_dataset(directory: str | Path) -> DatasetTensors:
    root = Path(directory)
    header = json.loads((root / "header.json").read_text(encoding="utf-8"))
    table = pd.read_csv(root / "samples.tsv", sep="\t", dtype={"source": str})
    x = np.load(root / "x.npy")
    if x.shape[0] != header["samples"] or len(table) != header["samples"]:
        raise ValueError(f"dataset at {root} is inconsistent with its header")
    return DatasetTensors(
        x,
        np.load(root / "s.npy"),
        np.load(root / "y.npy"),
        Signature(int(header["max_concepts"]), int(header["max_roles"])),
        tuple(int(v) for v in table["trace_length"]),
        tuple(read_kb(str(root / name)) for name in table["kb_file"]),
        tuple(str(v) for v in table["source"]),
    )

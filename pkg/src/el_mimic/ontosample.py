"""Loading large ontology dumps and sampling connected, reasoning-active sub-KBs."""

from __future__ import annotations

import logging
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .kb import (
    HEADER_PATTERN,
    LABEL_PATTERN,
    Axiom,
    KBParseError,
    KnowledgeBase,
    Name,
    Renaming,
    Signature,
    anonymize,
    compact,
    strip_comment,
)
from .normalize import (
    GeneralAxiom,
    UnsupportedAxiomError,
    check_supported,
    normalize,
    parse_general_axiom,
)
from .reasoner import saturate

LOGGER = logging.getLogger("el_mimic")

DEFAULT_MAX_RETRIES = 1000


class OntologyLoadError(RuntimeError):
    """The ontology file could not be read or held no usable axioms."""


class SamplingError(RuntimeError):
    """No sample met the activity bound within the retry budget."""

    def __init__(self, message: str, best_steps: int) -> None:
        super().__init__(f"{message} (best trace length found: {best_steps})")
        self.best_steps = best_steps


@dataclass(frozen=True)
class LoadedOntology:
    kb: KnowledgeBase
    skipped: int


def load_ontology(path: str | Path) -> LoadedOntology:
    """Read a general EL+ dump and normalize it into one KB.

    The ``sig`` header is optional here and only sets a lower bound on the
    signature. Axioms outside EL+ (``Top``, ``Bottom``, ``R . Self``) are skipped and
    counted; malformed lines raise :class:`KBParseError`.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OntologyLoadError(f"cannot read ontology {path}: {exc}") from exc

    floor: Signature | None = None
    kept: list[GeneralAxiom] = []
    labels: dict[Name, str] = {}
    skipped = 0
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = strip_comment(raw)
        if not line:
            continue
        header = HEADER_PATTERN.match(line)
        if header and floor is None and not kept:
            floor = Signature(int(header.group(1)), int(header.group(2)))
            continue
        label = LABEL_PATTERN.match(line)
        if label:
            try:
                labels[Name.parse(label.group(1))] = label.group(2).strip()
            except ValueError as exc:
                raise KBParseError(line_number, str(exc)) from exc
            continue
        try:
            axiom = parse_general_axiom(line)
        except ValueError as exc:
            raise KBParseError(line_number, str(exc)) from exc
        try:
            check_supported(axiom)
        except UnsupportedAxiomError as exc:
            LOGGER.info("line %d: skipped, %s", line_number, exc)
            skipped += 1
            continue
        kept.append(axiom)

    if not kept:
        raise OntologyLoadError(f"no usable EL+ axioms in {path} ({skipped} skipped)")

    normalized = normalize(kept, floor)
    signature = normalized.signature
    for name in [n for n in labels if not signature.contains(n)]:
        LOGGER.warning("label for %s dropped: name outside the signature", name)
        del labels[name]
    kb = KnowledgeBase(signature, normalized.axioms, labels)
    LOGGER.info(
        "loaded %s: %d normalized axioms, %d skipped, signature (%d, %d)",
        path,
        len(kb),
        skipped,
        signature.max_concepts,
        signature.max_roles,
    )
    return LoadedOntology(kb, skipped)


@dataclass(frozen=True)
class Sample:
    """An anonymized sub-KB plus the way back to the ontology's own names.

    ``origin`` maps anonymized names to ontology names; ``labels`` are keyed by the
    anonymized names and never enter :attr:`kb`.
    """

    kb: KnowledgeBase
    origin: Renaming
    labels: dict[Name, str] = field(default_factory=dict)
    steps: int = 0
    attempts: int = 1

    def original_name(self, name: Name) -> Name:
        return self.origin.name(name)

    def original_axiom(self, axiom: Axiom) -> Axiom:
        return self.origin.axiom(axiom)

    def label(self, name: Name) -> str | None:
        return self.labels.get(name)


class _Frontier:
    """Candidate positions with O(1) insert, removal and uniform choice."""

    def __init__(self) -> None:
        self.items: list[int] = []
        self.slots: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.items)

    def add(self, position: int) -> None:
        if position not in self.slots:
            self.slots[position] = len(self.items)
            self.items.append(position)

    def pop_random(self, rng: random.Random) -> int:
        slot = rng.randrange(len(self.items))
        chosen = self.items[slot]
        last = self.items.pop()
        if last != chosen:
            self.items[slot] = last
            self.slots[last] = slot
        del self.slots[chosen]
        return chosen


def _name_index(kb: KnowledgeBase) -> dict[Name, list[int]]:
    index: dict[Name, list[int]] = defaultdict(list)
    for position, axiom in enumerate(kb.axioms):
        for name in dict.fromkeys(axiom.names()):
            index[name].append(position)
    return index


def _walk(
    kb: KnowledgeBase, by_name: dict[Name, list[int]], size: int, rng: random.Random
) -> list[int] | None:
    """Grow a connected set of ``size`` positions from a random start axiom."""
    start = rng.randrange(len(kb))
    chosen = {start}
    order = [start]
    visited_names: set[Name] = set()
    frontier = _Frontier()

    def expand(position: int) -> None:
        for name in kb.axioms[position].names():
            if name in visited_names:
                continue
            visited_names.add(name)
            for neighbour in by_name[name]:
                if neighbour not in chosen:
                    frontier.add(neighbour)

    expand(start)
    while len(order) < size:
        if not frontier:
            return None
        position = frontier.pop_random(rng)
        chosen.add(position)
        order.append(position)
        expand(position)
    return order


def sample_connected(
    kb: KnowledgeBase,
    size: int,
    min_steps: int,
    seed: int,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> Sample:
    """Random-walk a connected ``size``-axiom sub-KB whose trace has ``min_steps`` steps.

    Each attempt restarts from a fresh random axiom. The accepted sample is shrunk to
    the names it uses and anonymized.
    """
    if size < 1 or size > len(kb):
        raise ValueError(f"sample size {size} outside 1..{len(kb)}")
    if min_steps < 0:
        raise ValueError("min_steps must be >= 0")

    rng = random.Random(seed)
    by_name = _name_index(kb)
    best = -1
    for attempt in range(1, max_retries + 1):
        positions = _walk(kb, by_name, size, rng)
        if positions is None:
            LOGGER.debug("sample attempt %d: component smaller than %d", attempt, size)
            continue
        sub = kb.restrict(positions)
        steps = len(saturate(sub))
        best = max(best, steps)
        if steps < min_steps:
            LOGGER.debug("sample attempt %d: %d steps < %d", attempt, steps, min_steps)
            continue

        used = sub.names()
        labelled = KnowledgeBase(
            sub.signature,
            sub.axioms,
            {name: text for name, text in kb.labels.items() if name in used},
        )
        compacted, to_compact = compact(labelled)
        anonymized, to_anon = anonymize(compacted, rng.randrange(2**32))
        back_anon = to_anon.inverse()
        back_compact = to_compact.inverse()
        origin = Renaming(
            {
                new: back_compact.concepts[old]
                for new, old in back_anon.concepts.items()
                if old in back_compact.concepts
            },
            {
                new: back_compact.roles[old]
                for new, old in back_anon.roles.items()
                if old in back_compact.roles
            },
        )
        LOGGER.info(
            "sampled %d axioms with %d steps after %d attempt(s)", size, steps, attempt
        )
        return Sample(anonymized, origin, dict(to_anon.labels), steps, attempt)

    raise SamplingError(
        f"no connected {size}-axiom sample with >= {min_steps} steps in {max_retries} attempts",
        max(best, 0),
    )


def sample_many(
    kb: KnowledgeBase,
    count: int,
    size: int,
    min_steps: int,
    seed: int,
    max_retries: int = DEFAULT_MAX_RETRIES,
    threads: int = 1,
) -> list[Sample]:
    """``count`` samples drawn with seeds ``seed .. seed + count - 1``, in seed order."""
    seeds = [seed + offset for offset in range(count)]
    if threads <= 1:
        return [sample_connected(kb, size, min_steps, s, max_retries) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(
            pool.map(lambda s: sample_connected(kb, size, min_steps, s, max_retries), seeds)
        )

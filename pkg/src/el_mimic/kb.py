"""Names, normal-form axioms, knowledge bases, and the canonical KB text format."""

from __future__ import annotations

import logging
import random
import re
from collections.abc import Callable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field, fields
from enum import Enum
from functools import cached_property
from typing import ClassVar, Union

import networkx as nx

LOGGER = logging.getLogger("el_mimic")


class Kind(str, Enum):
    """Name kind; the value is the prefix used in the text format."""

    CONCEPT = "C"
    ROLE = "R"


@dataclass(frozen=True, order=True)
class Name:
    """A concept or role name identified by a positive integer."""

    kind: Kind
    index: int

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"name index must be >= 1, got {self.index}")

    def __str__(self) -> str:
        return f"{self.kind.value}{self.index}"

    @staticmethod
    def parse(token: str) -> Name:
        """Parse ``C12`` / ``R3`` into a :class:`Name`."""
        match = re.fullmatch(r"([CR])(\d+)", token.strip())
        if not match:
            raise ValueError(f"not a name: {token!r}")
        return Name(Kind(match.group(1)), int(match.group(2)))


class SignatureError(ValueError):
    """A name index lies outside the signature bounds."""


@dataclass(frozen=True)
class Signature:
    """Counts of usable concept and role names."""

    max_concepts: int
    max_roles: int

    def __post_init__(self) -> None:
        if self.max_concepts < 1 or self.max_roles < 1:
            raise ValueError(
                "signature needs max_concepts >= 1 and max_roles >= 1, "
                f"got ({self.max_concepts}, {self.max_roles})"
            )

    def bound(self, kind: Kind) -> int:
        return self.max_concepts if kind is Kind.CONCEPT else self.max_roles

    def contains(self, name: Name) -> bool:
        return 1 <= name.index <= self.bound(name.kind)

    def check(self, name: Name) -> None:
        if not self.contains(name):
            raise SignatureError(
                f"{name} is outside signature (concepts={self.max_concepts}, "
                f"roles={self.max_roles})"
            )

    def union(self, other: Signature) -> Signature:
        return Signature(
            max(self.max_concepts, other.max_concepts), max(self.max_roles, other.max_roles)
        )


class _AxiomBase:
    """Shared behaviour of the six normal forms.

    Subclasses are frozen dataclasses whose fields are integer name indices; the
    kind of every field is declared positionally in ``KINDS``.
    """

    KINDS: ClassVar[tuple[Kind, ...]]
    TEMPLATE: ClassVar[str]

    def indices(self) -> tuple[int, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))  # type: ignore[arg-type]

    def names(self) -> tuple[Name, ...]:
        return tuple(Name(kind, index) for kind, index in zip(self.KINDS, self.indices()))

    def rename(self, fn: Callable[[Name], Name]) -> Axiom:
        """Return the same form with every name mapped through ``fn``."""
        renamed = []
        for name in self.names():
            new = fn(name)
            if new.kind is not name.kind:
                raise ValueError(f"renaming changed the kind of {name}")
            renamed.append(new.index)
        return type(self)(*renamed)  # type: ignore[return-value]

    def render(self) -> str:
        return self.TEMPLATE.format(*self.indices())

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Sub(_AxiomBase):
    """``C ⊑ D``"""

    c: int
    d: int
    KINDS: ClassVar[tuple[Kind, ...]] = (Kind.CONCEPT, Kind.CONCEPT)
    TEMPLATE: ClassVar[str] = "C{} < C{}"


@dataclass(frozen=True)
class SubConj(_AxiomBase):
    """``C1 ⊓ C2 ⊑ D``"""

    c1: int
    c2: int
    d: int
    KINDS: ClassVar[tuple[Kind, ...]] = (Kind.CONCEPT, Kind.CONCEPT, Kind.CONCEPT)
    TEMPLATE: ClassVar[str] = "C{} & C{} < C{}"


@dataclass(frozen=True)
class SubEx(_AxiomBase):
    """``C ⊑ ∃R.D``"""

    c: int
    r: int
    d: int
    KINDS: ClassVar[tuple[Kind, ...]] = (Kind.CONCEPT, Kind.ROLE, Kind.CONCEPT)
    TEMPLATE: ClassVar[str] = "C{} < R{} . C{}"


@dataclass(frozen=True)
class ExSub(_AxiomBase):
    """``∃R.C ⊑ D``"""

    r: int
    c: int
    d: int
    KINDS: ClassVar[tuple[Kind, ...]] = (Kind.ROLE, Kind.CONCEPT, Kind.CONCEPT)
    TEMPLATE: ClassVar[str] = "R{} . C{} < C{}"


@dataclass(frozen=True)
class RoleSub(_AxiomBase):
    """``R ⊑ S``"""

    r: int
    s: int
    KINDS: ClassVar[tuple[Kind, ...]] = (Kind.ROLE, Kind.ROLE)
    TEMPLATE: ClassVar[str] = "R{} < R{}"


@dataclass(frozen=True)
class RoleChain(_AxiomBase):
    """``R1 ∘ R2 ⊑ S``"""

    r1: int
    r2: int
    s: int
    KINDS: ClassVar[tuple[Kind, ...]] = (Kind.ROLE, Kind.ROLE, Kind.ROLE)
    TEMPLATE: ClassVar[str] = "R{} * R{} < R{}"


Axiom = Union[Sub, SubConj, SubEx, ExSub, RoleSub, RoleChain]
AXIOM_FORMS: tuple[type[_AxiomBase], ...] = (Sub, SubConj, SubEx, ExSub, RoleSub, RoleChain)

_C = r"C(\d+)"
_R = r"R(\d+)"
_AXIOM_PATTERNS: tuple[tuple[re.Pattern[str], type[_AxiomBase]], ...] = (
    (re.compile(rf"^{_C}\s*&\s*{_C}\s*<\s*{_C}$"), SubConj),
    (re.compile(rf"^{_C}\s*<\s*{_R}\s*\.\s*{_C}$"), SubEx),
    (re.compile(rf"^{_R}\s*\.\s*{_C}\s*<\s*{_C}$"), ExSub),
    (re.compile(rf"^{_R}\s*\*\s*{_R}\s*<\s*{_R}$"), RoleChain),
    (re.compile(rf"^{_C}\s*<\s*{_C}$"), Sub),
    (re.compile(rf"^{_R}\s*<\s*{_R}$"), RoleSub),
)
HEADER_PATTERN = re.compile(r"^sig\s+(\d+)\s+(\d+)$")
LABEL_PATTERN = re.compile(r"^label\s+([CR]\d+)\s+(.+)$")


def render_axiom(axiom: Axiom) -> str:
    """Render an axiom in the canonical single-line grammar."""
    return axiom.render()


def canonical_key(axiom: Axiom) -> str:
    """Sort key used wherever axioms need a deterministic order."""
    return axiom.render()


def parse_axiom(text: str) -> Axiom:
    """Parse one canonical axiom line (no comment, no header)."""
    stripped = text.strip()
    for pattern, form in _AXIOM_PATTERNS:
        match = pattern.match(stripped)
        if match:
            indices = [int(group) for group in match.groups()]
            if any(index < 1 for index in indices):
                raise ValueError(f"name index 0 in {stripped!r}")
            return form(*indices)  # type: ignore[return-value]
    raise ValueError(f"not a normal-form axiom: {stripped!r}")


def strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


@dataclass(frozen=True)
class KnowledgeBase:
    """An ordered, duplicate-free list of normal-form axioms over a signature.

    Labels are kept beside the axioms and never reach the numeric pipeline.
    """

    signature: Signature
    axioms: tuple[Axiom, ...]
    labels: Mapping[Name, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        seen: set[Axiom] = set()
        for axiom in self.axioms:
            if axiom in seen:
                raise ValueError(f"duplicate axiom {axiom}")
            seen.add(axiom)
            for name in axiom.names():
                self.signature.check(name)
        for name in self.labels:
            self.signature.check(name)

    def __len__(self) -> int:
        return len(self.axioms)

    def __iter__(self) -> Iterator[Axiom]:
        return iter(self.axioms)

    def __contains__(self, axiom: object) -> bool:
        return axiom in self.positions

    @cached_property
    def positions(self) -> dict[Axiom, int]:
        return {axiom: index for index, axiom in enumerate(self.axioms)}

    def index_of(self, axiom: Axiom) -> int:
        return self.positions[axiom]

    def names(self) -> set[Name]:
        return {name for axiom in self.axioms for name in axiom.names()}

    def restrict(self, indices: Iterable[int]) -> KnowledgeBase:
        """Sub-KB of the given positions, kept in KB order, same signature."""
        keep = sorted(set(indices))
        return KnowledgeBase(self.signature, tuple(self.axioms[i] for i in keep))

    def extend(self, axioms: Iterable[Axiom]) -> KnowledgeBase:
        """Append axioms not already present."""
        merged = list(self.axioms)
        present = set(merged)
        for axiom in axioms:
            if axiom not in present:
                present.add(axiom)
                merged.append(axiom)
        return KnowledgeBase(self.signature, tuple(merged), self.labels)

    def render(self, include_labels: bool = True) -> str:
        lines = [f"sig {self.signature.max_concepts} {self.signature.max_roles}"]
        lines.extend(axiom.render() for axiom in self.axioms)
        if include_labels:
            lines.extend(f"label {name} {text}" for name, text in sorted(self.labels.items()))
        return "\n".join(lines) + "\n"


class KBParseError(ValueError):
    """Malformed KB text; ``line_number`` is 1-based."""

    def __init__(self, line_number: int, message: str) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def parse_kb(text: str) -> KnowledgeBase:
    """Parse the canonical KB format.

    The first content line must be ``sig <maxConcepts> <maxRoles>``. Duplicate axioms
    are logged and dropped; everything else malformed raises :class:`KBParseError`.
    """
    signature: Signature | None = None
    axioms: list[Axiom] = []
    seen: set[Axiom] = set()
    labels: dict[Name, str] = {}

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = strip_comment(raw)
        if not line:
            continue
        if signature is None:
            header = HEADER_PATTERN.match(line)
            if not header:
                raise KBParseError(line_number, "expected header 'sig <concepts> <roles>'")
            try:
                signature = Signature(int(header.group(1)), int(header.group(2)))
            except ValueError as exc:
                raise KBParseError(line_number, str(exc)) from exc
            continue

        label = LABEL_PATTERN.match(line)
        if label:
            try:
                name = Name.parse(label.group(1))
                signature.check(name)
            except ValueError as exc:
                raise KBParseError(line_number, str(exc)) from exc
            labels[name] = label.group(2).strip()
            continue

        try:
            axiom = parse_axiom(line)
            for name in axiom.names():
                signature.check(name)
        except ValueError as exc:
            raise KBParseError(line_number, str(exc)) from exc
        if axiom in seen:
            LOGGER.warning("line %d: duplicate axiom %s dropped", line_number, axiom)
            continue
        seen.add(axiom)
        axioms.append(axiom)

    if signature is None:
        raise KBParseError(1, "missing 'sig' header")
    return KnowledgeBase(signature, tuple(axioms), labels)


def read_kb(path: str) -> KnowledgeBase:
    with open(path, encoding="utf-8") as handle:
        return parse_kb(handle.read())


@dataclass(frozen=True)
class Renaming:
    """A bijective renaming of concept and role indices, plus detached labels."""

    concepts: Mapping[int, int]
    roles: Mapping[int, int]
    labels: Mapping[Name, str] = field(default_factory=dict)

    def name(self, name: Name) -> Name:
        table = self.concepts if name.kind is Kind.CONCEPT else self.roles
        return Name(name.kind, table.get(name.index, name.index))

    def axiom(self, axiom: Axiom) -> Axiom:
        return axiom.rename(self.name)

    def kb(self, kb: KnowledgeBase, signature: Signature | None = None) -> KnowledgeBase:
        return KnowledgeBase(
            signature or kb.signature, tuple(self.axiom(axiom) for axiom in kb.axioms)
        )

    def inverse(self) -> Renaming:
        return Renaming(
            {new: old for old, new in self.concepts.items()},
            {new: old for old, new in self.roles.items()},
        )


def anonymize(kb: KnowledgeBase, seed: int) -> tuple[KnowledgeBase, Renaming]:
    """Rename names onto a seeded random permutation of the signature.

    Labels are moved off the KB into the returned renaming, keyed by the new names.
    """
    rng = random.Random(seed)
    concept_perm = list(range(1, kb.signature.max_concepts + 1))
    role_perm = list(range(1, kb.signature.max_roles + 1))
    rng.shuffle(concept_perm)
    rng.shuffle(role_perm)
    concepts = {old: new for old, new in enumerate(concept_perm, start=1)}
    roles = {old: new for old, new in enumerate(role_perm, start=1)}
    renaming = Renaming(concepts, roles)
    labels = {renaming.name(name): text for name, text in kb.labels.items()}
    renaming = Renaming(concepts, roles, labels)
    return renaming.kb(kb), renaming


def compact(kb: KnowledgeBase) -> tuple[KnowledgeBase, Renaming]:
    """Shrink the signature to the names actually used, preserving their order."""
    used = sorted(kb.names())
    concepts = [n.index for n in used if n.kind is Kind.CONCEPT]
    roles = [n.index for n in used if n.kind is Kind.ROLE]
    renaming = Renaming(
        {old: new for new, old in enumerate(concepts, start=1)},
        {old: new for new, old in enumerate(roles, start=1)},
    )
    signature = Signature(max(1, len(concepts)), max(1, len(roles)))
    used_set = set(used)
    labels = {renaming.name(name): text for name, text in kb.labels.items() if name in used_set}
    compacted = renaming.kb(kb, signature)
    return KnowledgeBase(compacted.signature, compacted.axioms, labels), renaming


def incidence_graph(axioms: Iterable[Axiom]) -> nx.Graph:
    """Bipartite graph linking axiom positions (ints) to the names they mention."""
    graph = nx.Graph()
    for position, axiom in enumerate(axioms):
        graph.add_node(position, bipartite=0)
        for name in axiom.names():
            graph.add_edge(position, name)
    return graph


def is_connected(kb: KnowledgeBase) -> bool:
    """True when the axiom-name incidence graph has a single component."""
    if not kb.axioms:
        return True
    return bool(nx.is_connected(incidence_graph(kb.axioms)))

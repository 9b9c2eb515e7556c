"""Breadth-first EL+ completion with an ordered trace of derivation steps.

Rules (``X ⊑ X`` is an implicit premise everywhere and is never emitted):

1. ``A⊑B, B⊑C ⟹ A⊑C``
2. ``A⊑B1, A⊑B2, B1⊓B2⊑C ⟹ A⊑C``
3. ``A⊑B, B⊑∃R.C ⟹ A⊑∃R.C``
4. ``A⊑∃R.B, B⊑C, ∃R.C⊑D ⟹ A⊑D``
5. ``A⊑∃R.B, R⊑S ⟹ A⊑∃S.B``
6. ``A⊑∃R1.B, B⊑∃R2.C, R1∘R2⊑S ⟹ A⊑∃S.C``
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from collections.abc import Iterator
from dataclasses import dataclass
from enum import IntEnum
from typing import Union

from .kb import (
    Axiom,
    ExSub,
    KnowledgeBase,
    RoleChain,
    RoleSub,
    Sub,
    SubConj,
    SubEx,
    canonical_key,
)

LOGGER = logging.getLogger("el_mimic")

Conclusion = Union[Sub, SubEx]


class RuleId(IntEnum):
    TRANSITIVITY = 1
    CONJUNCTION = 2
    EXISTENTIAL_INTRO = 3
    EXISTENTIAL_ELIM = 4
    ROLE_HIERARCHY = 5
    ROLE_CHAIN = 6


@dataclass(frozen=True)
class Derivation:
    """One rule application producing a new conclusion."""

    conclusion: Conclusion
    rule: RuleId
    premises: tuple[Axiom, ...]

    def sort_key(self) -> tuple[int, tuple[str, ...]]:
        return int(self.rule), tuple(canonical_key(p) for p in self.premises)


@dataclass(frozen=True)
class ReasoningTrace:
    """Steps of newly derived conclusions, each in canonical axiom order."""

    kb: KnowledgeBase
    steps: tuple[tuple[Derivation, ...], ...]

    def __len__(self) -> int:
        return len(self.steps)

    def derivations(self) -> Iterator[tuple[int, Derivation]]:
        """Yield ``(step, derivation)`` pairs; steps are 1-based."""
        for step, derivations in enumerate(self.steps, start=1):
            for derivation in derivations:
                yield step, derivation

    def step_conclusions(self, step: int) -> tuple[Conclusion, ...]:
        return tuple(d.conclusion for d in self.steps[step - 1])

    def max_step_width(self) -> int:
        return max((len(step) for step in self.steps), default=0)


class UnsupportedQueryError(ValueError):
    """Entailment queries only cover the two conclusion forms."""


class _Index:
    """Lookup maps over the statements known so far."""

    def __init__(self, kb: KnowledgeBase) -> None:
        self.sup: dict[int, set[int]] = defaultdict(set)
        self.ex_out: dict[int, set[tuple[int, int]]] = defaultdict(set)
        self.conj: dict[tuple[int, int], set[int]] = defaultdict(set)
        self.exsub: dict[tuple[int, int], set[int]] = defaultdict(set)
        self.role_sup: dict[int, set[int]] = defaultdict(set)
        self.chains: dict[tuple[int, int], set[int]] = defaultdict(set)
        self.known: set[Axiom] = set()
        self.concepts: set[int] = set()
        for axiom in kb.axioms:
            self.add(axiom)

    def add(self, axiom: Axiom) -> None:
        self.known.add(axiom)
        if isinstance(axiom, Sub):
            self.sup[axiom.c].add(axiom.d)
            self.concepts.update((axiom.c, axiom.d))
        elif isinstance(axiom, SubEx):
            self.ex_out[axiom.c].add((axiom.r, axiom.d))
            self.concepts.update((axiom.c, axiom.d))
        elif isinstance(axiom, SubConj):
            self.conj[(axiom.c1, axiom.c2)].add(axiom.d)
            self.concepts.update((axiom.c1, axiom.c2, axiom.d))
        elif isinstance(axiom, ExSub):
            self.exsub[(axiom.r, axiom.c)].add(axiom.d)
            self.concepts.update((axiom.c, axiom.d))
        elif isinstance(axiom, RoleSub):
            self.role_sup[axiom.r].add(axiom.s)
        elif isinstance(axiom, RoleChain):
            self.chains[(axiom.r1, axiom.r2)].add(axiom.s)

    def subsumers(self, concept: int) -> list[int]:
        """``concept`` itself first, then its known subsumers in index order."""
        return [concept, *sorted(self.sup.get(concept, set()) - {concept})]


def _premise(a: int, b: int) -> list[Axiom]:
    """The ``a ⊑ b`` premise, or nothing when it is the implicit reflexive one."""
    return [] if a == b else [Sub(a, b)]


def _dedupe(premises: list[Axiom]) -> tuple[Axiom, ...]:
    return tuple(dict.fromkeys(premises))


def _one_step(index: _Index) -> list[Derivation]:
    """All single rule applications over ``index`` whose conclusion is new."""
    found: list[Derivation] = []

    def offer(conclusion: Conclusion, rule: RuleId, premises: list[Axiom]) -> None:
        if isinstance(conclusion, Sub) and conclusion.c == conclusion.d:
            return
        if conclusion in index.known:
            return
        found.append(Derivation(conclusion, rule, _dedupe(premises)))

    for a in sorted(index.sup):
        for b in sorted(index.sup[a]):
            if b == a:
                continue
            for c in sorted(index.sup.get(b, ())):
                offer(Sub(a, c), RuleId.TRANSITIVITY, [Sub(a, b), Sub(b, c)])
            for r, c in sorted(index.ex_out.get(b, ())):
                offer(SubEx(a, r, c), RuleId.EXISTENTIAL_INTRO, [Sub(a, b), SubEx(b, r, c)])

    if index.conj:
        for a in sorted(index.concepts):
            subsumers = index.subsumers(a)
            for b1 in subsumers:
                for b2 in subsumers:
                    for c in sorted(index.conj.get((b1, b2), ())):
                        offer(
                            Sub(a, c),
                            RuleId.CONJUNCTION,
                            [*_premise(a, b1), *_premise(a, b2), SubConj(b1, b2, c)],
                        )

    for a in sorted(index.ex_out):
        for r, b in sorted(index.ex_out[a]):
            edge = SubEx(a, r, b)
            for c in index.subsumers(b):
                for d in sorted(index.exsub.get((r, c), ())):
                    offer(
                        Sub(a, d),
                        RuleId.EXISTENTIAL_ELIM,
                        [edge, *_premise(b, c), ExSub(r, c, d)],
                    )
            for s in sorted(index.role_sup.get(r, ())):
                offer(SubEx(a, s, b), RuleId.ROLE_HIERARCHY, [edge, RoleSub(r, s)])
            for r2, c in sorted(index.ex_out.get(b, ())):
                for s in sorted(index.chains.get((r, r2), ())):
                    offer(
                        SubEx(a, s, c),
                        RuleId.ROLE_CHAIN,
                        [edge, SubEx(b, r2, c), RoleChain(r, r2, s)],
                    )
    return found


def saturate(kb: KnowledgeBase) -> ReasoningTrace:
    """Apply every rule to the known statements, one breadth-first layer per step.

    Each conclusion keeps the first derivation in rule-then-premise order; steps are
    stored sorted by rendered conclusion.
    """
    index = _Index(kb)
    steps: list[tuple[Derivation, ...]] = []
    while True:
        best: dict[Conclusion, Derivation] = {}
        for derivation in _one_step(index):
            current = best.get(derivation.conclusion)
            if current is None or derivation.sort_key() < current.sort_key():
                best[derivation.conclusion] = derivation
        if not best:
            break
        layer = tuple(sorted(best.values(), key=lambda d: canonical_key(d.conclusion)))
        for derivation in layer:
            index.add(derivation.conclusion)
        steps.append(layer)
        LOGGER.debug("saturation step %d: %d new conclusions", len(steps), len(layer))
    return ReasoningTrace(kb, tuple(steps))


def completion_set(trace: ReasoningTrace) -> set[Conclusion]:
    """Every conclusion of the trace, without the KB axioms."""
    return {derivation.conclusion for _, derivation in trace.derivations()}


def entails(kb: KnowledgeBase, axiom: Axiom) -> bool:
    """True when ``axiom`` is in the KB or derived by saturation."""
    if not isinstance(axiom, (Sub, SubEx)):
        raise UnsupportedQueryError(
            f"entailment queries must be 'C < C' or 'C < R . C', got '{axiom}'"
        )
    if axiom in kb:
        return True
    return axiom in completion_set(saturate(kb))


def rule_counts(trace: ReasoningTrace) -> Counter[RuleId]:
    """How often each rule produced a conclusion in the trace."""
    return Counter(derivation.rule for _, derivation in trace.derivations())


def dump_trace(trace: ReasoningTrace) -> str:
    """``step <t> | rule <k> | <axiom> <= <premise>; <premise>...`` per derivation."""
    lines = [
        f"step {step} | rule {int(d.rule)} | {d.conclusion} <= "
        + "; ".join(str(p) for p in d.premises)
        for step, d in trace.derivations()
    ]
    return "\n".join(lines) + ("\n" if lines else "")

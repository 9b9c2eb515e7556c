"""Supports: the original KB axioms behind every conclusion of a trace."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from .kb import Axiom
from .reasoner import ReasoningTrace


class SupportConsistencyError(RuntimeError):
    """A derivation cites a premise that is neither a KB axiom nor an earlier conclusion."""


@dataclass(frozen=True)
class SupportMap:
    """Conclusion -> positions (in ``trace.kb.axioms``) of its supporting KB axioms."""

    trace: ReasoningTrace
    entries: Mapping[Axiom, frozenset[int]]

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, axiom: Axiom) -> frozenset[int]:
        return self.support_of(axiom)

    def support_of(self, axiom: Axiom) -> frozenset[int]:
        """Support of a conclusion; a KB axiom supports itself."""
        kb = self.trace.kb
        if axiom in kb:
            return frozenset({kb.index_of(axiom)})
        return self.entries[axiom]


def extract_supports(trace: ReasoningTrace) -> SupportMap:
    """Replace every derived premise by its own support, step by step.

    Step-1 premises are KB axioms; later premises that were concluded earlier are
    replaced by the support recorded for them.
    """
    kb = trace.kb
    entries: dict[Axiom, frozenset[int]] = {}
    for step, derivation in trace.derivations():
        support: set[int] = set()
        for premise in derivation.premises:
            if premise in kb:
                support.add(kb.index_of(premise))
            elif premise in entries:
                support.update(entries[premise])
            else:
                raise SupportConsistencyError(
                    f"step {step}: premise '{premise}' of '{derivation.conclusion}' "
                    "is neither a KB axiom nor an earlier conclusion"
                )
        entries[derivation.conclusion] = frozenset(support)
    return SupportMap(trace, entries)


def step_support_union(trace: ReasoningTrace, supports: SupportMap, step: int) -> list[int]:
    """Sorted union of the supports of every conclusion derived at ``step`` (1-based)."""
    if not 1 <= step <= len(trace):
        raise ValueError(f"step {step} is outside 1..{len(trace)}")
    union: set[int] = set()
    for conclusion in trace.step_conclusions(step):
        union.update(supports.support_of(conclusion))
    return sorted(union)


def dump_supports(supports: SupportMap) -> str:
    """``<axiom> :: <i1>,<i2>,...`` per conclusion, in trace order."""
    lines = [
        f"{derivation.conclusion} :: "
        + ",".join(str(i) for i in sorted(supports.entries[derivation.conclusion]))
        for _, derivation in supports.trace.derivations()
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def supporting_axioms(supports: SupportMap, axiom: Axiom) -> list[Axiom]:
    """The support of ``axiom`` as axioms, in KB order."""
    kb = supports.trace.kb
    return [kb.axioms[i] for i in sorted(supports.support_of(axiom))]

import random
from collections.abc import Callable

import pytest

from el_mimic.kb import (
    AXIOM_FORMS,
    Axiom,
    ExSub,
    KnowledgeBase,
    RoleChain,
    RoleSub,
    Signature,
    Sub,
    SubConj,
    SubEx,
    parse_kb,
)


def naive_closure(kb: KnowledgeBase) -> set[Axiom]:
    """Apply every rule to every tuple of known statements until nothing changes.

    Returns the derived statements without the KB axioms. Step structure is ignored.
    """
    known: set[Axiom] = set(kb.axioms)
    concepts = {n.index for n in kb.names() if n.kind.value == "C"}
    conj = [a for a in kb.axioms if isinstance(a, SubConj)]
    exsub = [a for a in kb.axioms if isinstance(a, ExSub)]
    rolesub = [a for a in kb.axioms if isinstance(a, RoleSub)]
    chains = [a for a in kb.axioms if isinstance(a, RoleChain)]
    while True:
        subs = {(a.c, a.d) for a in known if isinstance(a, Sub)} | {(c, c) for c in concepts}
        exs = {(a.c, a.r, a.d) for a in known if isinstance(a, SubEx)}
        new: set[Axiom] = set()
        for a, b in subs:
            for b2, c in subs:
                if b == b2:
                    new.add(Sub(a, c))
            for b2, r, c in exs:
                if b == b2:
                    new.add(SubEx(a, r, c))
        for axiom in conj:
            for a in concepts:
                if (a, axiom.c1) in subs and (a, axiom.c2) in subs:
                    new.add(Sub(a, axiom.d))
        for a, r, b in exs:
            for axiom in exsub:
                if axiom.r == r and (b, axiom.c) in subs:
                    new.add(Sub(a, axiom.d))
            for axiom in rolesub:
                if axiom.r == r:
                    new.add(SubEx(a, axiom.s, b))
            for b2, r2, c in exs:
                if b2 != b:
                    continue
                for axiom in chains:
                    if axiom.r1 == r and axiom.r2 == r2:
                        new.add(SubEx(a, axiom.s, c))
        new = {x for x in new if not (isinstance(x, Sub) and x.c == x.d)} - known
        if not new:
            return known - set(kb.axioms)
        known |= new


def random_kb(
    seed: int, axioms: int = 20, max_concepts: int = 8, max_roles: int = 3
) -> KnowledgeBase:
    """Uniform draws over the six forms on a small signature, without repeats."""
    rng = random.Random(seed)
    signature = Signature(max_concepts, max_roles)
    drawn: dict[Axiom, None] = {}
    while len(drawn) < axioms:
        form = rng.choice(AXIOM_FORMS)
        indices = [rng.randint(1, signature.bound(kind)) for kind in form.KINDS]
        drawn.setdefault(form(*indices), None)  # type: ignore[arg-type]
    return KnowledgeBase(signature, tuple(drawn))


@pytest.fixture
def closure_oracle() -> Callable[[KnowledgeBase], set[Axiom]]:
    return naive_closure


@pytest.fixture
def make_random_kb() -> Callable[..., KnowledgeBase]:
    return random_kb


@pytest.fixture
def five_axiom_kb() -> KnowledgeBase:
    return parse_kb(
        "sig 5 1\nC1 < C2\nC1 < C3\nC2 & C3 < C4\nC4 < R1 . C1\nR1 . C1 < C5\n"
    )


@pytest.fixture
def chain_kb() -> KnowledgeBase:
    return parse_kb("sig 4 1\nC1 < C2\nC2 < C3\nC3 < C4\n")

"""Synthetic EL+ knowledge bases with a forced lower bound on reasoning length.

A KB is a structured chain of ``iterations`` gadgets plus a random part drawn from a
name pool that shares only the seed concept with the chain. Gadget ``t`` over fresh
concepts ``A B C D E Z`` (``N`` is the next gadget's ``A``) and roles ``R S P T``::

    A < B            B < C            A & B < D        B < R . N
    R < S            N < P . E        R * P < T        R . Zn < Z

``Zn`` is the next gadget's ``Z`` (``N`` itself for the last gadget), so ``A ⊑ Z``
can only follow ``N ⊑ Zn``: the seed reaches its terminal no earlier than step
``iterations + 1``, and every gadget fires all six rules.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, replace

from .kb import (
    AXIOM_FORMS,
    Axiom,
    ExSub,
    Kind,
    KnowledgeBase,
    RoleChain,
    RoleSub,
    Signature,
    Sub,
    SubConj,
    SubEx,
    anonymize,
)

LOGGER = logging.getLogger("el_mimic")

AXIOMS_PER_ITERATION = 8
CONCEPTS_PER_ITERATION = 6
ROLES_PER_ITERATION = 4
MAX_DRAW_ATTEMPTS = 1000


class GeneratorConfigError(ValueError):
    """The requested generator settings cannot be satisfied."""


@dataclass(frozen=True)
class GenConfig:
    """Generator settings.

    ``random_axioms=None`` means twice the structured count. ``concept_headroom`` and
    ``role_headroom`` size the random name pool (``None`` concept headroom means one
    fresh concept per random axiom). ``max_concepts`` / ``max_roles`` optionally fix
    the signature; generation fails when the names do not fit.
    """

    iterations: int = 4
    random_axioms: int | None = None
    concept_headroom: int | None = None
    role_headroom: int = 4
    seed: int = 0
    max_concepts: int | None = None
    max_roles: int | None = None

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise GeneratorConfigError("iterations must be >= 1")
        if self.random_axioms is not None and self.random_axioms < 0:
            raise GeneratorConfigError("random_axioms must be >= 0")
        if self.concept_headroom is not None and self.concept_headroom < 0:
            raise GeneratorConfigError("concept_headroom must be >= 0")
        if self.role_headroom < 0:
            raise GeneratorConfigError("role_headroom must be >= 0")

    @property
    def resolved_random_axioms(self) -> int:
        if self.random_axioms is None:
            return 2 * structured_count(self.iterations)
        return self.random_axioms

    @property
    def resolved_concept_headroom(self) -> int:
        if self.concept_headroom is None:
            return self.resolved_random_axioms
        return self.concept_headroom

    def required_signature(self) -> Signature:
        concepts = structured_concepts(self.iterations)
        roles = ROLES_PER_ITERATION * self.iterations
        if self.resolved_random_axioms:
            concepts += self.resolved_concept_headroom
            roles += self.role_headroom
        return Signature(concepts, roles)


def structured_count(iterations: int) -> int:
    return AXIOMS_PER_ITERATION * iterations


def structured_concepts(iterations: int) -> int:
    return CONCEPTS_PER_ITERATION * iterations + 1


def structured_part(iterations: int) -> tuple[list[Axiom], int, int]:
    """Gadget axioms, plus the number of concepts and roles they use.

    Concept 1 is the seed; gadget inputs ``A_t`` are ``1..iterations+1``.
    """
    inputs = list(range(1, iterations + 2))
    next_concept = len(inputs) + 1
    next_role = 1
    gadgets: list[dict[str, int]] = []
    for t in range(iterations):
        names = {"A": inputs[t], "N": inputs[t + 1]}
        for key in "BCDEZ":
            names[key] = next_concept
            next_concept += 1
        for key in "RSPT":
            names[key] = next_role
            next_role += 1
        gadgets.append(names)

    axioms: list[Axiom] = []
    for t, g in enumerate(gadgets):
        terminal_next = gadgets[t + 1]["Z"] if t + 1 < iterations else g["N"]
        axioms.extend(
            [
                Sub(g["A"], g["B"]),
                Sub(g["B"], g["C"]),
                SubConj(g["A"], g["B"], g["D"]),
                SubEx(g["B"], g["R"], g["N"]),
                RoleSub(g["R"], g["S"]),
                SubEx(g["N"], g["P"], g["E"]),
                RoleChain(g["R"], g["P"], g["T"]),
                ExSub(g["R"], terminal_next, g["Z"]),
            ]
        )
    return axioms, next_concept - 1, next_role - 1


def _is_reflexive(axiom: Axiom) -> bool:
    return (isinstance(axiom, Sub) and axiom.c == axiom.d) or (
        isinstance(axiom, RoleSub) and axiom.r == axiom.s
    )


def random_part(
    rng: random.Random,
    count: int,
    seed_concept: int,
    concept_pool: list[int],
    role_pool: list[int],
    existing: set[Axiom],
) -> list[Axiom]:
    """Draw ``count`` axioms over the pool, each sharing a name with those before.

    Forms are drawn uniformly; one position is pinned to an already-connected name.
    """
    pools = {Kind.CONCEPT: [seed_concept, *concept_pool], Kind.ROLE: list(role_pool)}
    connected: dict[Kind, list[int]] = {Kind.CONCEPT: [seed_concept], Kind.ROLE: []}
    seen = set(existing)
    drawn: list[Axiom] = []
    for number in range(count):
        for _ in range(MAX_DRAW_ATTEMPTS):
            form = rng.choice(AXIOM_FORMS)
            kinds = form.KINDS
            anchors = [i for i, kind in enumerate(kinds) if connected[kind]]
            if not anchors or any(not pools[kind] for kind in kinds):
                continue
            indices = [rng.choice(pools[kind]) for kind in kinds]
            pin = rng.choice(anchors)
            indices[pin] = rng.choice(connected[kinds[pin]])
            axiom: Axiom = form(*indices)  # type: ignore[assignment]
            if _is_reflexive(axiom) or axiom in seen:
                continue
            seen.add(axiom)
            drawn.append(axiom)
            for name in axiom.names():
                if name.index not in connected[name.kind]:
                    connected[name.kind].append(name.index)
            break
        else:
            raise GeneratorConfigError(
                f"could not draw random axiom {number + 1} of {count}; "
                "enlarge concept_headroom/role_headroom"
            )
    return drawn


def generate(cfg: GenConfig) -> KnowledgeBase:
    """Build one KB: structured chain, connected random part, shuffled and renamed."""
    required = cfg.required_signature()
    if (cfg.max_concepts is not None and cfg.max_concepts < required.max_concepts) or (
        cfg.max_roles is not None and cfg.max_roles < required.max_roles
    ):
        raise GeneratorConfigError(
            f"{cfg.iterations} iterations with the requested random pool need "
            f"{required.max_concepts} concepts and {required.max_roles} roles; "
            f"signature allows ({cfg.max_concepts}, {cfg.max_roles})"
        )

    rng = random.Random(cfg.seed)
    axioms, used_concepts, used_roles = structured_part(cfg.iterations)
    random_count = cfg.resolved_random_axioms
    if random_count:
        concept_pool = list(
            range(used_concepts + 1, used_concepts + cfg.resolved_concept_headroom + 1)
        )
        role_pool = list(range(used_roles + 1, used_roles + cfg.role_headroom + 1))
        axioms.extend(random_part(rng, random_count, 1, concept_pool, role_pool, set(axioms)))
    rng.shuffle(axioms)

    signature = Signature(
        cfg.max_concepts or required.max_concepts, cfg.max_roles or required.max_roles
    )
    kb, _ = anonymize(KnowledgeBase(signature, tuple(axioms)), rng.randrange(2**32))
    LOGGER.debug(
        "generated KB seed=%d axioms=%d signature=(%d, %d)",
        cfg.seed,
        len(kb),
        signature.max_concepts,
        signature.max_roles,
    )
    return kb


def generate_batch(cfg: GenConfig, count: int) -> list[KnowledgeBase]:
    """``count`` KBs from seeds ``cfg.seed + 0 .. cfg.seed + count - 1``."""
    return [generate(replace(cfg, seed=cfg.seed + offset)) for offset in range(count)]

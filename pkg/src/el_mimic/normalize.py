"""General EL+ expressions, their text syntax, and normalization to the six forms.

General syntax extends the canonical grammar: ``&`` conjunction, ``R . X`` existential
(binds to the following term), parentheses, ``=`` equivalence, ``R1 * R2 * R3 < S``
chains of any length, plus ``Top``, ``Bottom`` and ``R . Self``, which parse but are
rejected by :func:`normalize`.
"""

from __future__ import annotations

import re
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Union

from .kb import (
    AXIOM_FORMS,
    Axiom,
    ExSub,
    Kind,
    RoleChain,
    RoleSub,
    Signature,
    Sub,
    SubConj,
    SubEx,
)


@dataclass(frozen=True)
class Atomic:
    index: int

    def render(self) -> str:
        return f"C{self.index}"


@dataclass(frozen=True)
class Top:
    def render(self) -> str:
        return "Top"


@dataclass(frozen=True)
class Bottom:
    def render(self) -> str:
        return "Bottom"


@dataclass(frozen=True)
class And:
    operands: tuple[Expr, ...]

    def render(self) -> str:
        return " & ".join(_render_term(op) for op in self.operands)


@dataclass(frozen=True)
class Some:
    role: int
    filler: Expr

    def render(self) -> str:
        return f"R{self.role} . {_render_term(self.filler)}"


@dataclass(frozen=True)
class SelfRestriction:
    role: int

    def render(self) -> str:
        return f"R{self.role} . Self"


Expr = Union[Atomic, Top, Bottom, And, Some, SelfRestriction]


def _render_term(expr: Expr) -> str:
    return f"({expr.render()})" if isinstance(expr, And) else expr.render()


@dataclass(frozen=True)
class Inclusion:
    lhs: Expr
    rhs: Expr

    def render(self) -> str:
        return f"{self.lhs.render()} < {self.rhs.render()}"


@dataclass(frozen=True)
class Equivalence:
    lhs: Expr
    rhs: Expr

    def render(self) -> str:
        return f"{self.lhs.render()} = {self.rhs.render()}"


@dataclass(frozen=True)
class RoleInclusion:
    chain: tuple[int, ...]
    sup: int

    def render(self) -> str:
        return " * ".join(f"R{r}" for r in self.chain) + f" < R{self.sup}"


GeneralAxiom = Union[Inclusion, Equivalence, RoleInclusion]


class UnsupportedAxiomError(ValueError):
    """The axiom uses a constructor outside the supported EL+ fragment."""

    def __init__(self, axiom_text: str, reason: str) -> None:
        super().__init__(f"unsupported axiom '{axiom_text}': {reason}")
        self.axiom_text = axiom_text


_TOKEN = re.compile(r"\s*(C\d+|R\d+|Top|Bottom|Self|&|\.|\(|\)|<|=|\*)")


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    position = 0
    stripped = text.rstrip()
    while position < len(stripped):
        match = _TOKEN.match(stripped, position)
        if not match:
            raise ValueError(f"unexpected input at column {position + 1}: {stripped!r}")
        tokens.append(match.group(1))
        position = match.end()
    return tokens


def _index(token: str) -> int:
    index = int(token[1:])
    if index < 1:
        raise ValueError(f"name index 0 in {token!r}")
    return index


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self, offset: int = 0) -> str | None:
        at = self.pos + offset
        return self.tokens[at] if at < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        token = self.peek()
        if token is None:
            raise ValueError(f"unexpected end of axiom: {self.text!r}")
        if expected is not None and token != expected:
            raise ValueError(f"expected {expected!r} but found {token!r} in {self.text!r}")
        self.pos += 1
        return token

    def axiom(self) -> GeneralAxiom:
        first = self.peek()
        if first is not None and first.startswith("R") and self.peek(1) in ("*", "<"):
            result: GeneralAxiom = self.role_inclusion()
        else:
            lhs = self.concept()
            operator = self.take()
            if operator not in ("<", "="):
                raise ValueError(f"expected '<' or '=' in {self.text!r}")
            rhs = self.concept()
            result = Inclusion(lhs, rhs) if operator == "<" else Equivalence(lhs, rhs)
        if self.peek() is not None:
            raise ValueError(f"trailing input {self.peek()!r} in {self.text!r}")
        return result

    def role_inclusion(self) -> RoleInclusion:
        chain = [self.role()]
        while self.peek() == "*":
            self.take("*")
            chain.append(self.role())
        self.take("<")
        return RoleInclusion(tuple(chain), self.role())

    def role(self) -> int:
        token = self.take()
        if not token.startswith("R"):
            raise ValueError(f"expected a role name, found {token!r} in {self.text!r}")
        return _index(token)

    def concept(self) -> Expr:
        terms = [self.term()]
        while self.peek() == "&":
            self.take("&")
            terms.append(self.term())
        return terms[0] if len(terms) == 1 else And(tuple(terms))

    def term(self) -> Expr:
        token = self.take()
        if token.startswith("C"):
            return Atomic(_index(token))
        if token == "Top":
            return Top()
        if token == "Bottom":
            return Bottom()
        if token == "(":
            inner = self.concept()
            self.take(")")
            return inner
        if token.startswith("R"):
            role = _index(token)
            self.take(".")
            if self.peek() == "Self":
                self.take("Self")
                return SelfRestriction(role)
            return Some(role, self.term())
        raise ValueError(f"unexpected token {token!r} in {self.text!r}")


def parse_general_axiom(text: str) -> GeneralAxiom:
    """Parse one general EL+ axiom line."""
    return _Parser(text).axiom()


def _flatten(expr: Expr) -> list[Expr]:
    if isinstance(expr, And):
        return [leaf for op in expr.operands for leaf in _flatten(op)]
    return [expr]


def _check_supported(expr: Expr, source: str) -> None:
    if isinstance(expr, Top):
        raise UnsupportedAxiomError(source, "Top is outside the normal forms")
    if isinstance(expr, Bottom):
        raise UnsupportedAxiomError(source, "Bottom is outside the normal forms")
    if isinstance(expr, SelfRestriction):
        raise UnsupportedAxiomError(source, "self restriction is not EL+")
    if isinstance(expr, And):
        for op in expr.operands:
            _check_supported(op, source)
    if isinstance(expr, Some):
        _check_supported(expr.filler, source)


def check_supported(axiom: GeneralAxiom) -> None:
    """Raise :class:`UnsupportedAxiomError` when ``axiom`` cannot be normalized."""
    if isinstance(axiom, RoleInclusion):
        if not axiom.chain:
            raise UnsupportedAxiomError(axiom.render(), "empty role chain")
        return
    _check_supported(axiom.lhs, axiom.render())
    _check_supported(axiom.rhs, axiom.render())


def _max_indices(expr: Expr) -> tuple[int, int]:
    if isinstance(expr, Atomic):
        return expr.index, 0
    if isinstance(expr, And):
        pairs = [_max_indices(op) for op in expr.operands]
        return max(p[0] for p in pairs), max(p[1] for p in pairs)
    if isinstance(expr, Some):
        concepts, roles = _max_indices(expr.filler)
        return concepts, max(roles, expr.role)
    if isinstance(expr, SelfRestriction):
        return 0, expr.role
    return 0, 0


class _Normalizer:
    def __init__(self, next_concept: int, next_role: int) -> None:
        self.next_concept = next_concept
        self.next_role = next_role
        self.output: list[Axiom] = []
        self.seen: set[Axiom] = set()

    def fresh_concept(self) -> int:
        index = self.next_concept
        self.next_concept += 1
        return index

    def fresh_role(self) -> int:
        index = self.next_role
        self.next_role += 1
        return index

    def emit(self, axiom: Axiom) -> None:
        if axiom not in self.seen:
            self.seen.add(axiom)
            self.output.append(axiom)

    def inclusion(self, lhs: Expr, rhs: Expr) -> None:
        if isinstance(rhs, And):
            for op in _flatten(rhs):
                self.inclusion(lhs, op)
            return
        if isinstance(lhs, Atomic):
            if isinstance(rhs, Atomic):
                self.emit(Sub(lhs.index, rhs.index))
            elif isinstance(rhs, Some):
                if isinstance(rhs.filler, Atomic):
                    self.emit(SubEx(lhs.index, rhs.role, rhs.filler.index))
                else:
                    filler = self.fresh_concept()
                    self.emit(SubEx(lhs.index, rhs.role, filler))
                    self.inclusion(Atomic(filler), rhs.filler)
            return
        if isinstance(rhs, Atomic):
            self.complex_lhs(lhs, rhs.index)
        else:
            bridge = self.fresh_concept()
            self.complex_lhs(lhs, bridge)
            self.inclusion(Atomic(bridge), rhs)

    def complex_lhs(self, lhs: Expr, target: int) -> None:
        """Emit ``lhs ⊑ target`` for a non-atomic ``lhs``."""
        if isinstance(lhs, And):
            atoms = [self.lhs_atom(op) for op in _flatten(lhs)]
            if len(atoms) == 1:
                self.emit(Sub(atoms[0], target))
                return
            acc = atoms[0]
            for position, atom in enumerate(atoms[1:], start=2):
                step_target = target if position == len(atoms) else self.fresh_concept()
                self.emit(SubConj(acc, atom, step_target))
                acc = step_target
        elif isinstance(lhs, Some):
            self.emit(ExSub(lhs.role, self.lhs_atom(lhs.filler), target))
        elif isinstance(lhs, Atomic):
            self.emit(Sub(lhs.index, target))

    def lhs_atom(self, expr: Expr) -> int:
        if isinstance(expr, Atomic):
            return expr.index
        name = self.fresh_concept()
        self.complex_lhs(expr, name)
        return name

    def role_inclusion(self, axiom: RoleInclusion) -> None:
        chain = list(axiom.chain)
        if len(chain) == 1:
            self.emit(RoleSub(chain[0], axiom.sup))
            return
        acc = chain[0]
        for position, role in enumerate(chain[1:], start=2):
            target = axiom.sup if position == len(chain) else self.fresh_role()
            self.emit(RoleChain(acc, role, target))
            acc = target


@dataclass(frozen=True)
class Normalized:
    """Normal-form axioms and the signature grown to cover fresh names."""

    axioms: tuple[Axiom, ...]
    signature: Signature


def normalize(
    axioms: Iterable[GeneralAxiom | Axiom], signature: Signature | None = None
) -> Normalized:
    """Rewrite general EL+ axioms into the six normal forms.

    Normal-form input passes through unchanged, so normalization is idempotent. Fresh
    concept (and, for long chains, role) names are numbered upward from the largest
    index in use, so original indices never move.
    """
    items = list(axioms)
    max_concepts = signature.max_concepts if signature else 1
    max_roles = signature.max_roles if signature else 1
    for item in items:
        if isinstance(item, AXIOM_FORMS):
            for name in item.names():  # type: ignore[union-attr]
                if name.kind is Kind.CONCEPT:
                    max_concepts = max(max_concepts, name.index)
                else:
                    max_roles = max(max_roles, name.index)
        elif isinstance(item, RoleInclusion):
            max_roles = max(max_roles, item.sup, *item.chain)
        else:
            for side in (item.lhs, item.rhs):
                concepts, roles = _max_indices(side)
                max_concepts = max(max_concepts, concepts)
                max_roles = max(max_roles, roles)

    normalizer = _Normalizer(max_concepts + 1, max_roles + 1)
    for item in items:
        if isinstance(item, AXIOM_FORMS):
            normalizer.emit(item)  # type: ignore[arg-type]
        elif isinstance(item, RoleInclusion):
            check_supported(item)
            normalizer.role_inclusion(item)
        else:
            check_supported(item)
            normalizer.inclusion(item.lhs, item.rhs)
            if isinstance(item, Equivalence):
                normalizer.inclusion(item.rhs, item.lhs)

    grown = Signature(normalizer.next_concept - 1, normalizer.next_role - 1)
    return Normalized(tuple(normalizer.output), grown)

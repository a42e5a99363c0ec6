"""Predicate expression trees evaluated against partial or full role bindings.

A parsed WHERE clause is split into a conjunction of *atoms*. Each atom is a
boolean expression tree that the runtime evaluates as soon as every role it
references is bound. Atoms referencing an iterated role are implicitly
universally quantified over the members of the bound subset (adjacent-pair
references ``r[i-1]`` shift the quantification range accordingly).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .events import Event, StreamDataError
from .stats import UndefinedCorrelationError, pearson

Binding = dict  # role name -> Event | tuple[Event, ...]


class PredicateError(ValueError):
    """Semantic error inside a WHERE clause."""


@dataclass(frozen=True)
class Literal:
    value: float

    def render(self) -> str:
        v = self.value
        return str(int(v)) if float(v).is_integer() else repr(v)


@dataclass(frozen=True)
class AttrRef:
    """``role.attr`` or, for iterated roles, ``role[i].attr`` / ``role[i-1].attr``."""

    role: str
    attr: str
    index: Optional[str] = None  # None | "i" | "i-1"

    def render(self) -> str:
        if self.index is None:
            return f"{self.role}.{self.attr}"
        return f"{self.role}[{self.index}].{self.attr}"


@dataclass(frozen=True)
class Agg:
    """Aggregate over an iterated role's attribute: AVG/SUM/MIN/MAX/COUNT."""

    fn: str
    ref: AttrRef

    def render(self) -> str:
        return f"{self.fn}({self.ref.render()})"


@dataclass(frozen=True)
class Corr:
    """Pearson correlation between two history-valued attributes."""

    left: AttrRef
    right: AttrRef

    def render(self) -> str:
        return f"corr({self.left.render()}, {self.right.render()})"


@dataclass(frozen=True)
class Arith:
    op: str  # + - * /
    left: "ValueExpr"
    right: "ValueExpr"

    def render(self) -> str:
        return f"({self.left.render()} {self.op} {self.right.render()})"


ValueExpr = Union[Literal, AttrRef, Agg, Corr, Arith]


@dataclass(frozen=True)
class Cmp:
    op: str  # < > <= >= = !=
    left: ValueExpr
    right: ValueExpr

    def render(self) -> str:
        return f"{self.left.render()} {self.op} {self.right.render()}"


@dataclass(frozen=True)
class Not:
    child: "BoolExpr"

    def render(self) -> str:
        return f"not ({self.child.render()})"


@dataclass(frozen=True)
class BoolOp:
    op: str  # and | or
    children: tuple

    def render(self) -> str:
        sep = f" {self.op} "
        return "(" + sep.join(c.render() for c in self.children) + ")"


BoolExpr = Union[Cmp, Not, BoolOp]


def value_refs(expr: ValueExpr):
    if isinstance(expr, AttrRef):
        yield expr
    elif isinstance(expr, Agg):
        yield expr.ref
    elif isinstance(expr, Corr):
        yield expr.left
        yield expr.right
    elif isinstance(expr, Arith):
        yield from value_refs(expr.left)
        yield from value_refs(expr.right)


def bool_refs(expr: BoolExpr):
    if isinstance(expr, Cmp):
        yield from value_refs(expr.left)
        yield from value_refs(expr.right)
    elif isinstance(expr, Not):
        yield from bool_refs(expr.child)
    elif isinstance(expr, BoolOp):
        for c in expr.children:
            yield from bool_refs(c)


def atom_roles(expr: BoolExpr) -> frozenset:
    return frozenset(r.role for r in bool_refs(expr))


def split_conjunction(expr: Optional[BoolExpr]) -> list:
    """Flatten top-level ANDs into the list of atoms the runtime schedules."""
    if expr is None:
        return []
    if isinstance(expr, BoolOp) and expr.op == "and":
        out = []
        for c in expr.children:
            out.extend(split_conjunction(c))
        return out
    return [expr]


def _quantifier_kind(expr: BoolExpr) -> Optional[str]:
    # "pair" if any bare r[i-1] ref appears, "each" if only r[i], else None.
    kind = None
    for ref in bool_refs(expr):
        if ref.index == "i-1":
            return "pair"
        if ref.index == "i":
            kind = "each"
    return kind


class _AtomEvaluator:
    def __init__(self, binding: Binding, i: Optional[int] = None):
        self.binding = binding
        self.i = i

    def _event_for(self, ref: AttrRef) -> Event:
        bound = self.binding[ref.role]
        if isinstance(bound, tuple):
            if isinstance(self.i, int):
                idx = self.i if ref.index != "i-1" else self.i - 1
                return bound[idx]
            raise PredicateError(
                f"{ref.render()}: iterated reference outside quantified atom"
            )
        return bound

    def value(self, expr: ValueExpr):
        if isinstance(expr, Literal):
            return expr.value
        if isinstance(expr, AttrRef):
            return self._event_for(expr).attr(expr.attr)
        if isinstance(expr, Agg):
            bound = self.binding[expr.ref.role]
            if not isinstance(bound, tuple):
                raise PredicateError(f"{expr.render()}: role is not iterated")
            if expr.fn == "count":
                return float(len(bound))
            vals = [_as_number(e.attr(expr.ref.attr)) for e in bound]
            if expr.fn == "avg":
                return sum(vals) / len(vals)
            if expr.fn == "sum":
                return sum(vals)
            if expr.fn == "min":
                return min(vals)
            if expr.fn == "max":
                return max(vals)
            raise PredicateError(f"unknown aggregate {expr.fn}")
        if isinstance(expr, Corr):
            lx = self._event_for(expr.left).attr(expr.left.attr)
            rx = self._event_for(expr.right).attr(expr.right.attr)
            if not isinstance(lx, (tuple, list)) or not isinstance(rx, (tuple, list)):
                raise StreamDataError("corr() arguments must be history lists")
            try:
                return pearson(lx, rx)
            except UndefinedCorrelationError:
                return None  # undefined correlation: comparisons treat as false
        if isinstance(expr, Arith):
            a = _as_number(self.value(expr.left))
            b = _as_number(self.value(expr.right))
            if a is None or b is None:
                return None
            if expr.op == "+":
                return a + b
            if expr.op == "-":
                return a - b
            if expr.op == "*":
                return a * b
            if expr.op == "/":
                if b == 0:
                    raise StreamDataError("division by zero in predicate")
                return a / b
        raise PredicateError(f"unknown value node {expr!r}")

    def boolean(self, expr: BoolExpr) -> bool:
        if isinstance(expr, Cmp):
            a = self.value(expr.left)
            b = self.value(expr.right)
            if a is None or b is None:
                return False
            return _compare(expr.op, a, b)
        if isinstance(expr, Not):
            return not self.boolean(expr.child)
        if isinstance(expr, BoolOp):
            if expr.op == "and":
                return all(self.boolean(c) for c in expr.children)
            return any(self.boolean(c) for c in expr.children)
        raise PredicateError(f"unknown boolean node {expr!r}")


def _as_number(v):
    if v is None or isinstance(v, float):
        return v
    if isinstance(v, int):
        return float(v)
    raise StreamDataError(f"expected a number, got {v!r}")


def _compare(op: str, a, b) -> bool:
    if isinstance(a, str) != isinstance(b, str):
        raise StreamDataError(f"type mismatch comparing {a!r} {op} {b!r}")
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise PredicateError(f"unknown comparison {op}")


def eval_atom(expr: BoolExpr, binding: Binding, counter=None) -> bool:
    """Evaluate one atom against a binding (role -> Event or member tuple).

    Atoms with bare iterated references hold iff they hold for every member
    (or every adjacent pair); aggregates see the whole subset.
    """
    if counter is not None:
        counter.predicate_evaluations += 1
    kind = _quantifier_kind(expr)
    if kind is None:
        return _AtomEvaluator(binding).boolean(expr)
    # The quantified role is the iterated one; bindings hold it as a tuple.
    subset_len = None
    for ref in bool_refs(expr):
        if ref.index is not None:
            bound = binding[ref.role]
            if not isinstance(bound, tuple):
                raise PredicateError(f"{ref.render()}: role is not iterated")
            subset_len = len(bound)
            break
    assert subset_len is not None
    start = 1 if kind == "pair" else 0
    return all(
        _AtomEvaluator(binding, i).boolean(expr) for i in range(start, subset_len)
    )


def eval_atoms(atoms: Sequence[BoolExpr], binding: Binding, counter=None) -> bool:
    return all(eval_atom(a, binding, counter) for a in atoms)

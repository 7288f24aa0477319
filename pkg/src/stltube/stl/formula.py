"""STL abstract syntax over hyperrectangle predicates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

TRUE = "true"
PREDICATE = "predicate"
NOT = "not"
AND = "and"
OR = "or"
EVENTUALLY = "eventually"
ALWAYS = "always"
UNTIL = "until"

TEMPORAL_KINDS = (EVENTUALLY, ALWAYS, UNTIL)
_ARITY = {TRUE: 0, PREDICATE: 0, NOT: 1, AND: 2, OR: 2, EVENTUALLY: 1, ALWAYS: 1, UNTIL: 2}


class Predicate:
    """Base hook for predicate functions ``h: R^n -> R``.

    Subclasses implement :meth:`h` on arrays whose last axis is the state.
    Only :class:`BoxPredicate` is supported by the Lipschitz bound.
    """

    label: str

    def h(self, x):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class BoxPredicate(Predicate):
    """Open hyperrectangle ``|x - center|_inf < half_width`` (per axis).

    ``h(x) = min_i (half_width_i - |x_i - center_i|)``, positive exactly in the
    interior.
    """

    center: Tuple[float, ...]
    half_width: Tuple[float, ...]
    label: str = "p"

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(self.center))
        hw = np.atleast_1d(np.asarray(self.half_width, dtype=float))
        if hw.size == 1:
            hw = np.full(len(center), float(hw[0]))
        if hw.size != len(center):
            raise ValueError(f"predicate {self.label!r}: half_width has {hw.size} entries, center has {len(center)}")
        if not np.all(hw > 0) or not np.all(np.isfinite(hw)):
            raise ValueError(f"predicate {self.label!r}: half_width must be finite and strictly positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_width", tuple(float(v) for v in hw))

    @classmethod
    def from_bounds(cls, lower, upper, label="p"):
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        return cls(tuple((lo + hi) / 2), tuple((hi - lo) / 2), label)

    @property
    def dim(self):
        return len(self.center)

    @property
    def lower(self):
        return np.asarray(self.center) - np.asarray(self.half_width)

    @property
    def upper(self):
        return np.asarray(self.center) + np.asarray(self.half_width)

    def h(self, x):
        from .kernels import box_h

        return box_h(x, self.center, self.half_width)

    def __eq__(self, other):
        return (
            isinstance(other, BoxPredicate)
            and self.label == other.label
            and self.center == other.center
            and self.half_width == other.half_width
        )

    def __hash__(self):
        return hash((self.label, self.center, self.half_width))


@dataclass(frozen=True)
class Formula:
    kind: str
    children: Tuple["Formula", ...] = ()
    interval: Tuple[float, float] | None = None
    predicate: Predicate | None = field(default=None, compare=True)

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ValueError(f"unknown formula kind {self.kind!r}")
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) != _ARITY[self.kind]:
            raise ValueError(f"{self.kind} expects {_ARITY[self.kind]} children, got {len(self.children)}")
        if self.kind in TEMPORAL_KINDS:
            if self.interval is None:
                raise ValueError(f"{self.kind} requires an interval")
            a, b = (float(v) for v in self.interval)
            if not (np.isfinite(a) and np.isfinite(b)):
                raise ValueError(f"interval endpoints must be finite, got [{a}, {b}]")
            if a < 0 or a > b:
                raise ValueError(f"malformed interval [{a}, {b}]: need 0 <= a <= b")
            object.__setattr__(self, "interval", (a, b))
        elif self.interval is not None:
            raise ValueError(f"{self.kind} takes no interval")
        if self.kind == PREDICATE and self.predicate is None:
            raise ValueError("predicate node without a predicate")

    def __str__(self):
        return to_text(self)

    def walk(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def predicates(self):
        seen = {}
        for node in self.walk():
            if node.kind == PREDICATE:
                seen.setdefault(node.predicate.label, node.predicate)
        return list(seen.values())

    def depth(self):
        if not self.children:
            return 0
        return 1 + max(c.depth() for c in self.children)


def true():
    return Formula(TRUE)


def pred(p):
    return Formula(PREDICATE, predicate=p)


def neg(phi):
    return Formula(NOT, (phi,))


def conj(*phis):
    out = phis[0]
    for p in phis[1:]:
        out = Formula(AND, (out, p))
    return out


def disj(*phis):
    out = phis[0]
    for p in phis[1:]:
        out = Formula(OR, (out, p))
    return out


def implies(lhs, rhs):
    return Formula(OR, (neg(lhs), rhs))


def eventually(phi, a, b):
    return Formula(EVENTUALLY, (phi,), (a, b))


def always(phi, a, b):
    return Formula(ALWAYS, (phi,), (a, b))


def until(phi1, phi2, a, b):
    return Formula(UNTIL, (phi1, phi2), (a, b))


def formula_horizon(phi):
    """Largest time offset, relative to evaluation time, that ``phi`` reads."""
    if phi.kind in TEMPORAL_KINDS:
        return phi.interval[1] + max(formula_horizon(c) for c in phi.children)
    if not phi.children:
        return 0.0
    return max(formula_horizon(c) for c in phi.children)


def robustness_lipschitz_bound(phi):
    """Per-coordinate Lipschitz bound of the robustness of ``phi``.

    Each box predicate ``h`` is 1-Lipschitz in every coordinate and min, max
    and negation preserve that, so the bound is 1 for this predicate class.
    """
    for p in phi.predicates():
        if not isinstance(p, BoxPredicate):
            raise TypeError(f"no Lipschitz bound for predicate class {type(p).__name__}")
    return 1.0


def interval_endpoints(phi, offset=0.0):
    """Absolute times at which interval boundaries of ``phi`` fall when evaluated at ``offset``.

    Nested temporal operators contribute the endpoints of every enclosing
    window, e.g. ``G[0,13] F[3,4] p`` yields {0, 13, 3, 4, 16, 17}.
    """
    out = set()
    if phi.kind in TEMPORAL_KINDS:
        a, b = phi.interval
        out.update((offset + a, offset + b))
        for c in phi.children:
            out |= interval_endpoints(c, offset + a)
            out |= interval_endpoints(c, offset + b)
    else:
        for c in phi.children:
            out |= interval_endpoints(c, offset)
    return out


def _num(v):
    return repr(int(v)) if float(v).is_integer() else repr(float(v))


_PREC = {OR: 1, AND: 2, UNTIL: 3}


def to_text(phi, parent_prec=0):
    """Render ``phi`` in the concrete grammar accepted by :func:`parse_formula`."""
    k = phi.kind
    if k == TRUE:
        return "true"
    if k == PREDICATE:
        return phi.predicate.label
    if k == NOT:
        return "!" + _unary_operand(phi.children[0])
    if k in (EVENTUALLY, ALWAYS):
        op = "F" if k == EVENTUALLY else "G"
        a, b = phi.interval
        return f"{op}[{_num(a)},{_num(b)}] " + _unary_operand(phi.children[0])
    prec = _PREC[k]
    if k == UNTIL:
        a, b = phi.interval
        # non-associative: parenthesize both operands unless atomic
        lhs = to_text(phi.children[0], prec + 1)
        rhs = to_text(phi.children[1], prec + 1)
        text = f"{lhs} U[{_num(a)},{_num(b)}] {rhs}"
    else:
        sym = " & " if k == AND else " | "
        lhs = to_text(phi.children[0], prec)
        rhs = to_text(phi.children[1], prec + 1)
        text = lhs + sym + rhs
    return f"({text})" if prec < parent_prec else text


def _unary_operand(child):
    if child.kind in (TRUE, PREDICATE, NOT, EVENTUALLY, ALWAYS):
        return to_text(child)
    return f"({to_text(child)})"

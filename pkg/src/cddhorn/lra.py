"""Exact Fourier-Motzkin elimination over conjunctions of linear constraints.

A constraint is ``sum(coeff * var) op rhs`` with ``op`` in ``<=``, ``<``, ``=``.
Elimination is exact over the rationals.  For integer-sorted variables an
optional tightening step rounds constraints whose variables are all integers
(the real shadow plus normalisation) and a small branch-and-bound search looks
for integral models.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor, gcd, lcm
from typing import Iterable, Mapping

from .errors import ResourceExhausted
from .formula import INT, Atom, Var

MAX_CONSTRAINTS = 4000


@dataclass(frozen=True)
class Constraint:
    terms: tuple  # ((Var, Fraction), ...) sorted by variable, no zero coefficients
    op: str  # "<=", "<", "="
    rhs: Fraction

    @property
    def vars(self):
        return [v for v, _ in self.terms]

    def coeff(self, x: Var) -> Fraction:
        for v, c in self.terms:
            if v == x:
                return c
        return Fraction(0)

    def holds(self, model: Mapping[Var, Fraction]) -> bool:
        total = sum((c * model.get(v, Fraction(0)) for v, c in self.terms), Fraction(0))
        if self.op == "<=":
            return total <= self.rhs
        if self.op == "<":
            return total < self.rhs
        return total == self.rhs


def make(coeffs: Mapping[Var, Fraction] | Iterable, op: str, rhs) -> Constraint | bool:
    """Normalise a constraint; constant constraints evaluate to a bool."""
    items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
    acc: dict[Var, Fraction] = {}
    for v, c in items:
        acc[v] = acc.get(v, Fraction(0)) + c
    terms = sorted(((v, c) for v, c in acc.items() if c), key=lambda t: t[0])
    rhs = Fraction(rhs)
    if not terms:
        if op == "<=":
            return 0 <= rhs
        if op == "<":
            return 0 < rhs
        return rhs == 0
    scale = lcm(*(c.denominator for _, c in terms), rhs.denominator)
    ints = [int(c * scale) for _, c in terms]
    k = int(rhs * scale)
    g = gcd(*ints, k) if k else gcd(*ints)
    if op == "=" and ints[0] < 0:
        g = -g
    return Constraint(tuple((v, Fraction(c // g)) for (v, _), c in zip(terms, ints)), op, Fraction(k // g))


def from_atom(a: Atom) -> list[Constraint | bool]:
    """Translate a canonical atom into one or two ``<=``/``<``/``=`` constraints."""
    terms = a.terms
    if a.op in ("<=", "<", "="):
        return [make(terms, a.op, a.const)]
    flipped = [(v, -c) for v, c in terms]
    return [make(flipped, "<=" if a.op == ">=" else "<", -a.const)]


def tighten(c: Constraint) -> Constraint | bool:
    """Integer rounding for a constraint over integer variables only."""
    if any(v.sort != INT for v, _ in c.terms):
        return c
    if any(coef.denominator != 1 for _, coef in c.terms) or c.rhs.denominator != 1:
        return c
    g = gcd(*(int(coef) for _, coef in c.terms))
    if c.op == "=":
        if c.rhs % g:
            return False
        return c
    rhs = c.rhs
    if c.op == "<":
        rhs = rhs - 1
    out = make(c.terms, "<=", Fraction(floor(rhs / g)) * g)
    return out


class _Store:
    """Deduplicating constraint set keeping the tightest bound per direction."""

    def __init__(self, integer: bool):
        self.eqs: dict[tuple, Constraint] = {}
        self.ineqs: dict[tuple, Constraint] = {}
        self.integer = integer
        self.infeasible = False

    def add(self, c: Constraint | bool) -> None:
        if c is True:
            return
        if c is False:
            self.infeasible = True
            return
        if self.integer:
            c = tighten(c)
            if c is True:
                return
            if c is False:
                self.infeasible = True
                return
        if c.op == "=":
            old = self.eqs.get(c.terms)
            if old is not None and old.rhs != c.rhs:
                self.infeasible = True
            self.eqs[c.terms] = c
            return
        old = self.ineqs.get(c.terms)
        if old is None or c.rhs < old.rhs or (c.rhs == old.rhs and c.op == "<"):
            self.ineqs[c.terms] = c

    def items(self) -> list[Constraint]:
        return list(self.eqs.values()) + list(self.ineqs.values())


def _substitute(c: Constraint, x: Var, eq: Constraint) -> Constraint | bool:
    """Eliminate ``x`` from ``c`` using the equality ``eq``."""
    a = c.coeff(x)
    if not a:
        return c
    b = eq.coeff(x)
    k = a / b
    coeffs: dict[Var, Fraction] = dict(c.terms)
    for v, cv in eq.terms:
        coeffs[v] = coeffs.get(v, Fraction(0)) - k * cv
    coeffs.pop(x, None)
    return make(coeffs, c.op, c.rhs - k * eq.rhs)


def _combine(up: Constraint, lo: Constraint, x: Var) -> Constraint | bool:
    a = up.coeff(x)
    b = -lo.coeff(x)
    coeffs: dict[Var, Fraction] = {}
    for v, c in up.terms:
        coeffs[v] = coeffs.get(v, Fraction(0)) + c * b
    for v, c in lo.terms:
        coeffs[v] = coeffs.get(v, Fraction(0)) + c * a
    coeffs.pop(x, None)
    op = "<" if "<" in (up.op, lo.op) else "<="
    return make(coeffs, op, up.rhs * b + lo.rhs * a)


@dataclass
class _Step:
    var: Var
    kind: str  # "eq" | "bounds" | "free"
    eq: Constraint | None = None
    bounds: tuple = ()


class Eliminator:
    """Runs FM elimination and remembers the steps for model reconstruction."""

    def __init__(self, constraints: Iterable[Constraint | bool], integer: bool = False):
        self.integer = integer
        store = _Store(integer)
        for c in constraints:
            store.add(c)
        self.infeasible = store.infeasible
        self.current = store.items()
        self.steps: list[_Step] = []

    def _reset(self, cs: Iterable[Constraint | bool]) -> None:
        store = _Store(self.integer)
        for c in cs:
            store.add(c)
            if store.infeasible:
                break
        if store.infeasible:
            self.infeasible = True
            self.current = []
        else:
            self.current = store.items()
            if len(self.current) > MAX_CONSTRAINTS:
                raise ResourceExhausted("Fourier-Motzkin blow-up")

    def eliminate(self, x: Var) -> None:
        if self.infeasible:
            return
        eqs = [c for c in self.current if c.op == "=" and c.coeff(x)]
        if eqs:
            pivot = min(eqs, key=lambda c: (len(c.terms), c.terms))
            self.steps.append(_Step(x, "eq", eq=pivot))
            rest = [_substitute(c, x, pivot) for c in self.current if c is not pivot]
            self._reset(rest)
            return
        ups, los, rest = [], [], []
        for c in self.current:
            a = c.coeff(x)
            if a > 0:
                ups.append(c)
            elif a < 0:
                los.append(c)
            else:
                rest.append(c)
        self.steps.append(_Step(x, "bounds", bounds=tuple(ups + los)))
        if len(ups) * len(los) > MAX_CONSTRAINTS:
            raise ResourceExhausted("Fourier-Motzkin blow-up")
        rest.extend(_combine(u, lo, x) for u in ups for lo in los)
        self._reset(rest)

    def pick_var(self, candidates: set[Var]) -> Var | None:
        """Cheapest variable to eliminate next among ``candidates``."""
        best, best_cost = None, None
        present: dict[Var, list[int]] = {}
        eq_vars = set()
        for c in self.current:
            for v, a in c.terms:
                if v in candidates:
                    slot = present.setdefault(v, [0, 0])
                    if c.op == "=":
                        eq_vars.add(v)
                    elif a > 0:
                        slot[0] += 1
                    else:
                        slot[1] += 1
        for v in sorted(present):
            if v in eq_vars:
                cost = -1
            else:
                p, n = present[v]
                cost = p * n - p - n
            if best_cost is None or cost < best_cost:
                best, best_cost = v, cost
        return best

    def run(self, eliminate: Iterable[Var]) -> None:
        todo = set(eliminate)
        while todo and not self.infeasible:
            x = self.pick_var(todo)
            if x is None:
                break
            todo.discard(x)
            self.eliminate(x)
        self.unconstrained = todo

    def model(self) -> dict[Var, Fraction]:
        """Back-substitute to a rational model preferring integral values."""
        values: dict[Var, Fraction] = {v: Fraction(0) for v in getattr(self, "unconstrained", ())}
        for step in reversed(self.steps):
            x = step.var
            if step.kind == "eq":
                c = step.eq
                a = c.coeff(x)
                rest = sum((cv * values.get(v, Fraction(0)) for v, cv in c.terms if v != x), Fraction(0))
                values[x] = (c.rhs - rest) / a
                continue
            lo = hi = None
            lo_strict = hi_strict = False
            for c in step.bounds:
                a = c.coeff(x)
                rest = sum((cv * values.get(v, Fraction(0)) for v, cv in c.terms if v != x), Fraction(0))
                bound = (c.rhs - rest) / a
                strict = c.op == "<"
                if a > 0:
                    if hi is None or bound < hi or (bound == hi and strict):
                        hi, hi_strict = bound, strict
                else:
                    if lo is None or bound > lo or (bound == lo and strict):
                        lo, lo_strict = bound, strict
            values[x] = choose_value(lo, lo_strict, hi, hi_strict)
        return values


def choose_value(lo, lo_strict, hi, hi_strict) -> Fraction:
    def ok(v):
        if lo is not None and (v < lo or (lo_strict and v == lo)):
            return False
        if hi is not None and (v > hi or (hi_strict and v == hi)):
            return False
        return True

    if ok(Fraction(0)):
        return Fraction(0)
    if lo is not None:
        cand = Fraction(floor(lo) + 1) if (lo_strict and lo.denominator == 1) else Fraction(ceil(lo))
        if ok(cand):
            return cand
    if hi is not None:
        cand = Fraction(ceil(hi) - 1) if (hi_strict and hi.denominator == 1) else Fraction(floor(hi))
        if ok(cand):
            return cand
    if lo is not None and hi is not None:
        return lo if lo == hi else (lo + hi) / 2
    return lo if lo is not None else hi


def project(constraints: Iterable[Constraint | bool], eliminate: Iterable[Var]) -> list[Constraint] | None:
    """Rational projection; ``None`` when the input is infeasible."""
    e = Eliminator(constraints)
    e.run(eliminate)
    if e.infeasible:
        return None
    return e.current


def feasible(constraints: Iterable[Constraint | bool], integer: bool = False) -> bool:
    cs = list(constraints)
    e = Eliminator(cs, integer=integer)
    e.run({v for c in cs if not isinstance(c, bool) for v in c.vars})
    return not e.infeasible


def solve_rational(constraints: Iterable[Constraint | bool]) -> dict[Var, Fraction] | None:
    cs = list(constraints)
    e = Eliminator(cs)
    e.run({v for c in cs if not isinstance(c, bool) for v in c.vars})
    if e.infeasible:
        return None
    return e.model()


def solve(constraints: Iterable[Constraint | bool], budget: int = 2000) -> dict[Var, Fraction] | None:
    """Model respecting variable sorts (integral values for Int variables).

    Uses rounding plus branch and bound; raises ResourceExhausted when the
    branch budget runs out without a verdict.
    """
    cs = [c for c in constraints]
    if any(c is False for c in cs):
        return None
    cs = [c for c in cs if c is not True]
    int_vars = sorted({v for c in cs for v in c.vars if v.sort == INT})
    if not int_vars:
        return solve_rational(cs)
    counter = [0]

    def go(extra: list[Constraint]) -> dict | None:
        counter[0] += 1
        if counter[0] > budget:
            raise ResourceExhausted("integer branch-and-bound budget exceeded")
        e = Eliminator(cs + extra, integer=True)
        e.run({v for c in cs + extra for v in c.vars})
        if e.infeasible:
            return None
        m = e.model()
        for v in int_vars:
            val = m.get(v, Fraction(0))
            if val.denominator != 1:
                down = make([(v, Fraction(1))], "<=", floor(val))
                up = make([(v, Fraction(-1))], "<=", -ceil(val))
                got = go(extra + [down])
                return got if got is not None else go(extra + [up])
        return m

    return go([])

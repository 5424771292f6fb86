"""Immutable quantifier-free formulas over linear arithmetic with boolean atoms.

Arithmetic atoms are kept in a canonical form ``sum(c_i * x_i) <op> c`` with
integer coefficients whose gcd is one and whose first coefficient (by variable
name) is positive.  Conjunctions and disjunctions are flat, sorted and
deduplicated, so structurally equal formulas print identically.
"""

from __future__ import annotations

import re
from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Mapping, Union

from .errors import NonLinear, ResourceExhausted, SortError

INT = "Int"
REAL = "Real"
BOOL = "Bool"
SORTS = (INT, REAL, BOOL)

Number = Union[int, Fraction]


class Var:
    __slots__ = ("name", "sort", "_hash")

    def __init__(self, name: str, sort: str = INT):
        if sort not in SORTS:
            raise SortError(f"unsupported sort {sort!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "sort", sort)
        object.__setattr__(self, "_hash", hash((name, sort)))

    def __setattr__(self, key, value):
        raise AttributeError("Var is immutable")

    def __eq__(self, other):
        return isinstance(other, Var) and self.name == other.name and self.sort == other.sort

    def __hash__(self):
        return self._hash

    def __lt__(self, other: "Var"):
        return (self.name, self.sort) < (other.name, other.sort)

    def __repr__(self):
        return f"Var({self.name!r}, {self.sort!r})"

    def __str__(self):
        return self.name

    def __reduce__(self):
        return (Var, (self.name, self.sort))

    @property
    def is_bool(self) -> bool:
        return self.sort == BOOL


# ---------------------------------------------------------------------------
# Linear expressions
# ---------------------------------------------------------------------------


class Lin:
    """A linear expression ``sum(coeff * var) + const`` with exact coefficients."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[Var, Number] | Iterable = (), const: Number = 0):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Var, Fraction] = {}
        for v, c in items:
            if v.is_bool:
                raise SortError(f"boolean variable {v.name} used in arithmetic")
            acc[v] = acc.get(v, Fraction(0)) + Fraction(c)
        object.__setattr__(
            self, "terms", tuple(sorted(((v, c) for v, c in acc.items() if c), key=lambda t: t[0]))
        )
        object.__setattr__(self, "const", Fraction(const))

    def __setattr__(self, key, value):
        raise AttributeError("Lin is immutable")

    @classmethod
    def var(cls, v: Var) -> "Lin":
        return cls(((v, 1),))

    @classmethod
    def constant(cls, c: Number) -> "Lin":
        return cls((), c)

    @staticmethod
    def lift(x) -> "Lin":
        if isinstance(x, Lin):
            return x
        if isinstance(x, Var):
            return Lin.var(x)
        if isinstance(x, (int, Fraction)):
            return Lin.constant(x)
        raise TypeError(f"cannot use {x!r} as a linear term")

    @property
    def vars(self) -> frozenset[Var]:
        return frozenset(v for v, _ in self.terms)

    @property
    def is_const(self) -> bool:
        return not self.terms

    def as_var(self) -> Var | None:
        if len(self.terms) == 1 and self.terms[0][1] == 1 and self.const == 0:
            return self.terms[0][0]
        return None

    def coeff(self, v: Var) -> Fraction:
        for w, c in self.terms:
            if w == v:
                return c
        return Fraction(0)

    def __add__(self, other):
        other = Lin.lift(other)
        return Lin(list(self.terms) + list(other.terms), self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Lin([(v, -c) for v, c in self.terms], -self.const)

    def __sub__(self, other):
        return self + (-Lin.lift(other))

    def __rsub__(self, other):
        return Lin.lift(other) - self

    def __mul__(self, other):
        if isinstance(other, Lin):
            if other.is_const:
                other = other.const
            elif self.is_const:
                return other * self.const
            else:
                raise NonLinear("product of two non-constant terms")
        k = Fraction(other)
        return Lin([(v, c * k) for v, c in self.terms], self.const * k)

    __rmul__ = __mul__

    def rename(self, m: Mapping[Var, Var]) -> "Lin":
        return Lin([(m.get(v, v), c) for v, c in self.terms], self.const)

    def __eq__(self, other):
        return isinstance(other, Lin) and self.terms == other.terms and self.const == other.const

    def __hash__(self):
        return hash((self.terms, self.const))

    def __repr__(self):
        return f"Lin({dict(self.terms)!r}, {self.const})"


# ---------------------------------------------------------------------------
# Formula nodes
# ---------------------------------------------------------------------------

_SIMPLE_SYMBOL = re.compile(r"^[A-Za-z~!@$%^&*_+=<>.?/\-][A-Za-z0-9~!@$%^&*_+=<>.?/\-]*$")
_RESERVED = {
    "true", "false", "and", "or", "not", "let", "forall", "exists", "ite", "par",
    "_", "!", "as", "=>", "=", "<", "<=", ">", ">=", "+", "-", "*", "/", "distinct",
}


def quote_symbol(name: str) -> str:
    if _SIMPLE_SYMBOL.match(name) and name not in _RESERVED:
        return name
    return "|" + name.replace("|", "_").replace("\\", "_") + "|"


def number_smt(x: Fraction) -> str:
    x = Fraction(x)
    if x < 0:
        return f"(- {number_smt(-x)})"
    if x.denominator == 1:
        return str(x.numerator)
    return f"(/ {x.numerator} {x.denominator})"


class Formula:
    __slots__ = ("_key", "_vocab", "_size")

    def _render(self, names) -> str:
        raise NotImplementedError

    @property
    def key(self) -> str:
        try:
            return self._key
        except AttributeError:
            k = self._render(None)
            object.__setattr__(self, "_key", k)
            return k

    def __setattr__(self, key, value):
        raise AttributeError("formulas are immutable")

    def __eq__(self, other):
        return isinstance(other, Formula) and type(self) is type(other) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __str__(self):
        return self.key

    def __repr__(self):
        return f"<{type(self).__name__} {self.key}>"

    def __and__(self, other):
        return conj(self, other)

    def __or__(self, other):
        return disj(self, other)

    def __invert__(self):
        return neg(self)

    def children(self) -> tuple["Formula", ...]:
        return ()


class Const(Formula):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        object.__setattr__(self, "value", bool(value))

    def _render(self, names):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


class BoolVar(Formula):
    __slots__ = ("var",)

    def __init__(self, var: Var):
        if not var.is_bool:
            raise SortError(f"{var.name} is not boolean")
        object.__setattr__(self, "var", var)

    def _render(self, names):
        name = names.get(self.var, self.var.name) if names else self.var.name
        return quote_symbol(name)


_FLIP = {"<": ">", "<=": ">=", "=": "=", ">=": "<=", ">": "<"}
_NEGATE = {"<": ">=", "<=": ">", ">=": "<", ">": "<="}
OPS = ("<", "<=", "=", ">=", ">")


class Atom(Formula):
    """Canonical linear atom ``sum(coeff * var) op const``."""

    __slots__ = ("terms", "op", "const")

    def __init__(self, terms: tuple, op: str, const: Fraction):
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "const", const)

    @property
    def lin(self) -> Lin:
        return Lin(self.terms)

    def _render(self, names):
        def term(v, c):
            name = quote_symbol(names.get(v, v.name) if names else v.name)
            return name if c == 1 else f"(* {number_smt(c)} {name})"

        def total(parts):
            if not parts:
                return "0"
            if len(parts) == 1:
                return parts[0]
            return "(+ " + " ".join(parts) + ")"

        pos = [term(v, c) for v, c in self.terms if c > 0]
        negs = [term(v, -c) for v, c in self.terms if c < 0]
        op, const = self.op, self.const
        if not pos:
            pos, negs, op, const = negs, [], _FLIP[op], -const
        rhs = list(negs)
        if const != 0 or not rhs:
            rhs.append(number_smt(const))
        return f"({op} {total(pos)} {total(rhs)})"


class Not(Formula):
    __slots__ = ("arg",)

    def __init__(self, arg: Formula):
        object.__setattr__(self, "arg", arg)

    def _render(self, names):
        return f"(not {self.arg._render(names)})"

    def children(self):
        return (self.arg,)


class And(Formula):
    __slots__ = ("args",)

    def __init__(self, args: tuple):
        object.__setattr__(self, "args", args)

    def _render(self, names):
        return "(and " + " ".join(a._render(names) for a in self.args) + ")"

    def children(self):
        return self.args


class Or(Formula):
    __slots__ = ("args",)

    def __init__(self, args: tuple):
        object.__setattr__(self, "args", args)

    def _render(self, names):
        return "(or " + " ".join(a._render(names) for a in self.args) + ")"

    def children(self):
        return self.args


# ---------------------------------------------------------------------------
# Smart constructors
# ---------------------------------------------------------------------------


def boolvar(v: Var | str) -> BoolVar:
    return BoolVar(v if isinstance(v, Var) else Var(v, BOOL))


def atom(lhs, op: str, rhs=0) -> Formula:
    """Build the canonical atom for ``lhs op rhs``; constant atoms fold to true/false."""
    if op not in OPS:
        raise ValueError(f"unknown comparison {op!r}")
    diff = Lin.lift(lhs) - Lin.lift(rhs)
    const = -diff.const
    if not diff.terms:
        return TRUE if _compare(Fraction(0), op, const) else FALSE
    coeffs = [c for _, c in diff.terms]
    scale = lcm(*(c.denominator for c in coeffs), const.denominator)
    ints = [int(c * scale) for c in coeffs]
    k = int(const * scale)
    g = gcd(*ints, k) if k else gcd(*ints)
    ints = [c // g for c in ints]
    k //= g
    if ints[0] < 0:
        ints = [-c for c in ints]
        k = -k
        op = _FLIP[op]
    terms = tuple((v, Fraction(c)) for (v, _), c in zip(diff.terms, ints))
    return Atom(terms, op, Fraction(k))


def _compare(a: Fraction, op: str, b: Fraction) -> bool:
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == "=":
        return a == b
    if op == ">=":
        return a >= b
    return a > b


def eq(a, b) -> Formula:
    return atom(a, "=", b)


def le(a, b) -> Formula:
    return atom(a, "<=", b)


def lt(a, b) -> Formula:
    return atom(a, "<", b)


def ge(a, b) -> Formula:
    return atom(a, ">=", b)


def gt(a, b) -> Formula:
    return atom(a, ">", b)


def neg(f: Formula) -> Formula:
    if isinstance(f, Const):
        return FALSE if f.value else TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def _nary(cls, absorbing: Const, unit: Const, args) -> Formula:
    out: dict[str, Formula] = {}
    stack = list(args)
    stack.reverse()
    while stack:
        a = stack.pop()
        if isinstance(a, cls):
            stack.extend(reversed(a.args))
            continue
        if isinstance(a, Const):
            if a.value == absorbing.value:
                return absorbing
            continue
        out.setdefault(a.key, a)
    for k, a in out.items():
        if isinstance(a, Not) and a.arg.key in out:
            return absorbing
    if not out:
        return unit
    if len(out) == 1:
        return next(iter(out.values()))
    return cls(tuple(out[k] for k in sorted(out)))


def conj(*args: Formula) -> Formula:
    return _nary(And, FALSE, TRUE, args)


def disj(*args: Formula) -> Formula:
    return _nary(Or, TRUE, FALSE, args)


def implies(a: Formula, b: Formula) -> Formula:
    return disj(neg(a), b)


def iff(a: Formula, b: Formula) -> Formula:
    return disj(conj(a, b), conj(neg(a), neg(b)))


# ---------------------------------------------------------------------------
# Queries and transformations
# ---------------------------------------------------------------------------


def vocab(f: Formula) -> frozenset[Var]:
    """Free variables of ``f``."""
    try:
        return f._vocab
    except AttributeError:
        pass
    if isinstance(f, BoolVar):
        out = frozenset((f.var,))
    elif isinstance(f, Atom):
        out = frozenset(v for v, _ in f.terms)
    elif isinstance(f, Const):
        out = frozenset()
    else:
        out = frozenset().union(*(vocab(c) for c in f.children()))
    object.__setattr__(f, "_vocab", out)
    return out


def size(f: Formula) -> int:
    """Number of nodes, counting each atom as one node per variable plus one."""
    try:
        return f._size
    except AttributeError:
        pass
    if isinstance(f, Atom):
        n = 1 + len(f.terms)
    else:
        n = 1 + sum(size(c) for c in f.children())
    object.__setattr__(f, "_size", n)
    return n


def substitute(f: Formula, m: Mapping[Var, Var]) -> Formula:
    """Rename variables of ``f`` according to ``m`` (sort-preserving)."""
    for a, b in m.items():
        if a.sort != b.sort:
            raise SortError(f"cannot substitute {a.name}:{a.sort} by {b.name}:{b.sort}")
    if not m:
        return f
    cache: dict[int, Formula] = {}

    def go(g: Formula) -> Formula:
        hit = cache.get(id(g))
        if hit is not None:
            return hit
        if not (vocab(g) & m.keys()):
            out = g
        elif isinstance(g, BoolVar):
            out = BoolVar(m[g.var])
        elif isinstance(g, Atom):
            out = atom(Lin(g.terms).rename(m), g.op, g.const)
        elif isinstance(g, Not):
            out = neg(go(g.arg))
        elif isinstance(g, And):
            out = conj(*(go(c) for c in g.args))
        else:
            out = disj(*(go(c) for c in g.args))
        cache[id(g)] = out
        return out

    return go(f)


def assign(f: Formula, values: Mapping[Var, bool]) -> Formula:
    """Replace boolean variables by constants and simplify."""
    if not values:
        return f

    def go(g: Formula) -> Formula:
        if not (vocab(g) & values.keys()):
            return g
        if isinstance(g, BoolVar):
            return TRUE if values[g.var] else FALSE
        if isinstance(g, Not):
            return neg(go(g.arg))
        if isinstance(g, And):
            return conj(*(go(c) for c in g.args))
        if isinstance(g, Or):
            return disj(*(go(c) for c in g.args))
        return g

    return go(f)


def evaluate(f: Formula, model: Mapping[Var, object]) -> bool:
    """Truth value of ``f`` under a total model of its vocabulary."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, BoolVar):
        return bool(model[f.var])
    if isinstance(f, Atom):
        total = sum((c * Fraction(model[v]) for v, c in f.terms), Fraction(0))
        return _compare(total, f.op, f.const)
    if isinstance(f, Not):
        return not evaluate(f.arg, model)
    if isinstance(f, And):
        return all(evaluate(c, model) for c in f.args)
    return any(evaluate(c, model) for c in f.args)


def negate_atom(a: Atom) -> Formula:
    """Complement of an atom as a disjunction-free formula where possible."""
    if a.op == "=":
        return disj(Atom(a.terms, "<", a.const), Atom(a.terms, ">", a.const))
    return Atom(a.terms, _NEGATE[a.op], a.const)


def nnf(f: Formula) -> Formula:
    """Push negations down to boolean variables; negated atoms become atoms."""

    def go(g: Formula, positive: bool) -> Formula:
        if isinstance(g, Const):
            return g if positive else neg(g)
        if isinstance(g, BoolVar):
            return g if positive else Not(g)
        if isinstance(g, Atom):
            return g if positive else negate_atom(g)
        if isinstance(g, Not):
            return go(g.arg, not positive)
        parts = [go(c, positive) for c in g.children()]
        if isinstance(g, And) == positive:
            return conj(*parts)
        return disj(*parts)

    return go(f, True)


def literal_var(lit: Formula) -> tuple[Var, bool] | None:
    if isinstance(lit, BoolVar):
        return lit.var, True
    if isinstance(lit, Not) and isinstance(lit.arg, BoolVar):
        return lit.arg.var, False
    return None


def nnf_dnf(f: Formula, budget: int | None = 100_000) -> list[tuple[Formula, ...]]:
    """Disjunctive normal form of ``f`` as a list of cubes.

    Cubes whose boolean literals clash are dropped; arithmetic consistency is
    not checked here.  Raises ResourceExhausted when more than ``budget``
    intermediate cubes would be produced.
    """

    def merge(a: tuple, b: tuple):
        lits = dict.fromkeys(a)
        lits.update(dict.fromkeys(b))
        seen: dict[Var, bool] = {}
        for lit in lits:
            lv = literal_var(lit)
            if lv:
                v, pol = lv
                if seen.setdefault(v, pol) != pol:
                    return None
        return tuple(sorted(lits, key=lambda x: x.key))

    def go(g: Formula) -> list[tuple]:
        if isinstance(g, Const):
            return [()] if g.value else []
        if isinstance(g, Or):
            out = []
            for c in g.args:
                out.extend(go(c))
            return out
        if isinstance(g, And):
            acc = [()]
            for c in g.args:
                nxt = []
                for right in go(c):
                    for left in acc:
                        m = merge(left, right)
                        if m is not None:
                            nxt.append(m)
                if budget is not None and len(nxt) > budget:
                    raise ResourceExhausted(f"DNF exceeds {budget} cubes")
                acc = nxt
            return acc
        return [(g,)]

    seen = set()
    result = []
    for cube in go(nnf(f)):
        if cube not in seen:
            seen.add(cube)
            result.append(cube)
    return result


def to_smt(f: Formula, names: Mapping[Var, str] | None = None) -> str:
    """SMT-LIB2 term syntax; ``names`` optionally overrides variable names."""
    return f._render(names) if names else f.key

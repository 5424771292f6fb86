"""Decision procedure for quantifier-free linear arithmetic with booleans.

A small DPLL-style search over the NNF of a formula: boolean literals and
conjunctions are propagated eagerly, disjunctions are split with the
fewest-children-first rule, pure eliminable booleans are fixed, and each leaf
cube of arithmetic constraints is decided by Fourier-Motzkin elimination
(with branch and bound for integer variables).  The same search enumerates
leaf cubes for existential projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

from . import lra
from .errors import ResourceExhausted
from .formula import (
    BOOL,
    INT,
    TRUE,
    And,
    Atom,
    BoolVar,
    Const,
    Formula,
    Lin,
    Not,
    Var,
    atom,
    boolvar,
    conj,
    disj,
    neg,
    nnf,
    vocab,
)

DEFAULT_BUDGET = 200_000


@dataclass(frozen=True)
class Sat:
    model: dict = field(compare=False)


@dataclass(frozen=True)
class Unsat:
    pass


UNSAT = Unsat()


def _compile(f: Formula):
    if isinstance(f, Const):
        return f.value
    if isinstance(f, BoolVar):
        return ("b", f.var, True)
    if isinstance(f, Not):
        return ("b", f.arg.var, False)
    if isinstance(f, Atom):
        (c,) = lra.from_atom(f)
        if isinstance(c, bool):
            return c
        return ("a", c)
    kind = "and" if isinstance(f, And) else "or"
    return (kind, tuple(_compile(c) for c in f.args))


def _peval(item, assign: dict):
    if item is True or item is False:
        return item
    tag = item[0]
    if tag == "b":
        v = assign.get(item[1])
        if v is None:
            return item
        return v == item[2]
    if tag == "a":
        return item
    is_and = tag == "and"
    kids = []
    changed = False
    for k in item[1]:
        r = _peval(k, assign)
        if r is not k:
            changed = True
        if r is True:
            if not is_and:
                return True
            continue
        if r is False:
            if is_and:
                return False
            continue
        kids.append(r)
    if not changed:
        return item
    if not kids:
        return is_and
    if len(kids) == 1:
        return kids[0]
    return (tag, tuple(kids))


def _polarity(item, acc: dict) -> None:
    if item is True or item is False:
        return
    tag = item[0]
    if tag == "b":
        acc[item[1]] = acc.get(item[1], 0) | (1 if item[2] else 2)
    elif tag in ("and", "or"):
        for k in item[1]:
            _polarity(k, acc)


class _Search:
    def __init__(self, eliminable: set[Var], budget: int, integer: bool):
        self.eliminable = eliminable
        self.budget = budget
        self.nodes = 0
        self.integer = integer

    def leaves(self, pending: list, assign: dict, cons: list) -> Iterator[tuple[dict, list]]:
        self.nodes += 1
        if self.nodes > self.budget:
            raise ResourceExhausted("satisfiability search budget exceeded")
        while True:
            queue = list(pending)
            rest = []
            changed = False
            while queue:
                it = queue.pop()
                if changed:
                    it = _peval(it, assign)
                if it is True:
                    continue
                if it is False:
                    return
                tag = it[0]
                if tag == "b":
                    cur = assign.get(it[1])
                    if cur is None:
                        assign[it[1]] = it[2]
                        changed = True
                    elif cur != it[2]:
                        return
                elif tag == "a":
                    cons.append(it[1])
                elif tag == "and":
                    queue.extend(it[1])
                else:
                    rest.append(it)
            if changed:
                pending = rest
                continue
            pending = rest
            if self.eliminable and pending:
                pol: dict = {}
                for it in pending:
                    _polarity(it, pol)
                pure = False
                for v, p in pol.items():
                    if v in self.eliminable and v not in assign and p != 3:
                        assign[v] = p == 1
                        pure = True
                if pure:
                    pending = [_peval(it, assign) for it in pending]
                    continue
            break
        if not pending:
            yield assign, cons
            return
        if not lra.feasible(cons, integer=self.integer):
            return
        idx = min(range(len(pending)), key=lambda i: len(pending[i][1]))
        split = pending[idx]
        others = pending[:idx] + pending[idx + 1:]
        for child in split[1]:
            yield from self.leaves(others + [child], dict(assign), list(cons))


def _has_int(f: Formula) -> bool:
    return any(v.sort == INT for v in vocab(f))


def check_sat(f: Formula, budget: int = DEFAULT_BUDGET) -> Sat | Unsat:
    """Satisfiability with a model over ``vocab(f)`` (Int variables integral)."""
    item = _compile(nnf(f))
    voc = vocab(f)
    if item is False:
        return UNSAT
    if item is True:
        return Sat(_complete({}, {}, voc))
    search = _Search({v for v in voc if v.sort == BOOL}, budget, _has_int(f))
    for assign, cons in search.leaves([item], {}, []):
        m = lra.solve(cons)
        if m is not None:
            return Sat(_complete(assign, m, voc))
    return UNSAT


def _complete(assign: dict, arith: dict, voc) -> dict:
    model: dict = {}
    for v in voc:
        if v.sort == BOOL:
            model[v] = assign.get(v, False)
        else:
            model[v] = arith.get(v, Fraction(0))
    return model


def is_sat(f: Formula) -> bool:
    return isinstance(check_sat(f), Sat)


def entails(a: Formula, b: Formula) -> bool:
    return isinstance(check_sat(conj(a, neg(b))), Unsat)


def equivalent(a: Formula, b: Formula) -> bool:
    return entails(a, b) and entails(b, a)


def constraint_formula(c: lra.Constraint) -> Formula:
    return atom(Lin(c.terms), c.op, c.rhs)


def cubes(
    f: Formula, keep: Iterable[Var], integer: bool | None = None, budget: int = DEFAULT_BUDGET
) -> list[tuple[dict, list]]:
    """Leaf cubes of ``f`` projected onto ``keep``.

    Each result is ``(bool_assignment, constraints)`` restricted to ``keep``;
    the disjunction of all results is equivalent to ``exists (vocab - keep). f``
    over the rationals.
    """
    keep = set(keep)
    voc = vocab(f)
    if integer is None:
        integer = _has_int(f)
    item = _compile(nnf(f))
    if item is False:
        return []
    if item is True:
        return [({}, [])]
    elim_bools = {v for v in voc if v.sort == BOOL and v not in keep}
    search = _Search(elim_bools, budget, integer)
    out = []
    seen = set()
    for assign, cons in search.leaves([item], {}, []):
        drop = {v for c in cons for v in c.vars if v not in keep}
        e = lra.Eliminator(cons, integer=integer)
        e.run(drop)
        if e.infeasible:
            continue
        bools = {v: b for v, b in assign.items() if v in keep}
        cs = sorted(e.current, key=lambda c: (c.terms, c.op, c.rhs))
        sig = (tuple(sorted(bools.items())), tuple(cs))
        if sig in seen:
            continue
        seen.add(sig)
        out.append((bools, cs))
    return out


def _cube_formula(bools: dict, cs: list) -> Formula:
    lits = [boolvar(v) if b else neg(boolvar(v)) for v, b in sorted(bools.items())]
    return conj(*lits, *(constraint_formula(c) for c in cs))


def _prune_redundant(cs: list, integer: bool) -> list:
    """Drop constraints implied by the others in the same cube."""
    if len(cs) > 12:
        return cs
    out = list(cs)
    i = 0
    while i < len(out):
        c = out[i]
        others = out[:i] + out[i + 1:]
        if c.op == "=":
            i += 1
            continue
        flipped = lra.make([(v, -a) for v, a in c.terms], "<" if c.op == "<=" else "<=", -c.rhs)
        if not lra.feasible(others + [flipped], integer=integer):
            out = others
        else:
            i += 1
    return out


def project(f: Formula, keep: Iterable[Var], integer: bool | None = None, simplify: bool = True) -> Formula:
    """Existential projection of ``f`` onto ``keep`` by cube splitting and FM."""
    keep = set(keep)
    if integer is None:
        integer = _has_int(f)
    found = cubes(f, keep, integer=integer)
    if simplify:
        found = [(b, _prune_redundant(cs, integer)) for b, cs in found]
    forms = []
    for b, cs in found:
        g = _cube_formula(b, cs)
        if g == TRUE:
            return TRUE
        forms.append(g)
    if simplify:
        forms = drop_subsumed(forms)
    return disj(*forms)


def _literals(g: Formula) -> frozenset:
    return frozenset(g.args) if isinstance(g, And) else frozenset((g,))


def drop_subsumed(forms: list[Formula], semantic_limit: int = 24) -> list[Formula]:
    """Remove disjuncts that entail another disjunct."""
    uniq = list(dict.fromkeys(forms))
    lits = [_literals(g) for g in uniq]
    keep = []
    for i, g in enumerate(uniq):
        dominated = False
        for j, h in enumerate(uniq):
            if i == j:
                continue
            if lits[j] < lits[i] or (lits[j] == lits[i] and j < i):
                dominated = True
                break
        if not dominated:
            keep.append(g)
    if len(keep) > semantic_limit:
        return keep
    result = list(keep)
    i = 0
    while i < len(result):
        g = result[i]
        if any(entails(g, h) for j, h in enumerate(result) if j != i):
            result.pop(i)
        else:
            i += 1
    return result

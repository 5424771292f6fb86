"""Solving CHC systems with one interpolation query per predicate.

For a clause-dependence-disjoint system every predicate ``P`` is visited in
topological order.  The pre-formula describes the states ``P``'s clauses can
produce given the interpretations already found for its dependencies; the
post-formula describes everything that can still reach the query from
``P``'s values.  Each predicate occurrence is encoded once, with a boolean
indicator ``b!Q`` marking whether the constraints of ``Q`` are in use.  An
interpolant between the two is a sound interpretation for ``P``; mutual
satisfiability means the system has no solution.

General recursion-free systems are first expanded into this form, and
recursive systems are approached through bounded unwindings.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .chc import Clause, Predicate, PredApp, System, build_clause
from .errors import (
    IncompleteSolution,
    NotCDD,
    ResourceExhausted,
    SolverUnknown,
    ValidationUnknown,
)
from .expand import DEFAULT_BUDGET, collapse, expand
from .formula import (
    BOOL,
    FALSE,
    TRUE,
    Formula,
    Var,
    boolvar,
    conj,
    disj,
    neg,
    size,
    substitute,
    vocab,
)
from .interpolate import Interpolant, MutuallySat, check_interpolant, itp
from .sat import Sat, check_sat

log = logging.getLogger(__name__)

PRE_SUFFIX = "~pre"


def indicator(p: Predicate) -> Var:
    return Var(f"b!{p.name}", BOOL)


def slots(p: Predicate) -> tuple[Var, ...]:
    """Variables standing for ``p``'s argument positions in the encoding."""
    return tuple(Var(f"{p.name}!{i}", v.sort) for i, v in enumerate(p.params))


def _to_slots(p: Predicate) -> dict[Var, Var]:
    return {a: b for a, b in zip(p.params, slots(p)) if a != b}


def _from_slots(p: Predicate) -> dict[Var, Var]:
    return {b: a for a, b in zip(p.params, slots(p)) if a != b}


def _clause_renaming(c: Clause) -> dict[Var, Var]:
    m: dict[Var, Var] = {}
    if c.head is not None:
        m.update(zip(c.head.args, slots(c.head.pred)))
    for b in c.body:
        m.update(zip(b.args, slots(b.pred)))
    return m


def clause_ctr(c: Clause, drop: Predicate | None = None) -> Formula:
    """Clause constraint over slot variables, conjoined with body indicators."""
    f = substitute(c.constraint, _clause_renaming(c))
    inds = [boolvar(indicator(q)) for q in c.body_preds if q != drop]
    return conj(f, *inds)


def interp_at_slots(p: Predicate, sigma: dict) -> Formula:
    if p not in sigma:
        raise IncompleteSolution(f"no interpretation for {p.name}")
    return substitute(sigma[p], _to_slots(p))


def ctr(s: System, p: Predicate, sigma: dict | None = None, drop: Predicate | None = None) -> Formula:
    """``sigma(P)`` when known, else the disjunction of ``P``'s clause bodies."""
    sigma = sigma or {}
    p = s.pred(p.name)
    if p in sigma:
        return interp_at_slots(p, sigma)
    return disj(*(clause_ctr(c, drop) for c in s.clauses_of(p)))


def vc(s: System, p: Predicate, sigma: dict | None = None, drop: Predicate | None = None) -> Formula:
    return disj(neg(boolvar(indicator(p))), ctr(s, p, sigma, drop))


def pre_formula(s: System, p: Predicate, sigma: dict) -> Formula:
    p = s.pred(p.name)
    parts = [ctr(s, p, {})]
    for q in sorted(s.deps(p)):
        parts.append(disj(neg(boolvar(indicator(q))), interp_at_slots(q, sigma)))
    return conj(*parts)


def post_set(s: System, p: Predicate, sigma: dict) -> list[Predicate]:
    """Predicates whose verification conditions enter the post-formula of ``p``.

    Starts from the transitive dependents of ``p``, their siblings (and those
    of ``p``) and the dependencies of those siblings, then closes the set
    under "every body predicate of a clause used in the encoding" so that no
    indicator is left unconstrained.
    """
    p = s.pred(p.name)
    d0 = set(s.tdependents(p))
    d1 = set()
    for q in d0 | {p}:
        d1 |= s.siblings(q)
    d2 = set()
    for q in d1:
        d2 |= s.tdeps(q)
    d = (d0 | d1 | d2 | set(s.query.body_preds)) - {p}
    todo = list(d)
    while todo:
        q = todo.pop()
        if q in sigma:
            continue
        for c in s.clauses_of(q):
            for r in c.body_preds:
                if r != p and r not in d:
                    d.add(r)
                    todo.append(r)
    return sorted(d)


def query_formula(s: System, drop: Predicate | None = None) -> Formula:
    return clause_ctr(s.query, drop)


def post_formula(s: System, p: Predicate, sigma: dict) -> Formula:
    p = s.pred(p.name)
    parts = [query_formula(s, drop=p)]
    for q in post_set(s, p, sigma):
        parts.append(vc(s, q, sigma, drop=p))
    return conj(*parts)


@dataclass
class SolveStats:
    itp_calls: int = 0
    trace: list = field(default_factory=list)
    expansion_copies: int = 0


def _rename_pre(f: Formula, keep: set[Var]) -> Formula:
    m = {v: Var(v.name + PRE_SUFFIX, v.sort) for v in vocab(f) if v not in keep}
    return substitute(f, m)


def solve_cdd(s: System, backend=None, stats: SolveStats | None = None, check: bool = False) -> dict | None:
    """Interpret every predicate of a CDD system, or ``None`` if unsolvable."""
    if not s.is_cdd():
        raise NotCDD("solve_cdd needs a clause-dependence-disjoint system")
    stats = stats if stats is not None else SolveStats()
    if not s.query.body and isinstance(check_sat(s.query.constraint), Sat):
        return None
    sigma: dict = {}
    for p in s.topo_order():
        keep = set(slots(p))
        pre = _rename_pre(pre_formula(s, p, sigma), keep)
        post = post_formula(s, p, sigma)
        t0 = time.perf_counter()
        res = itp(pre, post, keep, backend)
        ms = (time.perf_counter() - t0) * 1000
        stats.itp_calls += 1
        record = {
            "predicate": p.name,
            "pre-size": size(pre),
            "post-size": size(post),
            "itp-time-ms": round(ms, 3),
        }
        if isinstance(res, MutuallySat):
            record["interpolant"] = None
            stats.trace.append(record)
            return None
        if not isinstance(res, Interpolant):
            record["interpolant"] = None
            stats.trace.append(record)
            raise SolverUnknown(f"interpolation for {p.name} returned unknown: {res.reason}")
        if check and not check_interpolant(pre, post, keep, res.formula):
            raise SolverUnknown(f"backend returned an invalid interpolant for {p.name}")
        sigma[p] = substitute(res.formula, _from_slots(p))
        record["interpolant"] = sigma[p].key
        stats.trace.append(record)
        log.debug("interpreted %s as %s", p.name, sigma[p].key)
        if check:
            bad = _partial_failure(s, sigma)
            if bad is not None:
                raise SolverUnknown(f"partial solution fails clause {bad} after {p.name}")
    return sigma


def _partial_failure(s: System, sigma: dict) -> int | None:
    for c in s.clauses:
        if c.head is None or c.head.pred not in sigma:
            continue
        if all(q in sigma for q in c.body_preds) and not _clause_valid(c, sigma):
            return c.id
    return None


def solve_recursion_free(
    s: System,
    backend=None,
    budget: int = DEFAULT_BUDGET,
    stats: SolveStats | None = None,
    check: bool = False,
    expansion_out: list | None = None,
) -> dict | None:
    """Solve a recursion-free system: expand, solve, collapse."""
    exp = expand(s, budget=budget)
    if expansion_out is not None:
        expansion_out.append(exp)
    if stats is not None:
        stats.expansion_copies += exp.copies
    sol = solve_cdd(exp.system, backend, stats, check)
    if sol is None:
        return None
    return collapse(exp.corr, sol)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _apply(sigma: dict, app: PredApp) -> Formula:
    if app.pred not in sigma:
        raise IncompleteSolution(f"no interpretation for {app.pred.name}")
    return substitute(sigma[app.pred], app.binding())


def _clause_valid(c: Clause, sigma: dict) -> bool:
    parts = [c.constraint] + [_apply(sigma, b) for b in c.body]
    head = FALSE if c.head is None else _apply(sigma, c.head)
    try:
        res = check_sat(conj(*parts, neg(head)))
    except ResourceExhausted as e:
        raise ValidationUnknown(f"clause {c.id}: {e}") from e
    return not isinstance(res, Sat)


def first_failure(s: System, sigma: dict) -> int | None:
    """Id of the first clause not valid under ``sigma`` (``None`` if all are)."""
    for c in s.clauses:
        if not _clause_valid(c, sigma):
            return c.id
    return None


def validate(s: System, sigma: dict) -> bool:
    return first_failure(s, sigma) is None


# ---------------------------------------------------------------------------
# Recursive systems
# ---------------------------------------------------------------------------


def unwind(s: System, k: int) -> System:
    """Level-indexed recursion-free approximation of depth ``k``.

    Predicates are ranked by the topological order of their strongly
    connected components (by name inside a component).  A body occurrence
    of lower rank than the head stays on the same level; any other
    occurrence refers to the previous level.  Clauses needing level -1 are
    dropped, the query reads level ``k``, and predicates that cannot reach
    the query are removed.
    """
    if k < 0:
        raise ValueError("unwinding depth must be non-negative")
    rank: dict[Predicate, tuple] = {}
    for idx, comp in enumerate(s.sccs()):
        for p in comp:
            rank[p] = (idx, p.name)
    level_pred: dict[tuple[str, int], Predicate] = {}

    def at(p: Predicate, i: int) -> Predicate:
        key = (p.name, i)
        if key not in level_pred:
            level_pred[key] = p.renamed(f"{p.name}@{i}")
        return level_pred[key]

    raw = []
    for i in range(k + 1):
        for c in s.clauses:
            if c.head is None:
                continue
            hp = c.head.pred
            body = []
            ok = True
            for b in c.body:
                lvl = i if rank[b.pred] < rank[hp] else i - 1
                if lvl < 0:
                    ok = False
                    break
                body.append((at(b.pred, lvl), list(b.args)))
            if ok:
                raw.append(((at(hp, i), list(c.head.args)), body, c.constraint))
    qbody = [(at(b.pred, k), list(b.args)) for b in s.query.body]
    raw.append((None, qbody, s.query.constraint))
    needed: set[str] = {p.name for p, _ in qbody}
    deps: dict[str, set[str]] = {}
    for h, body, _ in raw:
        if h is not None:
            deps.setdefault(h[0].name, set()).update(p.name for p, _ in body)
    todo = list(needed)
    while todo:
        n = todo.pop()
        for m in deps.get(n, ()):
            if m not in needed:
                needed.add(m)
                todo.append(m)
    clauses = []
    cid = 0
    for h, body, constraint in raw:
        if h is not None and h[0].name not in needed:
            continue
        cid += 1
        clauses.append(build_clause(cid, h, body, constraint))
    preds = [p for p in level_pred.values() if p.name in needed]
    return System(clauses, preds)


@dataclass(frozen=True)
class Solved:
    solution: dict = field(compare=False)
    depth: int = 0


@dataclass(frozen=True)
class Refuted:
    depth: int


@dataclass(frozen=True)
class Unknown:
    reason: str


def _level_map(u: System, s: System) -> dict[Predicate, list[Predicate]]:
    out: dict[Predicate, list[Predicate]] = {p: [] for p in s.preds}
    for q in u.preds:
        base, _, lvl = q.name.rpartition("@")
        out[s.pred(base)].append(q)
    for p in out:
        out[p].sort(key=lambda q: int(q.name.rpartition("@")[2]))
    return out


def recursive_candidates(s: System, u: System, sigma: dict) -> list[dict]:
    """Candidate interpretations of ``s`` built from a solution of an unwinding."""
    levels = _level_map(u, s)
    union = {p: (disj(*(sigma[q] for q in qs)) if qs else TRUE) for p, qs in levels.items()}
    cands = [union]
    depth = max((len(qs) for qs in levels.values()), default=0)
    for i in range(depth):
        cand = {}
        for p, qs in levels.items():
            match = [q for q in qs if q.name.endswith(f"@{i}")]
            cand[p] = sigma[match[0]] if match else TRUE
        cands.append(cand)
    return cands


def solve_recursive(s: System, k_max: int = 16, backend=None, stats: SolveStats | None = None):
    """Bounded unwinding loop: ``Solved``, ``Refuted(depth)`` or ``Unknown``."""
    for k in range(k_max + 1):
        u = unwind(s, k)
        sigma = solve_recursion_free(u, backend, stats=stats)
        if sigma is None:
            return Refuted(k)
        for cand in recursive_candidates(s, u, sigma):
            try:
                if validate(s, cand):
                    return Solved(cand, k)
            except ValidationUnknown:
                continue
    return Unknown(f"no inductive solution found up to depth {k_max}")

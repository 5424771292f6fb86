"""Expansion of recursion-free systems into clause-dependence-disjoint form.

An expansion duplicates predicates (and the clauses that define them) until
no clause has two body occurrences whose dependency cones overlap.  The
correspondence maps every predicate of the expansion back to the predicate
it copies; solutions of the expansion collapse to solutions of the original
by conjoining the interpretations of all copies.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

from .chc import Clause, Predicate, PredApp, System, _strip, build_clause
from .errors import (
    CorrespondenceError,
    ExpansionBudget,
    IncompleteSolution,
    NotRecursionFree,
    NotShared,
)
from .formula import Formula, Var, conj, substitute

DEFAULT_BUDGET = 10_000


@dataclass
class Correspondence:
    """Map from predicates of an expansion to predicates of its origin."""

    mapping: dict[Predicate, Predicate]
    origin_preds: tuple[Predicate, ...] = ()

    def __call__(self, p: Predicate) -> Predicate:
        return self.mapping[p]

    def preimages(self, p: Predicate) -> list[Predicate]:
        return sorted(q for q, r in self.mapping.items() if r == p)

    def is_identity(self) -> bool:
        return all(p == q for p, q in self.mapping.items())

    def lines(self) -> str:
        """Side-car text format: one ``P' -> P`` pair per line."""
        return "".join(f"{p.name} -> {q.name}\n" for p, q in sorted(self.mapping.items()))


@dataclass
class Expansion:
    system: System
    corr: Correspondence
    origin: System
    copies: int = 0
    steps: list = field(default_factory=list)


def _occurrence_pairs(s: System, c: Clause):
    """Pairs of body positions ``(i, j)``, ``i < j`` in sibling order."""
    body = c.body
    order = sorted(range(len(body)), key=lambda i: (body[i].pred.name, i))
    for a in range(len(order)):
        for b in range(a + 1, len(order)):
            yield order[a], order[b]


def _sharing(s: System, c: Clause):
    """All ``(P, i, j)`` where ``P`` is shared by body positions ``i`` and ``j``."""
    body = c.body
    for i, j in _occurrence_pairs(s, c):
        qi, qj = body[i].pred, body[j].pred
        if qi == qj:
            yield qi, i, j
            continue
        for p in sorted(s.cone(qi) & s.cone(qj)):
            yield p, i, j


def shared_rel(s: System) -> tuple[Clause, Predicate] | None:
    """A sibling-shared dependency ``(C, P)``, or ``None`` for CDD systems.

    Among all candidates the predicate with the smallest dependency cone is
    chosen, then the smallest clause id, then the predicate name.
    """
    if not s.is_recursion_free():
        raise NotRecursionFree("expansion needs a recursion-free system")
    best = None
    for c in s.clauses:
        for p, _, _ in _sharing(s, c):
            key = (len(s.tdeps(p)), c.id, p.name)
            if best is None or key < best[0]:
                best = (key, c, p)
    if best is None:
        return None
    return best[1], best[2]


def _path(s: System, start: Predicate, goal: Predicate) -> list[Predicate]:
    """Shortest dependency path from ``start`` to ``goal`` (name-ordered BFS)."""
    prev: dict[Predicate, Predicate | None] = {start: None}
    todo = deque([start])
    while todo:
        p = todo.popleft()
        if p == goal:
            break
        for q in sorted(s.deps(p)):
            if q not in prev:
                prev[q] = p
                todo.append(q)
    if goal not in prev:
        raise NotShared(f"{goal.name} is not reachable from {start.name}")
    out = [goal]
    while prev[out[-1]] is not None:
        out.append(prev[out[-1]])
    return out[::-1]


class _Namer:
    def __init__(self, s: System, roots: dict[Predicate, Predicate]):
        self.taken = {p.name for p in s.preds}
        self.roots = roots
        self.counters: dict[str, int] = {}

    def fresh(self, p: Predicate) -> Predicate:
        base = self.roots.get(p, p).name
        k = self.counters.get(base, 0)
        while True:
            k += 1
            name = f"{base}!{k}"
            if name not in self.taken:
                break
        self.counters[base] = k
        self.taken.add(name)
        return p.renamed(name)


def _reclause(cid: int, head: PredApp | None, body, constraint: Formula) -> Clause:
    h = (head.pred, list(head.args)) if head is not None else None
    return build_clause(cid, h, [(b.pred, list(b.args)) for b in body], constraint)


def copy_rel(
    s: System,
    c: Clause | int,
    p: Predicate,
    namer: _Namer | None = None,
) -> tuple[System, dict[Predicate, Predicate]]:
    """Break one sibling-shared dependency by copying predicates.

    Returns the new system and a map from each fresh copy to the predicate
    of ``s`` it duplicates.  The copy is made on the side of the later
    sibling occurrence (in name order): the first predicate on its path to
    ``p`` that the earlier sibling also reaches is duplicated along with the
    rest of that path down to ``p``, and the clause leading into it is
    rewired to the copy.
    """
    cid = c if isinstance(c, int) else c.id
    c = s.clause(cid)
    p = s.pred(p.name)
    hits = [(i, j) for q, i, j in _sharing(s, c) if q == p]
    if not hits:
        raise NotShared(f"{p.name} is not shared by siblings in clause {cid}")
    i, j = hits[0]
    namer = namer or _Namer(s, {})
    next_id = s.next_clause_id()
    new_clauses: dict[int, Clause] = {x.id: x for x in s.clauses}
    made: dict[Predicate, Predicate] = {}

    def copy_chain(chain: list[Predicate]) -> Predicate:
        nonlocal next_id
        copies = [namer.fresh(n) for n in chain]
        for k, (orig, cp) in enumerate(zip(chain, copies)):
            made[cp] = orig
            nxt = chain[k + 1] if k + 1 < len(chain) else None
            for d in s.clauses_of(orig):
                body = []
                for b in d.body:
                    if nxt is not None and b.pred == nxt:
                        body.append(PredApp(copies[k + 1], b.args))
                    else:
                        body.append(b)
                new_clauses[next_id] = _reclause(next_id, PredApp(cp, d.head.args), body, d.constraint)
                next_id += 1
        return copies[0]

    qi, qj = c.body[i].pred, c.body[j].pred
    if qi == qj:
        chain = [qi]
        rewire_clause, rewire_target, position = c, qi, j
    else:
        path = _path(s, qj, p)
        cone_i = s.cone(qi)
        t = next(k for k, n in enumerate(path) if n in cone_i)
        chain = path[t:]
        if t == 0:
            rewire_clause, rewire_target, position = c, qj, j
        else:
            pred_r = path[t - 1]
            rewire_clause = next(d for d in s.clauses_of(pred_r) if chain[0] in d.body_preds)
            rewire_target = chain[0]
            position = next(k for k, b in enumerate(rewire_clause.body) if b.pred == rewire_target)
    first_copy = copy_chain(chain)
    body = list(rewire_clause.body)
    body[position] = PredApp(first_copy, body[position].args)
    new_clauses[rewire_clause.id] = Clause(rewire_clause.id, rewire_clause.head, tuple(body), rewire_clause.constraint)
    out = System(new_clauses.values(), list(s.preds) + list(made))
    return out, made


def expand(s: System, budget: int = DEFAULT_BUDGET, check: bool = False) -> Expansion:
    """Minimal-copy CDD expansion of a recursion-free system."""
    if not s.is_recursion_free():
        raise NotRecursionFree("expansion needs a recursion-free system")
    eta = {p: p for p in s.preds}
    cur = s
    namer = _Namer(s, eta)
    copies = 0
    steps = []
    while True:
        found = shared_rel(cur)
        if found is None:
            break
        c, p = found
        cur, made = copy_rel(cur, c, p, namer)
        for cp, orig in made.items():
            eta[cp] = eta[orig]
        copies += len(made)
        steps.append((c.id, p.name, sorted(x.name for x in made)))
        if copies > budget:
            raise ExpansionBudget(f"expansion needed more than {budget} predicate copies")
        if check:
            problems = check_correspondence(s, cur, eta)
            if problems:
                raise CorrespondenceError("; ".join(problems))
    return Expansion(cur, Correspondence(eta, s.preds), s, copies, steps)


def _clause_shape(c: Clause, eta) -> tuple:
    def name(v: Var) -> tuple:
        return (_strip(v.name), v.sort)

    ren = {v: Var(_strip(v.name), v.sort) for v in c.variables()}
    head = None if c.head is None else (eta(c.head.pred).name, tuple(name(a) for a in c.head.args))
    body = tuple(sorted((eta(b.pred).name, tuple(name(a) for a in b.args)) for b in c.body))
    return head, body, substitute(c.constraint, ren).key


def check_correspondence(origin: System, exp: System, eta: dict | Correspondence) -> list[str]:
    """Violations of the correspondence conditions (empty when valid).

    Checked: parameters agree, every clause maps onto a clause of the
    origin, the map is onto, and each copy keeps a copy of every clause
    defining the predicate it duplicates.
    """
    mapping = eta.mapping if isinstance(eta, Correspondence) else eta
    problems = []

    def im(p: Predicate) -> Predicate:
        return mapping[p]

    for p in exp.preds:
        if p not in mapping:
            problems.append(f"{p.name} has no image")
            continue
        if mapping[p].params != p.params:
            problems.append(f"{p.name} and {mapping[p].name} have different parameters")
    if problems:
        return problems
    originals = {_clause_shape(c, lambda q: q) for c in origin.clauses}
    shapes_by_head: dict[Predicate, Counter] = {}
    for c in exp.clauses:
        shape = _clause_shape(c, im)
        if shape not in originals:
            problems.append(f"clause {c.id} is not the image of a clause of the origin")
        if c.head is not None:
            shapes_by_head.setdefault(c.head.pred, Counter())[shape] += 1
    if {p.name for p in origin.preds} - {im(p).name for p in exp.preds}:
        problems.append("correspondence is not onto")
    for p in exp.preds:
        # Compared as multisets: an origin may contain identical clauses.
        want = Counter(_clause_shape(c, lambda q: q) for c in origin.clauses_of(origin.pred(im(p).name)))
        if shapes_by_head.get(p, Counter()) != want:
            problems.append(f"{p.name} does not copy every clause of {im(p).name}")
    return problems


def collapse(eta: Correspondence, sigma: dict) -> dict:
    """Conjoin the interpretations of all copies of each original predicate."""
    out: dict = {}
    targets = eta.origin_preds or tuple(sorted(set(eta.mapping.values())))
    for p in targets:
        pre = eta.preimages(p)
        if not pre:
            raise CorrespondenceError(f"no predicate of the expansion corresponds to {p.name}")
        parts = []
        for q in pre:
            if q not in sigma:
                raise IncompleteSolution(f"no interpretation for {q.name}")
            parts.append(sigma[q])
        out[p] = conj(*parts)
    return out

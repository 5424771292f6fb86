"""Ground truth for small recursion-free systems, plus generators.

The oracle enumerates derivation trees rooted at the query: each node picks
a clause for its predicate and one subtree per body occurrence, with all
clause-local variables renamed per occurrence.  A system is solvable exactly
when no tree has a satisfiable accumulated constraint.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache

from .chc import Clause, Predicate, System, build_clause
from .errors import OracleTooLarge
from .formula import REAL, Formula, Lin, Var, atom, conj, substitute, vocab
from .sat import Sat, check_sat

MAX_PREDS = 8
MAX_CLAUSES = 14
MAX_TREES = 20_000


@dataclass(frozen=True)
class DerivationTree:
    clause: int
    children: tuple["DerivationTree", ...] = ()

    @property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)

    def clause_ids(self) -> list[int]:
        out = [self.clause]
        for c in self.children:
            out.extend(c.clause_ids())
        return out

    def render(self, s: System | None = None, indent: int = 0) -> str:
        label = f"({self.clause})"
        if s is not None:
            c = s.clause(self.clause)
            label += " false" if c.head is None else f" {c.head.pred.name}"
        lines = ["  " * indent + label]
        for ch in self.children:
            lines.append(ch.render(s, indent + 1))
        return "\n".join(lines)


@dataclass
class OracleResult:
    solvable: bool
    witness: DerivationTree | None = None
    model: dict | None = field(default=None, repr=False)
    trees_checked: int = 0


def _suffix(f: Formula, keep: set[Var], tag: str) -> Formula:
    return substitute(f, {v: Var(f"{v.name}/{tag}", v.sort) for v in vocab(f) if v not in keep})


def tree_formula(s: System, tree: DerivationTree) -> tuple[Formula, tuple[Var, ...]]:
    """Accumulated constraint of a tree over the root head's arguments."""
    c = s.clause(tree.clause)
    if len(tree.children) != len(c.body):
        raise ValueError(f"tree node for clause {c.id} has the wrong number of children")
    parts = [c.constraint]
    for j, (b, child) in enumerate(zip(c.body, tree.children)):
        cc = s.clause(child.clause)
        if cc.head is None or cc.head.pred != b.pred:
            raise ValueError(f"clause {child.clause} does not define {b.pred.name}")
        f, args = tree_formula(s, child)
        f = _suffix(f, set(args), str(j))
        parts.append(substitute(f, dict(zip(args, b.args))))
    return conj(*parts), (c.head.args if c.head is not None else ())


class _Enumerator:
    def __init__(self, s: System, max_trees: int):
        self.s = s
        self.max_trees = max_trees
        self.memo: dict[Predicate, list] = {}
        self.count = 0

    def derivations(self, p: Predicate) -> list[tuple[int, DerivationTree, Formula]]:
        """Satisfiable derivations of ``p`` as ``(size, tree, formula over params)``."""
        if p in self.memo:
            return self.memo[p]
        out = []
        for c in self.s.clauses_of(p):
            for size, tree, f in self.combine(c):
                f = substitute(f, dict(zip(c.head.args, p.params)))
                out.append((size, tree, f))
        out.sort(key=lambda t: (t[0], t[1].clause_ids()))
        self.memo[p] = out
        return out

    def combine(self, c: Clause):
        partial = [(1, [], [c.constraint])]
        for j, b in enumerate(c.body):
            subs = self.derivations(b.pred)
            nxt = []
            for size, kids, parts in partial:
                for ssize, tree, f in subs:
                    g = _suffix(f, set(b.pred.params), str(j))
                    g = substitute(g, dict(zip(b.pred.params, b.args)))
                    nxt.append((size + ssize, kids + [tree], parts + [g]))
                    if len(nxt) > self.max_trees:
                        raise OracleTooLarge("too many derivation trees")
            partial = nxt
        for size, kids, parts in partial:
            self.count += 1
            if self.count > self.max_trees:
                raise OracleTooLarge("too many derivation trees")
            f = conj(*parts)
            if isinstance(check_sat(f), Sat) or c.head is None:
                yield size, DerivationTree(c.id, tuple(kids)), f


def oracle(s: System, guard: bool = True, max_trees: int = MAX_TREES) -> OracleResult:
    """Decide solvability by enumerating derivation trees (smallest first)."""
    if not s.is_recursion_free():
        from .errors import NotRecursionFree

        raise NotRecursionFree("the oracle needs a recursion-free system")
    if guard and (len(s.preds) > MAX_PREDS or len(s.clauses) > MAX_CLAUSES):
        raise OracleTooLarge(f"system exceeds {MAX_PREDS} predicates or {MAX_CLAUSES} clauses")
    en = _Enumerator(s, max_trees)
    roots = sorted(en.combine(s.query), key=lambda t: (t[0], t[1].clause_ids()))
    for _, tree, f in roots:
        res = check_sat(f)
        if isinstance(res, Sat):
            return OracleResult(False, tree, res.model, en.count)
    return OracleResult(True, None, None, en.count)


def oracle_solvable(s: System, guard: bool = True) -> bool:
    return oracle(s, guard).solvable


def replay(s: System, tree: DerivationTree) -> dict | None:
    """Model of a tree's accumulated constraint, or ``None`` if unsatisfiable."""
    f, _ = tree_formula(s, tree)
    res = check_sat(f)
    return res.model if isinstance(res, Sat) else None


# ---------------------------------------------------------------------------
# Random systems
# ---------------------------------------------------------------------------

PROFILES = ("linear", "body-disjoint", "dag", "cdd")


def _constraint(rng: random.Random, vs: list[Var]) -> Formula:
    if not vs:
        return conj()
    parts = []
    for _ in range(rng.randint(1, 3)):
        chosen = rng.sample(vs, rng.randint(1, min(2, len(vs))))
        lin = Lin([(v, rng.choice([-3, -2, -1, 1, 2, 3])) for v in chosen])
        op = rng.choice(["<", "<=", "=", ">=", ">"])
        parts.append(atom(lin, op, rng.randint(-3, 3)))
    return conj(*parts)


def _bodies(rng: random.Random, profile: str, n: int) -> list[list[list[int]]]:
    """For each predicate index a list of clause bodies (lists of indices)."""
    out: list[list[list[int]]] = []
    used: set[int] = set()
    for i in range(n):
        clauses = []
        for _ in range(rng.randint(1, 2)):
            lower = list(range(i))
            if profile == "linear":
                k = rng.randint(0, 1) if lower else 0
                body = rng.sample(lower, k)
            elif profile == "body-disjoint":
                free = [j for j in lower if j not in used]
                k = rng.randint(0, min(2, len(free)))
                body = rng.sample(free, k)
                used.update(body)
            else:
                k = rng.randint(0, min(2, len(lower))) if lower else 0
                body = [rng.choice(lower) for _ in range(k)]
            clauses.append(body)
        out.append(clauses)
    return out


def _query_body(rng: random.Random, profile: str, n: int, bodies) -> list[int]:
    top = n - 1
    if profile == "linear":
        return [top]
    if profile == "body-disjoint":
        used = {j for cl in bodies for b in cl for j in b}
        free = [j for j in range(n) if j not in used and j != top]
        extra = rng.sample(free, min(len(free), rng.randint(0, 1)))
        return [top] + extra
    extra = [rng.randrange(n)] if rng.random() < 0.3 else []
    return [top] + extra


def _build(rng: random.Random, profile: str) -> System:
    n = rng.randint(2, 6)
    arity = [rng.randint(1, 2) for _ in range(n)]
    preds = [Predicate.make(f"P{i}", [REAL] * arity[i]) for i in range(n)]
    bodies = _bodies(rng, profile, n)
    clauses = []
    cid = 0

    def app_vars(tag: str, p: Predicate) -> list[Var]:
        return [Var(f"{tag}{k}", REAL) for k in range(p.arity)]

    for i, cl in enumerate(bodies):
        for body in cl:
            cid += 1
            head_vars = app_vars("h", preds[i])
            body_apps = []
            vs = list(head_vars)
            for j, b in enumerate(body):
                bv = app_vars(f"v{j}_", preds[b])
                body_apps.append((preds[b], bv))
                vs.extend(bv)
            clauses.append(build_clause(cid, (preds[i], head_vars), body_apps, _constraint(rng, vs)))
    qb = _query_body(rng, profile, n, bodies)
    cid += 1
    body_apps = []
    vs = []
    for j, b in enumerate(qb):
        bv = app_vars(f"v{j}_", preds[b])
        body_apps.append((preds[b], bv))
        vs.extend(bv)
    clauses.append(build_clause(cid, None, body_apps, _constraint(rng, vs)))
    return System(clauses, preds)


def gen_system(seed: int, profile: str = "dag") -> System:
    """Deterministic random recursion-free system of the given class."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    rng = random.Random(f"{profile}:{seed}")
    if profile == "cdd":
        for _ in range(50):
            s = _build(rng, "dag")
            if s.is_cdd():
                return s
        return _build(rng, "linear")
    return _build(rng, profile)


# ---------------------------------------------------------------------------
# Size comparisons
# ---------------------------------------------------------------------------


def occurrence_paths(s: System) -> dict[Predicate, int]:
    """Number of distinct occurrence paths from the query to each predicate."""
    paths: dict[Predicate, int] = {p: 0 for p in s.preds}
    for q in s.query.body_preds:
        paths[q] += 1
    for p in reversed(s.topo_order()):
        for c in s.clauses_of(p):
            for q in c.body_preds:
                paths[q] += paths[p]
    return paths


def derivation_count(s: System) -> int:
    """Number of derivation trees rooted at the query (ignoring constraints)."""

    @lru_cache(maxsize=None)
    def trees(name: str) -> int:
        total = 0
        for c in s.clauses_of(s.pred(name)):
            prod = 1
            for q in c.body_preds:
                prod *= trees(q.name)
            total += prod
        return total

    out = 1
    for q in s.query.body_preds:
        out *= trees(q.name)
    return out


def expansion_sizes(s: System) -> dict[str, dict[str, int]]:
    """Clause and predicate counts of three ways to remove sharing."""
    from .expand import expand

    exp = expand(s).system
    paths = occurrence_paths(s)
    tree_clauses = 1 + sum(max(paths[p], 1) * len(s.clauses_of(p)) for p in s.preds)
    tree_preds = sum(max(paths[p], 1) for p in s.preds)

    @lru_cache(maxsize=None)
    def inline(name: str) -> int:
        return sum(1 + sum(inline(q.name) for q in c.body_preds) for c in s.clauses_of(s.pred(name)))

    linear_clauses = sum(1 + sum(inline(q.name) for q in c.body_preds[1:]) for c in s.clauses)
    return {
        "cdd": {"clauses": len(exp.clauses), "preds": len(exp.preds)},
        "tree": {"clauses": tree_clauses, "preds": tree_preds, "derivations": derivation_count(s)},
        "linear_inline": {"clauses": linear_clauses, "preds": len(s.preds)},
    }


def nested_diamond(k: int) -> System:
    """Depth-``k`` chain of diamonds whose derivation count is ``2**k``.

    ``A_i`` is reached from ``A_{i-1}`` through either ``B_i`` (non-negative
    branch, increment) or ``C_i`` (negative branch, decrement).
    """
    from .formula import INT

    def mk(name: str) -> Predicate:
        return Predicate.make(name, [INT])

    x, y = Var("x", INT), Var("y", INT)
    a = [mk(f"A{i}") for i in range(k + 1)]
    clauses = []
    cid = 0

    def add(head, body, constraint):
        nonlocal cid
        cid += 1
        clauses.append(build_clause(cid, head, body, constraint))

    add((a[0], [x]), [], atom(Lin.var(x), "=", 0))
    preds = list(a)
    for i in range(1, k + 1):
        b, c = mk(f"B{i}"), mk(f"C{i}")
        preds += [b, c]
        add((b, [y]), [(a[i - 1], [x])], conj(atom(Lin.var(x), ">=", 0), atom(Lin.var(y), "=", Lin.var(x) + 1)))
        add((c, [y]), [(a[i - 1], [x])], conj(atom(Lin.var(x), "<", 0), atom(Lin.var(y), "=", Lin.var(x) - 1)))
        add((a[i], [y]), [(b, [y])], conj())
        add((a[i], [y]), [(c, [y])], conj())
    add(None, [(a[k], [x])], atom(Lin.var(x), "<", 0))
    return System(clauses, preds)

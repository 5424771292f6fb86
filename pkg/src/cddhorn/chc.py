"""Constrained Horn clause systems and their dependency structure."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ChcError, NoQuery, NotRecursionFree, SortError, UnknownPredicate
from .formula import (
    BOOL,
    TRUE,
    BoolVar,
    Formula,
    Lin,
    Var,
    atom,
    boolvar,
    conj,
    iff,
    substitute,
    vocab,
)

RECURSION_FREE = "recursion-free"
LINEAR = "linear"
BODY_DISJOINT = "body-disjoint"
CDD = "cdd"
LABELS = (RECURSION_FREE, LINEAR, BODY_DISJOINT, CDD)

QUERY_MERGE_NAME = "bad!"


def canonical_params(name: str, sorts: Sequence[str]) -> tuple[Var, ...]:
    return tuple(Var(f"{name}!{i}", s) for i, s in enumerate(sorts))


@dataclass(frozen=True, eq=False)
class Predicate:
    """An uninterpreted relation; identity is by name.

    ``params`` are the canonical parameters every interpretation is written
    over.  Copies made by expansion share the parameters of the original.
    ``display`` optionally holds user-facing parameter names for printing.
    """

    name: str
    params: tuple[Var, ...]
    display: tuple[str, ...] | None = field(default=None, repr=False)

    @classmethod
    def make(cls, name: str, sorts: Sequence[str], display: Sequence[str] | None = None) -> "Predicate":
        return cls(name, canonical_params(name, sorts), tuple(display) if display else None)

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def sorts(self) -> tuple[str, ...]:
        return tuple(p.sort for p in self.params)

    def renamed(self, name: str) -> "Predicate":
        """A copy with a new name and the same parameters."""
        return Predicate(name, self.params, self.display)

    def __eq__(self, other):
        return isinstance(other, Predicate) and self.name == other.name

    def __hash__(self):
        return hash(self.name)

    def __lt__(self, other: "Predicate"):
        return self.name < other.name

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class PredApp:
    pred: Predicate
    args: tuple[Var, ...]

    def __post_init__(self):
        if len(self.args) != self.pred.arity:
            raise ChcError(f"{self.pred.name} expects {self.pred.arity} arguments, got {len(self.args)}")
        for a, p in zip(self.args, self.pred.params):
            if a.sort != p.sort:
                raise SortError(f"argument {a.name} of {self.pred.name} has sort {a.sort}, expected {p.sort}")

    def binding(self) -> dict[Var, Var]:
        """Map from canonical parameters to this application's arguments."""
        return dict(zip(self.pred.params, self.args))

    def __str__(self):
        return f"{self.pred.name}({', '.join(a.name for a in self.args)})"


@dataclass(frozen=True)
class Clause:
    """``head <- body_preds /\\ constraint``; ``head is None`` marks the query."""

    id: int
    head: PredApp | None
    body: tuple[PredApp, ...]
    constraint: Formula

    @property
    def is_query(self) -> bool:
        return self.head is None

    @property
    def body_preds(self) -> tuple[Predicate, ...]:
        return tuple(b.pred for b in self.body)

    def variables(self) -> frozenset[Var]:
        vs = set(vocab(self.constraint))
        if self.head is not None:
            vs.update(self.head.args)
        for b in self.body:
            vs.update(b.args)
        return frozenset(vs)

    def __str__(self):
        h = "false" if self.head is None else str(self.head)
        parts = [str(b) for b in self.body]
        if self.constraint != TRUE or not parts:
            parts.append(self.constraint.key)
        sep = " /\\ "
        return f"{h} <- {sep.join(parts)}"


def _strip(name: str) -> str:
    base, sep, tail = name.rpartition("@")
    if sep and tail.isdigit():
        return base
    return name


def build_clause(
    cid: int,
    head: tuple[Predicate, Sequence] | None,
    body: Sequence[tuple[Predicate, Sequence]],
    constraint: Formula,
) -> Clause:
    """Normalise a clause: rename variables apart and flatten arguments.

    Arguments may be ``Var``, ``Lin`` or (for Bool parameters) ``Formula``.
    Every argument position ends up holding a distinct variable; anything
    else is replaced by a fresh variable plus an equality in the constraint.
    """
    raw_vars: set[Var] = set(vocab(constraint))
    apps = ([head] if head is not None else []) + list(body)
    for _, args in apps:
        for a in args:
            if isinstance(a, Var):
                raw_vars.add(a)
            elif isinstance(a, Lin):
                raw_vars.update(a.vars)
            elif isinstance(a, Formula):
                raw_vars.update(vocab(a))
    rename = {v: Var(f"{_strip(v.name)}@{cid}", v.sort) for v in raw_vars}
    taken = set(rename.values())
    if len(taken) != len(rename):
        raise ChcError(f"clause {cid}: variable names collide after renaming")
    extra: list[Formula] = []
    used: set[Var] = set()
    counter = [0]

    def fresh(sort: str) -> Var:
        while True:
            v = Var(f"_a{counter[0]}@{cid}", sort)
            counter[0] += 1
            if v not in taken:
                taken.add(v)
                return v

    def flatten(pred: Predicate, args: Sequence) -> PredApp:
        if len(args) != pred.arity:
            raise ChcError(f"{pred.name} expects {pred.arity} arguments, got {len(args)}")
        out = []
        for a, p in zip(args, pred.params):
            if isinstance(a, Var):
                a = boolvar(a) if a.sort == BOOL else Lin.var(a)
            if p.sort == BOOL:
                if not isinstance(a, Formula):
                    raise SortError(f"{pred.name} expects a Bool argument")
                a = substitute(a, rename)
                v = a.var if isinstance(a, BoolVar) else None
                if v is not None and v not in used:
                    used.add(v)
                    out.append(v)
                    continue
                nv = fresh(BOOL)
                extra.append(iff(boolvar(nv), a))
            else:
                if not isinstance(a, Lin):
                    raise SortError(f"{pred.name} expects a numeric argument")
                a = a.rename(rename)
                v = a.as_var()
                if v is not None and v.sort == p.sort and v not in used:
                    used.add(v)
                    out.append(v)
                    continue
                nv = fresh(p.sort)
                extra.append(atom(Lin.var(nv), "=", a))
            used.add(nv)
            out.append(nv)
        return PredApp(pred, tuple(out))

    h = flatten(*head) if head is not None else None
    b = tuple(flatten(p, args) for p, args in body)
    return Clause(cid, h, b, conj(substitute(constraint, rename), *extra))


class System:
    """An immutable CHC system with exactly one query clause."""

    def __init__(self, clauses: Iterable[Clause], preds: Iterable[Predicate] = ()):
        self.clauses: tuple[Clause, ...] = tuple(sorted(clauses, key=lambda c: c.id))
        ids = [c.id for c in self.clauses]
        if len(set(ids)) != len(ids):
            raise ChcError("duplicate clause ids")
        table: dict[str, Predicate] = {}

        def register(p: Predicate) -> None:
            old = table.get(p.name)
            if old is None:
                table[p.name] = p
            elif old.params != p.params:
                raise ChcError(f"predicate {p.name} declared with two different signatures")

        for p in preds:
            register(p)
        for c in self.clauses:
            if c.head is not None:
                register(c.head.pred)
            for b in c.body:
                register(b.pred)
        self.preds: tuple[Predicate, ...] = tuple(sorted(table.values()))
        self._by_name = table
        queries = [c for c in self.clauses if c.is_query]
        if not queries:
            raise NoQuery("system has no query clause")
        if len(queries) > 1:
            raise ChcError("system has more than one query clause")
        self.query: Clause = queries[0]
        self._by_id = {c.id: c for c in self.clauses}
        self._heads: dict[Predicate, list[Clause]] = {p: [] for p in self.preds}
        self._deps: dict[Predicate, set[Predicate]] = {p: set() for p in self.preds}
        self._dependents: dict[Predicate, set[Predicate]] = {p: set() for p in self.preds}
        for c in self.clauses:
            if c.head is not None:
                hp = c.head.pred
                self._heads[hp].append(c)
                for b in c.body:
                    self._deps[hp].add(b.pred)
                    self._dependents[b.pred].add(hp)
        self._tdeps: dict[Predicate, frozenset[Predicate]] = {}
        self._labels: frozenset[str] | None = None

    # lookup ----------------------------------------------------------------
    def pred(self, name: str) -> Predicate:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownPredicate(name) from None

    def _check(self, p: Predicate) -> Predicate:
        if self._by_name.get(p.name) != p:
            raise UnknownPredicate(p.name)
        return self._by_name[p.name]

    def clause(self, cid: int) -> Clause:
        return self._by_id[cid]

    def clauses_of(self, p: Predicate) -> tuple[Clause, ...]:
        """Clauses whose head is ``p`` (in id order)."""
        return tuple(self._heads[self._check(p)])

    def next_clause_id(self) -> int:
        return max(self._by_id) + 1

    def __len__(self):
        return len(self.clauses)

    def size(self) -> int:
        """Total formula size plus argument count, used for linearity checks."""
        from .formula import size

        return sum(size(c.constraint) + sum(len(b.args) + 1 for b in c.body) + 1 for c in self.clauses)

    def __str__(self):
        return "\n".join(f"({c.id}) {c}" for c in self.clauses)

    # dependency structure --------------------------------------------------
    def deps(self, p: Predicate) -> frozenset[Predicate]:
        return frozenset(self._deps[self._check(p)])

    def dependents(self, p: Predicate) -> frozenset[Predicate]:
        return frozenset(self._dependents[self._check(p)])

    def tdeps(self, p: Predicate) -> frozenset[Predicate]:
        p = self._check(p)
        got = self._tdeps.get(p)
        if got is None:
            got = frozenset(_closure([p], self._deps, include_start=False))
            self._tdeps[p] = got
        return got

    def tdependents(self, p: Predicate) -> frozenset[Predicate]:
        p = self._check(p)
        return frozenset(_closure([p], self._dependents, include_start=False))

    def cone(self, p: Predicate) -> frozenset[Predicate]:
        """``p`` together with everything it transitively depends on."""
        return self.tdeps(p) | {self._check(p)}

    def siblings(self, p: Predicate) -> frozenset[Predicate]:
        p = self._check(p)
        out: set[Predicate] = set()
        for c in self.clauses:
            preds = c.body_preds
            n = preds.count(p)
            if n == 0:
                continue
            if n > 1:
                out.add(p)
            out.update(q for q in preds if q != p)
        return frozenset(out)

    # classification --------------------------------------------------------
    def is_recursion_free(self) -> bool:
        return all(p not in self.tdeps(p) for p in self.preds)

    def is_linear(self) -> bool:
        return all(len(c.body) <= 1 for c in self.clauses)

    def is_body_disjoint(self) -> bool:
        seen: set[Predicate] = set()
        for c in self.clauses:
            for q in c.body_preds:
                if q in seen:
                    return False
                seen.add(q)
        return True

    def is_cdd(self) -> bool:
        if not self.is_recursion_free():
            return False
        for c in self.clauses:
            preds = c.body_preds
            if len(set(preds)) != len(preds):
                return False
            cones = [self.cone(q) for q in preds]
            for i in range(len(cones)):
                for j in range(i + 1, len(cones)):
                    if cones[i] & cones[j]:
                        return False
        return True

    def classify(self) -> frozenset[str]:
        if self._labels is None:
            labels = set()
            if self.is_recursion_free():
                labels.add(RECURSION_FREE)
            if self.is_linear():
                labels.add(LINEAR)
            if self.is_body_disjoint():
                labels.add(BODY_DISJOINT)
            if self.is_cdd():
                labels.add(CDD)
            self._labels = frozenset(labels)
        return self._labels

    def topo_order(self) -> list[Predicate]:
        """Dependencies first; ties broken by predicate name."""
        missing = {p: len(self._deps[p]) for p in self.preds}
        ready = [(p.name, p) for p in self.preds if missing[p] == 0]
        heapq.heapify(ready)
        out = []
        while ready:
            _, p = heapq.heappop(ready)
            out.append(p)
            for q in sorted(self._dependents[p]):
                missing[q] -= 1
                if missing[q] == 0:
                    heapq.heappush(ready, (q.name, q))
        if len(out) != len(self.preds):
            raise NotRecursionFree("dependency graph has a cycle")
        return out

    def sccs(self) -> list[list[Predicate]]:
        """Strongly connected components, dependencies before dependents."""
        index: dict[Predicate, int] = {}
        low: dict[Predicate, int] = {}
        on_stack: set[Predicate] = set()
        stack: list[Predicate] = []
        out: list[list[Predicate]] = []
        counter = [0]

        for root in self.preds:
            if root in index:
                continue
            work = [(root, iter(sorted(self._deps[root])))]
            index[root] = low[root] = counter[0]
            counter[0] += 1
            stack.append(root)
            on_stack.add(root)
            while work:
                v, it = work[-1]
                advanced = False
                for w in it:
                    if w not in index:
                        index[w] = low[w] = counter[0]
                        counter[0] += 1
                        stack.append(w)
                        on_stack.add(w)
                        work.append((w, iter(sorted(self._deps[w]))))
                        advanced = True
                        break
                    if w in on_stack:
                        low[v] = min(low[v], index[w])
                if advanced:
                    continue
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.append(w)
                        if w == v:
                            break
                    out.append(sorted(comp))
        return out

    def to_dot(self) -> str:
        """Dependency hypergraph in Graphviz DOT syntax."""
        lines = ["digraph chc {", '  bot [label="false", shape=box];']
        for p in self.preds:
            lines.append(f'  "{p.name}";')
        for c in self.clauses:
            node = f"c{c.id}"
            lines.append(f'  {node} [label="{c.id}", shape=point];')
            for b in c.body:
                lines.append(f'  "{b.pred.name}" -> {node} [arrowhead=none];')
            target = "bot" if c.head is None else f'"{c.head.pred.name}"'
            label = c.constraint.key.replace('"', '\\"')
            lines.append(f'  {node} -> {target} [label="({c.id}) {label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _closure(start: Iterable[Predicate], edges: dict, include_start: bool) -> set[Predicate]:
    out: set[Predicate] = set(start) if include_start else set()
    todo = list(start)
    while todo:
        p = todo.pop()
        for q in edges.get(p, ()):
            if q not in out:
                out.add(q)
                todo.append(q)
    return out


def deps(s: System, p: Predicate) -> frozenset[Predicate]:
    return s.deps(p)


def tdeps(s: System, p: Predicate) -> frozenset[Predicate]:
    return s.tdeps(p)


def siblings(s: System, p: Predicate) -> frozenset[Predicate]:
    return s.siblings(p)


def is_recursion_free(s: System) -> bool:
    return s.is_recursion_free()


def classify(s: System) -> frozenset[str]:
    return s.classify()


def topo_order(s: System) -> list[Predicate]:
    return s.topo_order()


def format_labels(labels: Iterable[str]) -> str:
    labels = set(labels)
    return " ".join(lab for lab in LABELS if lab in labels)


def merge_queries(clauses: list[Clause]) -> tuple[list[Clause], list[Predicate]]:
    """Rewrite several query clauses into one via a fresh 0-ary predicate."""
    queries = [c for c in clauses if c.is_query]
    if not queries:
        raise NoQuery("no query clause (a clause with head false)")
    if len(queries) == 1:
        return clauses, []
    names = {c.head.pred.name for c in clauses if c.head is not None}
    names |= {b.pred.name for c in clauses for b in c.body}
    name = QUERY_MERGE_NAME
    k = 0
    while name in names:
        k += 1
        name = f"{QUERY_MERGE_NAME}{k}"
    bad = Predicate.make(name, ())
    out = []
    for c in clauses:
        if c.is_query:
            out.append(Clause(c.id, PredApp(bad, ()), c.body, c.constraint))
        else:
            out.append(c)
    nid = max(c.id for c in clauses) + 1
    out.append(Clause(nid, None, (PredApp(bad, ()),), TRUE))
    return out, [bad]

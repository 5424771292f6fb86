"""Reading and writing CHC systems.

Two input formats are supported:

* the HORN fragment of SMT-LIB2 (``.smt2``): ``declare-fun`` for predicates
  and ``assert`` of universally quantified implications whose head is a
  predicate application or ``false``;
* a line-oriented native format (``.chc``) used for readable test inputs,
  one clause per line written ``head <- preds ; constraint``.

Solutions are printed as SMT-LIB ``define-fun`` blocks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from . import smtlib
from .chc import Clause, Predicate, System, build_clause, merge_queries
from .errors import ChcError, ParseError, SortError, UnsupportedFeature
from .formula import (
    BOOL,
    FALSE,
    INT,
    REAL,
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
    conj,
    disj,
    neg,
    quote_symbol,
    to_smt,
)
from .smtlib import SList, Tok, fail, head, symbol

Solution = dict  # Predicate -> Formula over the predicate's params

# ---------------------------------------------------------------------------
# SMT-LIB HORN input
# ---------------------------------------------------------------------------


@dataclass
class _RawClause:
    head: tuple[Predicate, list] | None
    body: list
    constraint: Formula
    display: tuple[str, ...] | None
    node: object


class _HornReader:
    def __init__(self):
        self.preds: dict[str, Predicate] = {}
        self.pred_order: list[str] = []
        self.global_vars: dict[str, Var] = {}
        self.raw: list[_RawClause] = []
        self.fresh_counter = 0

    # commands --------------------------------------------------------------
    def run(self, nodes: list) -> None:
        for node in nodes:
            h = head(node)
            if h is None:
                fail("expected a command", node)
            if h in ("set-logic", "set-info", "set-option", "check-sat", "exit", "get-model", "get-info", "get-proof"):
                if h == "set-logic" and len(node) > 1 and symbol(node[1]) != "HORN":
                    fail(f"unsupported logic {symbol(node[1])}", node, UnsupportedFeature)
                continue
            if h in ("push", "pop"):
                fail(f"{h} is not supported", node, UnsupportedFeature)
            elif h in ("declare-fun", "declare-rel"):
                self.declare(node, h)
            elif h == "declare-var":
                name = symbol(node[1])
                self.global_vars[name] = Var(name, smtlib.parse_sort(node[2]))
            elif h == "declare-const":
                fail("declare-const is not supported in HORN input", node, UnsupportedFeature)
            elif h == "assert":
                if len(node) != 2:
                    fail("assert expects one term", node)
                self.clause(node[1], {}, node)
            elif h == "rule":
                self.clause(node[1], dict(self.global_vars), node)
            elif h == "query":
                self.query_cmd(node)
            elif h in ("define-fun", "define-sort", "declare-datatypes", "declare-sort"):
                fail(f"{h} is not supported", node, UnsupportedFeature)
            else:
                fail(f"unknown command {h}", node)

    def declare(self, node, h: str) -> None:
        if h == "declare-fun":
            if len(node) != 4 or not isinstance(node[2], SList):
                fail("malformed declare-fun", node)
            if not (isinstance(node[3], Tok) and node[3].value == "Bool"):
                fail("only Bool-valued predicates can be declared", node, UnsupportedFeature)
        elif len(node) != 3 or not isinstance(node[2], SList):
            fail("malformed declare-rel", node)
        name = symbol(node[1])
        sorts = [smtlib.parse_sort(s) for s in node[2]]
        if name in self.preds:
            fail(f"predicate {name} declared twice", node)
        self.preds[name] = Predicate.make(name, sorts)
        self.pred_order.append(name)

    def query_cmd(self, node) -> None:
        if len(node) < 2:
            fail("malformed query", node)
        env = dict(self.global_vars)
        body_preds, constraint = self.body(node[1], env)
        self.raw.append(_RawClause(None, body_preds, constraint, None, node))

    # clauses ---------------------------------------------------------------
    def bind(self, decls, env: dict) -> dict:
        if not isinstance(decls, SList):
            fail("expected a variable list", decls)
        env = dict(env)
        for d in decls:
            if not isinstance(d, SList) or len(d) != 2:
                fail("malformed variable binding", d)
            name = symbol(d[0])
            env[name] = self.var_for(name, smtlib.parse_sort(d[1]), env)
        return env

    def var_for(self, name: str, sort: str, env: dict) -> Var:
        taken = {v for v in env.values() if isinstance(v, Var)}
        v = Var(name, sort)
        k = 0
        while v in taken:
            k += 1
            v = Var(f"{name}~{k}", sort)
        return v

    def clause(self, term, env: dict, cmd) -> None:
        while head(term) == "forall":
            if len(term) != 3:
                fail("malformed forall", term)
            env = self.bind(term[1], env)
            term = term[2]
        while head(term) == "let":
            env = self.let_env(term, env)
            term = term[2]
        h = head(term)
        premises: list = []
        while h == "=>":
            if len(term) < 3:
                fail("malformed implication", term)
            premises.extend(term[1:-1])
            term = term[-1]
            while head(term) == "forall":
                env = self.bind(term[1], env)
                term = term[2]
            h = head(term)
        if h == "not" and not premises:
            inner = term[1]
            if head(inner) == "exists":
                env = self.bind(inner[1], env)
                inner = inner[2]
            self.add_query([inner], env, cmd)
            return
        if isinstance(term, Tok) and term.value == "false":
            self.add_query(premises, env, cmd)
            return
        app = self.pred_app(term, env)
        if app is None:
            # A constraint head: B => phi becomes B /\ not phi => false.
            phi = self.translator(env).formula(term, env)
            body_preds, constraint = self.premises(premises, env)
            self.raw.append(_RawClause(None, body_preds, conj(constraint, neg(phi)), None, cmd))
            return
        pred, args, display = app
        body_preds, constraint = self.premises(premises, env)
        self.raw.append(_RawClause((pred, args), body_preds, constraint, display, cmd))

    def add_query(self, premises: list, env: dict, cmd) -> None:
        body_preds, constraint = self.premises(premises, env)
        self.raw.append(_RawClause(None, body_preds, constraint, None, cmd))

    def premises(self, premises: list, env: dict):
        preds: list = []
        parts: list[Formula] = []
        for p in premises:
            bp, c = self.body(p, env)
            preds.extend(bp)
            parts.append(c)
        return preds, conj(*parts)

    def let_env(self, node, env: dict) -> dict:
        return self.translator(env)._let_env(node, env)

    def translator(self, env: dict) -> smtlib.Translator:
        def app(name, args, node, _env):
            if name in self.preds:
                fail(f"predicate {name} used outside a conjunctive body position", node, UnsupportedFeature)
            fail(f"unknown symbol {name}", node)

        return smtlib.Translator(app=app)

    def body(self, node, env: dict) -> tuple[list, Formula]:
        """Split a body term into predicate applications and a constraint."""
        preds: list = []
        parts: list[Formula] = []
        extra: list[Formula] = []

        def walk(n, env):
            h = head(n)
            if h == "and":
                for a in n[1:]:
                    walk(a, env)
                return
            if h == "let":
                walk(n[2], self.let_env(n, env))
                return
            if h == "exists":
                walk(n[2], self.bind(n[1], env))
                return
            app = self.pred_app(n, env, extra)
            if app is not None:
                preds.append((app[0], app[1]))
                return
            parts.append(self.translator(env).formula(n, env))

        walk(node, env)
        return preds, conj(*parts, *extra)

    def pred_app(self, node, env: dict, extra: list | None = None):
        """``(pred, args, display)`` when ``node`` applies a declared predicate."""
        if isinstance(node, Tok):
            if node.value in self.preds and node.value not in env:
                p = self.preds[node.value]
                if p.arity:
                    fail(f"{p.name} expects {p.arity} arguments", node)
                return p, [], ()
            return None
        h = head(node)
        if h is None or h not in self.preds or h in env:
            return None
        p = self.preds[h]
        args_nodes = node[1:]
        if len(args_nodes) != p.arity:
            fail(f"{p.name} expects {p.arity} arguments, got {len(args_nodes)}", node)
        tr = self.translator(env)
        args: list = []
        side: list[Formula] = []
        for a, param in zip(args_nodes, p.params):
            if param.sort == BOOL:
                if tr.sort_of(a, env) != BOOL:
                    fail(f"argument of {p.name} must be Bool", a, SortError)
                args.append(tr.formula(a, env))
                continue
            if tr.sort_of(a, env) == BOOL:
                fail(f"argument of {p.name} must be numeric", a, SortError)
            alts = tr.arith(a, env)
            if len(alts) == 1 and alts[0][0] == TRUE:
                args.append(alts[0][1])
            else:
                self.fresh_counter += 1
                v = Var(f"_ite{self.fresh_counter}", param.sort)
                side.append(disj(*(conj(g, atom(Lin.var(v), "=", l)) for g, l in alts)))
                args.append(Lin.var(v))
        if side:
            if extra is None:
                fail("conditional terms are not supported in clause heads", node, UnsupportedFeature)
            extra.extend(side)
        display = None
        names = [a.value for a in args_nodes if isinstance(a, Tok)]
        if len(names) == p.arity and len(set(names)) == p.arity and all(isinstance(env.get(n), Var) for n in names):
            display = tuple(names)
        return p, args, display

    def system(self) -> System:
        if not self.raw:
            from .errors import NoQuery

            raise NoQuery("input contains no clauses")
        display: dict[str, tuple[str, ...]] = {}
        for r in self.raw:
            if r.head is not None and r.display and r.head[0].name not in display:
                display[r.head[0].name] = r.display
        preds = {}
        for name in self.pred_order:
            p = self.preds[name]
            preds[name] = Predicate(p.name, p.params, display.get(name))
        clauses: list[Clause] = []
        for i, r in enumerate(self.raw, start=1):
            h = (preds[r.head[0].name], r.head[1]) if r.head is not None else None
            body = [(preds[p.name], args) for p, args in r.body]
            try:
                clauses.append(build_clause(i, h, body, r.constraint))
            except ParseError:
                raise
            except ChcError as e:
                line, col = smtlib.pos(r.node)
                raise ParseError(str(e), line, col) from e
        clauses, extra = merge_queries(clauses)
        return System(clauses, list(preds.values()) + extra)


def parse_horn(text: str | bytes) -> System:
    """Parse an SMT-LIB2 HORN script into a normalised system."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    reader = _HornReader()
    reader.run(smtlib.read(text))
    return reader.system()


# ---------------------------------------------------------------------------
# SMT-LIB HORN output
# ---------------------------------------------------------------------------


def _app_smt(name: str, args) -> str:
    if not args:
        return quote_symbol(name)
    return f"({quote_symbol(name)} {' '.join(quote_symbol(a.name) for a in args)})"


def print_horn(s: System) -> str:
    lines = ["(set-logic HORN)"]
    for p in s.preds:
        lines.append(f"(declare-fun {quote_symbol(p.name)} ({' '.join(p.sorts)}) Bool)")
    for c in s.clauses:
        vs = sorted(c.variables())
        body = [_app_smt(b.pred.name, b.args) for b in c.body]
        if c.constraint != TRUE:
            body.append(to_smt(c.constraint))
        head_s = "false" if c.head is None else _app_smt(c.head.pred.name, c.head.args)
        if not body:
            term = head_s
        else:
            b = body[0] if len(body) == 1 else f"(and {' '.join(body)})"
            term = f"(=> {b} {head_s})"
        if vs:
            decls = " ".join(f"({quote_symbol(v.name)} {v.sort})" for v in vs)
            term = f"(forall ({decls}) {term})"
        lines.append(f"(assert {term})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------


def _param_names(p: Predicate) -> list[str]:
    if p.display and len(p.display) == p.arity:
        return list(p.display)
    return [v.name for v in p.params]


def print_solution(sigma: Mapping[Predicate, Formula]) -> str:
    """One ``define-fun`` per predicate, ordered by predicate name."""
    out = []
    for p in sorted(sigma):
        names = _param_names(p)
        ren = dict(zip(p.params, names))
        params = " ".join(f"({quote_symbol(n)} {v.sort})" for n, v in zip(names, p.params))
        out.append(f"(define-fun {quote_symbol(p.name)} ({params}) Bool {to_smt(sigma[p], ren)})")
    return "".join(line + "\n" for line in out)


def parse_solution(text: str | bytes, s: System) -> Solution:
    """Read ``define-fun`` entries back into a solution for ``s``."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    nodes = smtlib.read(text)
    flat = []
    for n in nodes:
        if isinstance(n, Tok) and n.value in ("sat", "unsat", "unknown"):
            continue
        if head(n) == "model":
            flat.extend(n[1:])
        elif isinstance(n, SList) and n and isinstance(n[0], SList):
            flat.extend(n)
        else:
            flat.append(n)
    sigma: Solution = {}
    for d in flat:
        if head(d) != "define-fun" or len(d) != 5:
            fail("expected (define-fun name (params) Bool body)", d)
        p = s.pred(symbol(d[1]))
        if not isinstance(d[2], SList) or len(d[2]) != p.arity:
            fail(f"wrong parameter list for {p.name}", d)
        env: dict = {}
        for decl, param in zip(d[2], p.params):
            if not isinstance(decl, SList) or len(decl) != 2:
                fail("malformed parameter", decl)
            if smtlib.parse_sort(decl[1]) != param.sort:
                fail(f"parameter sort mismatch for {p.name}", decl, SortError)
            env[symbol(decl[0])] = param
        sigma[p] = smtlib.Translator().formula(d[4], env)
    return sigma


# ---------------------------------------------------------------------------
# Native line format
# ---------------------------------------------------------------------------

_NATIVE_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<id>[A-Za-z_](?:[A-Za-z0-9_'@#.$]|!(?!=))*)|(?P<op><=|>=|==|!=|<-|[-+*/()<>=,;&|!]))"
)


def _lex(text: str, line: int) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _NATIVE_TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos + 1)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    return out


class _NativeLine:
    """Recursive-descent parser for one native clause line."""

    def __init__(self, toks, line: int, sorts: dict[str, str], default_sort: str, preds: dict[str, Predicate]):
        self.toks = toks
        self.i = 0
        self.line = line
        self.sorts = sorts
        self.default_sort = default_sort
        self.preds = preds

    def peek(self, k: int = 0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else (None, None, 0)

    def take(self, value: str | None = None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            self.error(f"expected {value!r}" if value else "unexpected end of line")
        self.i += 1
        return tok

    def error(self, msg: str):
        col = self.peek()[2] or (self.toks[-1][2] if self.toks else 1)
        raise ParseError(msg, self.line, col)

    def var(self, name: str) -> Var:
        return Var(name, self.sorts.get(name, self.default_sort))

    # formulas
    def formula(self) -> Formula:
        parts = [self.conjunction()]
        while self.peek()[1] in ("or", "|"):
            self.take()
            if self.peek()[1] == "|":
                self.take()
            parts.append(self.conjunction())
        return disj(*parts)

    def conjunction(self) -> Formula:
        parts = [self.unary()]
        while self.peek()[1] in ("and", "&"):
            self.take()
            if self.peek()[1] == "&":
                self.take()
            parts.append(self.unary())
        return conj(*parts)

    def unary(self) -> Formula:
        kind, val, _ = self.peek()
        if val in ("not", "!"):
            self.take()
            return neg(self.unary())
        if val == "true":
            self.take()
            return TRUE
        if val == "false":
            self.take()
            return FALSE
        if val == "(":
            save = self.i
            self.take()
            try:
                f = self.formula()
                self.take(")")
                if self.peek()[1] not in ("<", "<=", "=", "==", "!=", ">=", ">", "+", "-", "*"):
                    return f
            except ParseError:
                pass
            self.i = save
        lhs = self.term()
        op = self.peek()[1]
        if op not in ("<", "<=", "=", "==", "!=", ">=", ">"):
            self.error("expected a comparison")
        self.take()
        rhs = self.term()
        if op == "!=":
            return neg(atom(lhs, "=", rhs))
        return atom(lhs, "=" if op == "==" else op, rhs)

    def term(self) -> Lin:
        acc = self.product()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.product()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def product(self) -> Lin:
        acc = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.factor()
            try:
                if op == "*":
                    acc = acc * rhs
                else:
                    if not rhs.is_const or rhs.const == 0:
                        self.error("division by a non-constant")
                    acc = acc * (1 / rhs.const)
            except ChcError as e:
                self.error(str(e))
        return acc

    def factor(self) -> Lin:
        kind, val, _ = self.peek()
        if val == "-":
            self.take()
            return -self.factor()
        if val == "(":
            self.take()
            t = self.term()
            self.take(")")
            return t
        if kind == "num":
            self.take()
            return Lin.constant(Fraction(val))
        if kind == "id":
            self.take()
            return Lin.var(self.var(val))
        self.error("expected a term")

    # clause parts
    def app(self) -> tuple[str, list]:
        kind, name, _ = self.take()
        if kind != "id":
            self.error("expected a predicate name")
        args: list = []
        if self.peek()[1] == "(":
            self.take()
            if self.peek()[1] != ")":
                args.append(self.term())
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.term())
            self.take(")")
        return name, args


def parse_chc(text: str | bytes) -> System:
    """Parse the native format.

    Lines::

        # comment
        default-sort Real
        decl P(Int, Real)
        var x Real
        P(x, y) <- Q(x), R(y) ; x <= y and y < 3
        false <- P(x, y) ; x > y
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    default_sort = INT
    decls: dict[str, list[str]] = {}
    order: list[str] = []
    sorts: dict[str, str] = {}
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("default-sort"):
            default_sort = line.split()[1]
            if default_sort not in (INT, REAL):
                raise ParseError(f"unsupported sort {default_sort}", lineno, 1)
            continue
        if line.startswith("var "):
            parts = line.split()
            if len(parts) != 3 or parts[2] not in (INT, REAL, BOOL):
                raise ParseError("expected: var NAME SORT", lineno, 1)
            sorts[parts[1]] = parts[2]
            continue
        if line.startswith("decl "):
            m = re.match(r"decl\s+([A-Za-z_][A-Za-z0-9_'!@#.$]*)\s*\(([^)]*)\)\s*$", line)
            if not m:
                raise ParseError("expected: decl NAME(SORT, ...)", lineno, 1)
            ss = [x.strip() for x in m.group(2).split(",") if x.strip()]
            for x in ss:
                if x not in (INT, REAL, BOOL):
                    raise ParseError(f"unsupported sort {x}", lineno, 1)
            decls[m.group(1)] = ss
            order.append(m.group(1))
            continue
        entries.append((lineno, _lex(line, lineno)))
    preds: dict[str, Predicate] = {}
    parsed = []
    for lineno, toks in entries:
        p = _NativeLine(toks, lineno, sorts, default_sort, preds)
        head_name, head_args = p.app()
        p.take("<-")
        body = []
        if p.peek()[1] not in (";", None):
            body.append(p.app())
            while p.peek()[1] == ",":
                p.take()
                body.append(p.app())
        constraint = TRUE
        if p.peek()[1] == ";":
            p.take()
            if p.peek()[0] is not None:
                constraint = p.formula()
        if p.peek()[0] is not None:
            p.error("trailing input")
        parsed.append((lineno, head_name, head_args, body, constraint))
        for name, args in ([(head_name, head_args)] if head_name != "false" else []) + body:
            if name not in preds:
                ss = decls.get(name, [default_sort] * len(args))
                preds[name] = Predicate.make(name, ss)
                if name not in order:
                    order.append(name)
    for name in order:
        if name not in preds and name in decls:
            preds[name] = Predicate.make(name, decls[name])
    display: dict[str, tuple] = {}
    clauses = []
    for i, (lineno, head_name, head_args, body, constraint) in enumerate(parsed, start=1):
        try:
            if head_name == "false":
                if head_args:
                    raise ParseError("false takes no arguments", lineno, 1)
                h = None
            else:
                hp = preds[head_name]
                h = (hp, head_args)
                names = [a.as_var() for a in head_args]
                if head_name not in display and all(names) and len(set(names)) == len(names):
                    display[head_name] = tuple(v.name for v in names)
            clauses.append(build_clause(i, h, [(preds[n], a) for n, a in body], constraint))
        except ParseError:
            raise
        except ChcError as e:
            raise ParseError(str(e), lineno, 1) from e
    final = {n: Predicate(p.name, p.params, display.get(n)) for n, p in preds.items()}

    def swap(c: Clause) -> Clause:
        from .chc import PredApp

        h = PredApp(final[c.head.pred.name], c.head.args) if c.head is not None else None
        b = tuple(PredApp(final[x.pred.name], x.args) for x in c.body)
        return Clause(c.id, h, b, c.constraint)

    clauses, extra = merge_queries([swap(c) for c in clauses])
    return System(clauses, list(final.values()) + extra)


def _infix_lin(terms, const) -> str:
    parts = []
    for v, c in terms:
        mag = abs(c)
        coef = "" if mag == 1 else f"{_num(mag)}*"
        sign = "-" if c < 0 else "+"
        parts.append((sign, f"{coef}{v.name}"))
    if const or not parts:
        parts.append(("-" if const < 0 else "+", _num(abs(const))))
    s = ""
    for i, (sign, body) in enumerate(parts):
        if i == 0:
            s = body if sign == "+" else f"-{body}"
        else:
            s += f" {sign} {body}"
    return s


def _num(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"({x.numerator}/{x.denominator})"


def to_infix(f: Formula) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, BoolVar):
        raise UnsupportedFeature("Bool variables cannot be written in the native format")
    if isinstance(f, Atom):
        op = "==" if f.op == "=" else f.op
        return f"{_infix_lin(f.terms, Fraction(0))} {op} {_num(f.const) if f.const >= 0 else '-' + _num(-f.const)}"
    if isinstance(f, Not):
        return f"not ({to_infix(f.arg)})"
    sep = " and " if isinstance(f, And) else " or "
    return sep.join(f"({to_infix(a)})" for a in f.args)


def print_chc(s: System) -> str:
    lines = []
    for p in s.preds:
        lines.append(f"decl {p.name}({', '.join(p.sorts)})")
    for c in s.clauses:
        for v in sorted(c.variables()):
            lines.append(f"var {v.name} {v.sort}")
    seen = set()
    out = []
    for ln in lines:
        if ln not in seen:
            seen.add(ln)
            out.append(ln)

    def app(a) -> str:
        return f"{a.pred.name}({', '.join(x.name for x in a.args)})"

    for c in s.clauses:
        h = "false" if c.head is None else app(c.head)
        body = ", ".join(app(b) for b in c.body)
        out.append(f"{h} <- {body} ; {to_infix(c.constraint)}".replace(" <-  ;", " <- ;"))
    return "\n".join(out) + "\n"


def load(path: str) -> System:
    """Read a system from ``.smt2`` or ``.chc`` depending on the extension."""
    with open(path, "rb") as fh:
        data = fh.read()
    if path.endswith(".chc"):
        return parse_chc(data)
    return parse_horn(data)

"""S-expression reader and SMT-LIB term translation.

Terms are translated directly into :mod:`cddhorn.formula` objects.  Arithmetic
``ite`` (and ``abs``) are removed by case splitting: an arithmetic term
becomes a list of ``(guard, Lin)`` alternatives whose guards partition the
space.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Callable, Iterator

from .errors import ParseError, SortError, UnsupportedFeature
from .formula import (
    BOOL,
    FALSE,
    INT,
    REAL,
    TRUE,
    Formula,
    Lin,
    Var,
    atom,
    boolvar,
    conj,
    disj,
    iff,
    implies,
    neg,
)


@dataclass(frozen=True)
class Tok:
    value: str
    line: int
    col: int
    quoted: bool = False
    string: bool = False


class SList(list):
    line: int = 0
    col: int = 0


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>;[^\n]*)
  | (?P<lp>\()
  | (?P<rp>\))
  | (?P<quoted>\|[^|]*\|)
  | (?P<string>"(?:[^"]|"")*")
  | (?P<atom>[^\s()|";]+)
""",
    re.VERBOSE,
)


def tokenize(text: str) -> Iterator[tuple[str, str, int, int]]:
    line, start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        val = m.group()
        if kind in ("quoted", "string"):
            nls = val.count("\n")
            if nls:
                yield kind, val, line, col
                line += nls
                start = m.start() + val.rfind("\n") + 1
                pos = m.end()
                continue
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            yield kind, val, line, col
        pos = m.end()


def read(text: str) -> list:
    """Parse a whole document into a list of nodes (``Tok`` or ``SList``)."""
    stack: list[SList] = []
    top: list = []
    for kind, val, line, col in tokenize(text):
        if kind == "lp":
            node = SList()
            node.line, node.col = line, col
            stack.append(node)
        elif kind == "rp":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            node = stack.pop()
            (stack[-1] if stack else top).append(node)
        else:
            if kind == "quoted":
                tok = Tok(val[1:-1], line, col, quoted=True)
            elif kind == "string":
                tok = Tok(val[1:-1].replace('""', '"'), line, col, string=True)
            else:
                tok = Tok(val, line, col)
            (stack[-1] if stack else top).append(tok)
    if stack:
        raise ParseError("unbalanced '('", stack[-1].line, stack[-1].col)
    return top


def pos(node) -> tuple[int, int]:
    return (getattr(node, "line", 0), getattr(node, "col", 0))


def fail(msg: str, node, cls=ParseError):
    line, col = pos(node)
    if issubclass(cls, ParseError):
        raise cls(msg, line, col)
    raise cls(f"{line}:{col}: {msg}" if line else msg)


def head(node) -> str | None:
    if isinstance(node, SList) and node and isinstance(node[0], Tok) and not node[0].quoted:
        return node[0].value
    return None


def symbol(node) -> str:
    if not isinstance(node, Tok) or node.string:
        fail("expected a symbol", node)
    return node.value


# A leading minus is not standard SMT-LIB but several solvers print it.
_NUMERAL = re.compile(r"^-?[0-9]+$")
_DECIMAL = re.compile(r"^-?[0-9]+\.[0-9]+$")


def parse_sort(node) -> str:
    if isinstance(node, Tok) and node.value in (INT, REAL, BOOL):
        return node.value
    fail(f"unsupported sort {render(node)}", node, UnsupportedFeature)


def render(node) -> str:
    if isinstance(node, Tok):
        return f"|{node.value}|" if node.quoted else node.value
    return "(" + " ".join(render(n) for n in node) + ")"


def literal(node) -> Fraction | None:
    """Numeric literal value (numerals, decimals, negation, division)."""
    if isinstance(node, Tok):
        if node.quoted or node.string:
            return None
        if _NUMERAL.match(node.value):
            return Fraction(int(node.value))
        if _DECIMAL.match(node.value):
            return Fraction(Decimal(node.value))
        return None
    h = head(node)
    if h == "-" and len(node) == 2:
        v = literal(node[1])
        return -v if v is not None else None
    if h == "/" and len(node) == 3:
        a, b = literal(node[1]), literal(node[2])
        if a is not None and b:
            return a / b
    if h == "to_real" and len(node) == 2:
        return literal(node[1])
    return None


Alts = list  # list[tuple[Formula, Lin]]

_ARITH_OPS = {"+", "-", "*", "/", "to_real", "ite", "abs"}
_BOOL_OPS = {"and", "or", "not", "=>", "xor", "=", "distinct", "<", "<=", ">", ">=", "ite", "true", "false"}
_UNSUPPORTED = {"div", "mod", "to_int", "is_int", "select", "store", "forall", "exists"}

AppHook = Callable[[str, list, SList, dict], Formula]


class Translator:
    """Translate SMT-LIB terms under an environment of bound names.

    ``env`` maps names to a ``Var``, a ``Formula`` (let-bound Bool) or an
    alternatives list (let-bound arithmetic).  ``app`` handles applications
    of uninterpreted symbols (for example predicate applications).
    """

    def __init__(self, app: AppHook | None = None, fresh: Callable[[str, str], Var] | None = None):
        self.app = app
        self.fresh = fresh

    # sorts -----------------------------------------------------------------
    def sort_of(self, node, env: dict) -> str:
        if isinstance(node, Tok):
            if not node.quoted and node.value in ("true", "false"):
                return BOOL
            if not node.quoted and _NUMERAL.match(node.value):
                return INT
            if not node.quoted and _DECIMAL.match(node.value):
                return REAL
            b = env.get(node.value)
            if b is None:
                if self.app is not None:
                    return BOOL
                fail(f"unknown symbol {node.value}", node)
            if isinstance(b, Var):
                return b.sort
            if isinstance(b, Formula):
                return BOOL
            return b[1]
        h = head(node)
        if h is None:
            fail("unsupported term", node, UnsupportedFeature)
        if h in _UNSUPPORTED:
            fail(f"unsupported operator {h}", node, UnsupportedFeature)
        if h == "let":
            if len(node) != 3 or not isinstance(node[1], SList):
                fail("malformed let", node)
            new = dict(env)
            for b in node[1]:
                if not isinstance(b, SList) or len(b) != 2:
                    fail("malformed let binding", b)
                srt = self.sort_of(b[1], env)
                new[symbol(b[0])] = TRUE if srt == BOOL else ([], srt)
            return self.sort_of(node[2], new)
        if h == "ite":
            return self.sort_of(node[2], env)
        if h in ("/", "to_real"):
            return REAL
        if h in ("+", "-", "*", "abs"):
            sorts = {self.sort_of(a, env) for a in node[1:]}
            if BOOL in sorts:
                fail(f"Bool argument to {h}", node, SortError)
            return REAL if REAL in sorts else INT
        if h in _BOOL_OPS:
            return BOOL
        return BOOL

    def _let_env(self, node, env: dict) -> dict:
        if len(node) != 3 or not isinstance(node[1], SList):
            fail("malformed let", node)
        new = dict(env)
        for b in node[1]:
            if not isinstance(b, SList) or len(b) != 2:
                fail("malformed let binding", b)
            name = symbol(b[0])
            if self.sort_of(b[1], env) == BOOL:
                new[name] = self.formula(b[1], env)
            else:
                alts = self.arith(b[1], env)
                new[name] = (alts, self.sort_of(b[1], env))
        return new

    # booleans --------------------------------------------------------------
    def formula(self, node, env: dict) -> Formula:
        if isinstance(node, Tok):
            if not node.quoted and node.value == "true":
                return TRUE
            if not node.quoted and node.value == "false":
                return FALSE
            b = env.get(node.value)
            if isinstance(b, Formula):
                return b
            if isinstance(b, Var):
                if b.sort != BOOL:
                    fail(f"{node.value} is not Bool", node, SortError)
                return boolvar(b)
            if b is None and self.app is not None:
                return self.app(node.value, [], node, env)
            fail(f"expected a Bool term, got {render(node)}", node, SortError)
        h = head(node)
        if h is None:
            fail("unsupported term", node, UnsupportedFeature)
        args = node[1:]
        if h == "let":
            return self.formula(node[2], self._let_env(node, env))
        if h == "and":
            return conj(*(self.formula(a, env) for a in args))
        if h == "or":
            return disj(*(self.formula(a, env) for a in args))
        if h == "not":
            self._arity(node, 1)
            return neg(self.formula(args[0], env))
        if h == "=>":
            fs = [self.formula(a, env) for a in args]
            out = fs[-1]
            for f in reversed(fs[:-1]):
                out = implies(f, out)
            return out
        if h == "xor":
            fs = [self.formula(a, env) for a in args]
            out = fs[0]
            for f in fs[1:]:
                out = neg(iff(out, f))
            return out
        if h == "ite" and self.sort_of(node, env) == BOOL:
            self._arity(node, 3)
            c, t, e = (self.formula(a, env) for a in args)
            return disj(conj(c, t), conj(neg(c), e))
        if h in ("=", "distinct"):
            if len(args) < 2:
                fail(f"{h} needs two arguments", node)
            if self.sort_of(args[0], env) == BOOL:
                fs = [self.formula(a, env) for a in args]
                if h == "=":
                    return conj(*(iff(a, b) for a, b in zip(fs, fs[1:])))
                if len(fs) > 2:
                    return FALSE
                return neg(iff(fs[0], fs[1]))
            alts = [self.arith(a, env) for a in args]
            if h == "=":
                return conj(*(self._compare(a, "=", b) for a, b in zip(alts, alts[1:])))
            return conj(
                *(neg(self._compare(alts[i], "=", alts[j])) for i in range(len(alts)) for j in range(i + 1, len(alts)))
            )
        if h in ("<", "<=", ">", ">="):
            if len(args) < 2:
                fail(f"{h} needs two arguments", node)
            alts = [self.arith(a, env) for a in args]
            return conj(*(self._compare(a, h, b) for a, b in zip(alts, alts[1:])))
        if h in _UNSUPPORTED:
            fail(f"unsupported operator {h}", node, UnsupportedFeature)
        if h in _ARITH_OPS or h in ("true", "false"):
            fail(f"expected a Bool term, got {render(node)}", node, SortError)
        if self.app is not None:
            return self.app(h, list(args), node, env)
        fail(f"unknown function {h}", node)

    def _arity(self, node, n: int) -> None:
        if len(node) != n + 1:
            fail(f"{head(node)} expects {n} argument(s)", node)

    @staticmethod
    def _compare(a: Alts, op: str, b: Alts) -> Formula:
        out = []
        for ga, la in a:
            for gb, lb in b:
                out.append(conj(ga, gb, atom(la, op, lb)))
        return disj(*out)

    # arithmetic ------------------------------------------------------------
    def arith(self, node, env: dict) -> Alts:
        v = literal(node)
        if v is not None:
            return [(TRUE, Lin.constant(v))]
        if isinstance(node, Tok):
            b = env.get(node.value)
            if isinstance(b, Var):
                if b.sort == BOOL:
                    fail(f"{node.value} is Bool, expected a number", node, SortError)
                return [(TRUE, Lin.var(b))]
            if isinstance(b, tuple):
                return b[0]
            if b is None:
                fail(f"unknown symbol {node.value}", node)
            fail(f"{node.value} is Bool, expected a number", node, SortError)
        h = head(node)
        args = node[1:]
        if h == "let":
            return self.arith(node[2], self._let_env(node, env))
        if h == "to_real":
            self._arity(node, 1)
            return self.arith(args[0], env)
        if h == "+":
            return self._fold(args, env, lambda x, y: x + y)
        if h == "-":
            if len(args) == 1:
                return [(g, -l) for g, l in self.arith(args[0], env)]
            return self._fold(args, env, lambda x, y: x - y)
        if h == "*":
            return self._fold(args, env, lambda x, y: x * y, node)
        if h == "/":
            if len(args) != 2:
                fail("/ expects 2 arguments", node)
            d = literal(args[1])
            if not d:
                fail("division by a non-constant or zero", node, UnsupportedFeature)
            return [(g, l * (1 / d)) for g, l in self.arith(args[0], env)]
        if h == "ite":
            self._arity(node, 3)
            c = self.formula(args[0], env)
            t = self.arith(args[1], env)
            e = self.arith(args[2], env)
            return self._merge([(conj(c, g), l) for g, l in t] + [(conj(neg(c), g), l) for g, l in e])
        if h == "abs":
            self._arity(node, 1)
            out = []
            for g, l in self.arith(args[0], env):
                out.append((conj(g, atom(l, ">=", 0)), l))
                out.append((conj(g, atom(l, "<", 0)), -l))
            return self._merge(out)
        if h in _UNSUPPORTED:
            fail(f"unsupported operator {h}", node, UnsupportedFeature)
        if h in _BOOL_OPS:
            fail(f"expected a numeric term, got {render(node)}", node, SortError)
        fail(f"unsupported function {h}", node, UnsupportedFeature)

    @staticmethod
    def _merge(alts: Alts) -> Alts:
        return [(g, l) for g, l in alts if g != FALSE]

    def _fold(self, args, env, fn, node=None) -> Alts:
        from .errors import NonLinear

        acc = self.arith(args[0], env)
        for a in args[1:]:
            nxt = self.arith(a, env)
            combined = []
            for ga, la in acc:
                for gb, lb in nxt:
                    try:
                        combined.append((conj(ga, gb), fn(la, lb)))
                    except NonLinear as e:
                        fail(str(e), node if node is not None else a, NonLinear)
            acc = self._merge(combined)
        return acc


def value(node) -> object:
    """Parse a model value: Bool constant or numeric literal."""
    if isinstance(node, Tok) and node.value in ("true", "false"):
        return node.value == "true"
    v = literal(node)
    if v is None:
        fail(f"unsupported model value {render(node)}", node, UnsupportedFeature)
    return v

"""Craig interpolation for linear arithmetic with booleans.

``itp(pre, post, shared)`` returns an :class:`Interpolant` ``I`` with
``pre |= I``, ``I and post`` unsatisfiable and ``vocab(I)`` inside ``shared``,
a :class:`MutuallySat` carrying a model of ``pre and post``, or
:class:`Unknown`.

The builtin backend projects ``pre`` onto the common vocabulary (which yields
the strongest interpolant over the rationals) and then, unless disabled,
generalises it by dropping variables and literals while ``I and post`` stays
unsatisfiable.  The external backend drives an SMT solver through a
subprocess.
"""

from __future__ import annotations

import logging
import os
import shlex
import subprocess
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import smtlib
from .errors import BackendError, ChcError, ResourceExhausted
from .formula import (
    BOOL,
    INT,
    REAL,
    TRUE,
    And,
    Atom,
    Formula,
    Or,
    Var,
    atom,
    conj,
    disj,
    quote_symbol,
    to_smt,
    vocab,
)
from .sat import Sat, check_sat, drop_subsumed, entails, is_sat, project

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 30_000
EXTERNAL_CMD_ENV = "CDD_CHC_EXTERNAL_CMD"


@dataclass(frozen=True)
class Interpolant:
    formula: Formula


@dataclass(frozen=True)
class MutuallySat:
    model: dict = field(compare=False)


@dataclass(frozen=True)
class Unknown:
    reason: str = ""


ItpResult = Interpolant | MutuallySat | Unknown


@dataclass
class Config:
    backend: str = "builtin"
    external_cmd: str | None = None
    dialect: str = "smtinterpol"
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    generalize: bool = True

    @classmethod
    def from_mapping(cls, data: Mapping) -> "Config":
        ext = data.get("external", {}) or {}
        return cls(
            backend=data.get("backend", "builtin"),
            external_cmd=ext.get("cmd") or data.get("external_cmd"),
            dialect=ext.get("dialect") or data.get("dialect", "smtinterpol"),
            timeout_ms=int(ext.get("timeout_ms") or data.get("timeout_ms", DEFAULT_TIMEOUT_MS)),
            generalize=bool(data.get("generalize", True)),
        )


def check_interpolant(pre: Formula, post: Formula, shared: Iterable[Var], itp_formula: Formula) -> bool:
    """Independent check of the three interpolant conditions."""
    if not vocab(itp_formula) <= frozenset(shared):
        return False
    if not entails(pre, itp_formula):
        return False
    return not is_sat(conj(itp_formula, post))


class BuiltinBackend:
    name = "builtin"

    def __init__(self, generalize: bool = True):
        self.generalize = generalize

    def interpolate(self, pre: Formula, post: Formula, shared: Iterable[Var]) -> ItpResult:
        try:
            both = check_sat(conj(pre, post))
            if isinstance(both, Sat):
                return MutuallySat(both.model)
            target = frozenset(shared) & vocab(pre) & vocab(post)
            candidate = project(pre, target)
            if is_sat(conj(candidate, post)):
                return Unknown("projection over the rationals is too weak for integer reasoning")
            if self.generalize:
                candidate = generalize(candidate, post)
            return Interpolant(candidate)
        except ResourceExhausted as e:
            return Unknown(str(e))


def _cubes_of(f: Formula) -> list[Formula]:
    return list(f.args) if isinstance(f, Or) else [f]


def _lits_of(cube: Formula) -> list[Formula]:
    return list(cube.args) if isinstance(cube, And) else [cube]


def _split_equalities(cube: Formula) -> Formula:
    out = []
    for lit in _lits_of(cube):
        if isinstance(lit, Atom) and lit.op == "=":
            out.append(atom(lit.lin, "<=", lit.const))
            out.append(atom(lit.lin, ">=", lit.const))
        else:
            out.append(lit)
    return conj(*out)


def generalize(candidate: Formula, post: Formula, max_literals: int = 48) -> Formula:
    """Weaken ``candidate`` while keeping ``candidate and post`` unsatisfiable."""

    def blocks(f: Formula) -> bool:
        return not is_sat(conj(f, post))

    if blocks(TRUE):
        return TRUE
    for v in sorted(vocab(candidate)):
        if v not in vocab(candidate):
            continue
        weaker = project(candidate, vocab(candidate) - {v})
        if weaker != candidate and blocks(weaker):
            candidate = weaker
    cubes = [_split_equalities(c) for c in _cubes_of(candidate)]
    if sum(len(_lits_of(c)) for c in cubes) > max_literals:
        return candidate
    i = 0
    while i < len(cubes):
        lits = _lits_of(cubes[i])
        j = 0
        while j < len(lits) and len(lits) > 1:
            trial_cube = conj(*(lits[:j] + lits[j + 1:]))
            trial = disj(*(cubes[:i] + [trial_cube] + cubes[i + 1:]))
            if blocks(trial):
                lits = lits[:j] + lits[j + 1:]
                cubes[i] = trial_cube
            else:
                j += 1
        i += 1
    return disj(*drop_subsumed([_merge_bounds(c) for c in cubes]))


def _merge_bounds(cube: Formula) -> Formula:
    """Turn matching ``<=``/``>=`` pairs back into an equality."""
    lits = _lits_of(cube)
    atoms = {(lit.terms, lit.op, lit.const): lit for lit in lits if isinstance(lit, Atom)}
    out = []
    for lit in lits:
        if isinstance(lit, Atom) and lit.op in ("<=", ">="):
            other = "<=" if lit.op == ">=" else ">="
            if (lit.terms, other, lit.const) in atoms:
                if lit.op == "<=":
                    out.append(atom(lit.lin, "=", lit.const))
                continue
        out.append(lit)
    return conj(*out)


def _logic(vs: Iterable[Var]) -> str:
    sorts = {v.sort for v in vs}
    if INT in sorts and REAL in sorts:
        return "QF_LIRA"
    if REAL in sorts:
        return "QF_LRA"
    return "QF_LIA"


class ExternalBackend:
    """Interpolation by an external SMT solver speaking SMT-LIB on stdin."""

    name = "external"
    DIALECTS = ("smtinterpol", "mathsat")

    def __init__(self, cmd: str | None = None, dialect: str = "smtinterpol", timeout_ms: int = DEFAULT_TIMEOUT_MS):
        cmd = cmd or os.environ.get(EXTERNAL_CMD_ENV)
        if not cmd:
            raise BackendError(f"no external solver command (set {EXTERNAL_CMD_ENV} or external.cmd)")
        if dialect not in self.DIALECTS:
            raise BackendError(f"unknown interpolation dialect {dialect!r}")
        self.cmd = cmd
        self.dialect = dialect
        self.timeout_ms = timeout_ms

    def script(self, pre: Formula, post: Formula) -> tuple[str, dict[str, Var]]:
        vs = sorted(vocab(pre) | vocab(post))
        names: dict[Var, str] = {}
        seen: dict[str, int] = {}
        for v in vs:
            n = v.name
            if n in seen:
                n = f"{v.name}!{v.sort}"
            seen[n] = 1
            names[v] = n
        lines = [
            "(set-option :produce-interpolants true)",
            "(set-option :produce-models true)",
            f"(set-logic {_logic(vs)})",
        ]
        for v in vs:
            lines.append(f"(declare-fun {quote_symbol(names[v])} () {v.sort})")
        a, b = to_smt(pre, names), to_smt(post, names)
        if self.dialect == "smtinterpol":
            lines += [f"(assert (! {a} :named A))", f"(assert (! {b} :named B))", "(check-sat)", "(get-interpolants A B)"]
        else:
            lines += [
                f"(assert (! {a} :interpolation-group g1))",
                f"(assert (! {b} :interpolation-group g2))",
                "(check-sat)",
                "(get-interpolant (g1))",
            ]
        lines += ["(get-model)", "(exit)"]
        return "\n".join(lines) + "\n", {n: v for v, n in names.items()}

    def interpolate(self, pre: Formula, post: Formula, shared: Iterable[Var]) -> ItpResult:
        text, env = self.script(pre, post)
        try:
            proc = subprocess.run(
                shlex.split(self.cmd),
                input=text,
                capture_output=True,
                text=True,
                timeout=self.timeout_ms / 1000,
            )
        except subprocess.TimeoutExpired:
            return Unknown("external solver timed out")
        except OSError as e:
            raise BackendError(f"cannot run external solver: {e}") from e
        try:
            return self.parse_output(proc.stdout, env)
        except BackendError:
            if proc.returncode != 0:
                raise BackendError(
                    f"external solver exited with {proc.returncode}: {proc.stderr.strip()[:500]}"
                ) from None
            raise

    def parse_output(self, out: str, env: dict[str, Var]) -> ItpResult:
        try:
            nodes = [n for n in smtlib.read(out) if smtlib.head(n) != "error"]
        except ChcError as e:
            raise BackendError(f"unreadable solver output: {e}") from e
        if not nodes or not isinstance(nodes[0], smtlib.Tok):
            raise BackendError("solver output has no check-sat answer")
        status, rest = nodes[0].value, nodes[1:]
        if status == "unknown":
            return Unknown("external solver answered unknown")
        if status == "sat":
            return MutuallySat(self._model(rest, env))
        if status != "unsat":
            raise BackendError(f"unexpected solver answer {status!r}")
        if not rest:
            raise BackendError("solver returned no interpolant")
        term = rest[0]
        if self.dialect == "smtinterpol":
            if not isinstance(term, smtlib.SList) or len(term) != 1:
                raise BackendError("expected a single interpolant in a list")
            term = term[0]
        try:
            return Interpolant(smtlib.Translator().formula(term, dict(env)))
        except ChcError as e:
            raise BackendError(f"cannot read interpolant: {e}") from e

    @staticmethod
    def _model(nodes: list, env: dict[str, Var]) -> dict:
        model: dict = {}
        for node in nodes:
            if not isinstance(node, smtlib.SList):
                continue
            items = node[1:] if smtlib.head(node) == "model" else node
            for d in items:
                if smtlib.head(d) != "define-fun" or len(d) != 5:
                    continue
                v = env.get(smtlib.symbol(d[1]))
                if v is not None:
                    val = smtlib.value(d[4])
                    model[v] = val
        for v in env.values():
            model.setdefault(v, False if v.sort == BOOL else 0)
        return model


class FallbackBackend:
    """Try backends in order; the first answer other than Unknown wins."""

    name = "fallback"

    def __init__(self, *backends):
        self.backends = backends

    def interpolate(self, pre: Formula, post: Formula, shared: Iterable[Var]) -> ItpResult:
        reasons = []
        for be in self.backends:
            res = be.interpolate(pre, post, shared)
            if not isinstance(res, Unknown):
                return res
            reasons.append(f"{be.name}: {res.reason}")
        return Unknown("; ".join(reasons))


def make_backend(config: Config | None = None):
    """Backend for ``config``.

    The builtin backend falls back to the external solver when a command
    is configured explicitly, so integer problems the projection cannot
    settle still get an answer.
    """
    config = config or Config()
    if config.backend == "builtin":
        builtin = BuiltinBackend(generalize=config.generalize)
        if config.external_cmd:
            return FallbackBackend(builtin, ExternalBackend(config.external_cmd, config.dialect, config.timeout_ms))
        return builtin
    if config.backend == "external":
        return ExternalBackend(config.external_cmd, config.dialect, config.timeout_ms)
    raise BackendError(f"unknown backend {config.backend!r}")


_DEFAULT = BuiltinBackend()


def itp(pre: Formula, post: Formula, shared: Iterable[Var], backend=None) -> ItpResult:
    """Interpolate ``pre`` against ``post`` over the ``shared`` variables."""
    return (backend or _DEFAULT).interpolate(pre, post, frozenset(shared))

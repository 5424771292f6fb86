import sys
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cddhorn.errors import BackendError
from cddhorn.formula import BOOL, INT, REAL, Lin, Var, atom, boolvar, conj, disj, eq, evaluate, ge, gt, le, lt, neg, vocab
from cddhorn.interpolate import (
    BuiltinBackend,
    Config,
    ExternalBackend,
    Interpolant,
    MutuallySat,
    Unknown,
    check_interpolant,
    itp,
    make_backend,
)
from cddhorn.sat import equivalent, is_sat
from cddhorn.solver import PRE_SUFFIX, post_formula, pre_formula, slots, solve_cdd, validate

x, y, z = (Var(s, INT) for s in "xyz")
FAKE = f"{sys.executable} {Path(__file__).with_name('fake_solver.py')}"


def test_pre_itself_qualifies():
    res = itp(le(x, 0), gt(x, 0), {x})
    assert isinstance(res, Interpolant)
    assert check_interpolant(le(x, 0), gt(x, 0), {x}, res.formula)


def test_mutually_sat_model():
    res = itp(eq(x, 1), eq(x, 1), {x})
    assert isinstance(res, MutuallySat)
    assert res.model[x] == 1


def l9_query(s_da):
    l4, l6, l8, l9 = (s_da.pred(n) for n in ("L4", "L6", "L8", "L9"))
    sigma = {l4: conj(), l6: ge(l6.params[0], 0), l8: lt(l8.params[0], 0)}
    keep = set(slots(l9))
    pre = pre_formula(s_da, l9, sigma)
    from cddhorn.formula import substitute

    pre = substitute(pre, {v: Var(v.name + PRE_SUFFIX, v.sort) for v in vocab(pre) if v not in keep})
    return pre, post_formula(s_da, l9, sigma), keep, l9


def test_l9_interpolant_is_abs_nonnegative(s_da):
    pre, post, keep, l9 = l9_query(s_da)
    assert not is_sat(conj(pre, post))
    res = itp(pre, post, keep)
    assert isinstance(res, Interpolant)
    assert check_interpolant(pre, post, keep, res.formula)
    assert equivalent(res.formula, ge(slots(l9)[1], 0))


def test_strongest_without_generalisation(s_da):
    pre, post, keep, l9 = l9_query(s_da)
    res = BuiltinBackend(generalize=False).interpolate(pre, post, keep)
    n, a = slots(l9)
    # Projection keeps the relation between n and abs'.
    assert equivalent(res.formula, disj(conj(ge(n, 0), eq(a, n)), conj(lt(n, 0), eq(Lin.var(a) + Lin.var(n), 0))))


def test_integer_weakness_reports_unknown():
    # exists y. x = 2y has no linear projection onto x over the integers.
    pre = eq(x, Lin.var(y) * 2)
    post = eq(x, 1)
    res = BuiltinBackend().interpolate(pre, post, {x})
    assert isinstance(res, Unknown)


def test_config_from_mapping():
    cfg = Config.from_mapping({"backend": "external", "external": {"cmd": "z", "dialect": "mathsat", "timeout_ms": 5}})
    assert (cfg.backend, cfg.external_cmd, cfg.dialect, cfg.timeout_ms) == ("external", "z", "mathsat", 5)
    assert isinstance(make_backend(Config()), BuiltinBackend)
    with pytest.raises(BackendError):
        make_backend(Config(backend="nope"))


# --- external backend through the fake solver -------------------------------


@pytest.mark.parametrize("dialect", ["smtinterpol", "mathsat"])
def test_external_interpolant(dialect):
    be = ExternalBackend(FAKE, dialect, timeout_ms=20_000)
    pre, post = conj(le(x, y), le(y, 0)), gt(x, 0)
    res = be.interpolate(pre, post, {x})
    assert isinstance(res, Interpolant)
    assert check_interpolant(pre, post, {x}, res.formula)


@pytest.mark.parametrize("dialect", ["smtinterpol", "mathsat"])
def test_external_mutually_sat(dialect):
    be = ExternalBackend(FAKE, dialect, timeout_ms=20_000)
    b = Var("p", BOOL)
    pre, post = conj(eq(x, 3), boolvar(b)), conj(ge(x, 2), boolvar(b))
    res = be.interpolate(pre, post, {x, b})
    assert isinstance(res, MutuallySat)
    assert evaluate(conj(pre, post), res.model)


def test_external_script_shape():
    be = ExternalBackend("unused", "mathsat")
    text, env = be.script(eq(x, 1), gt(Var("r", REAL), 0))
    assert "(set-logic QF_LIRA)" in text
    assert ":interpolation-group g1" in text and "(get-interpolant (g1))" in text
    assert set(env) == {"x", "r"}


def test_external_failures():
    with pytest.raises(BackendError):
        ExternalBackend(FAKE + " crash").interpolate(eq(x, 1), eq(x, 2), {x})
    with pytest.raises(BackendError):
        ExternalBackend(FAKE + " garbage").interpolate(eq(x, 1), eq(x, 2), {x})
    with pytest.raises(BackendError):
        ExternalBackend("/nonexistent/solver").interpolate(eq(x, 1), eq(x, 2), {x})
    res = ExternalBackend(FAKE + " unknown").interpolate(eq(x, 1), eq(x, 2), {x})
    assert isinstance(res, Unknown)
    res = ExternalBackend(FAKE + " sleep", timeout_ms=300).interpolate(eq(x, 1), eq(x, 2), {x})
    assert isinstance(res, Unknown)


def test_external_needs_command(monkeypatch):
    monkeypatch.delenv("CDD_CHC_EXTERNAL_CMD", raising=False)
    with pytest.raises(BackendError):
        ExternalBackend()
    monkeypatch.setenv("CDD_CHC_EXTERNAL_CMD", FAKE)
    assert ExternalBackend().cmd == FAKE


def test_solve_with_external_backend(s_da):
    sol = solve_cdd(s_da, ExternalBackend(FAKE, timeout_ms=20_000), check=True)
    assert sol is not None and validate(s_da, sol)


# --- interpolant contract on random pairs -----------------------------------

BOOLS = [Var("p", BOOL), Var("q", BOOL)]


@st.composite
def sides(draw, vs):
    cubes = []
    for _ in range(draw(st.integers(1, 3))):
        lits = []
        for _ in range(draw(st.integers(1, 3))):
            if draw(st.integers(0, 4)) == 0:
                bv = boolvar(draw(st.sampled_from(BOOLS)))
                lits.append(bv if draw(st.booleans()) else neg(bv))
                continue
            lin = Lin.constant(0)
            for v in vs:
                lin = lin + Lin.var(v) * draw(st.integers(-2, 2))
            lits.append(atom(lin, draw(st.sampled_from(["<", "<=", "=", ">=", ">"])), draw(st.integers(-3, 3))))
        cubes.append(conj(*lits))
    return disj(*cubes)


r = [Var(f"r{i}", REAL) for i in range(3)]


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(sides([r[0], r[1]]), sides([r[1], r[2]]))
def test_builtin_interpolant_contract(pre, post):
    shared = (vocab(pre) & vocab(post)) | {r[1]}
    res = itp(pre, post, shared)
    if isinstance(res, MutuallySat):
        assert evaluate(conj(pre, post), {**{v: Fraction(0) for v in r}, **{b: False for b in BOOLS}, **res.model})
    else:
        assert isinstance(res, Interpolant)
        assert check_interpolant(pre, post, shared, res.formula)


def test_fallback_to_external_on_unknown():
    from cddhorn.interpolate import FallbackBackend

    be = make_backend(Config(external_cmd=FAKE))
    assert isinstance(be, FallbackBackend)
    pre, post = eq(x, Lin.var(y) * 2), eq(x, 1)

    class Answers:
        name = "stub"

        def interpolate(self, pre, post, shared):
            return Interpolant(neg(eq(x, 1)))

    res = FallbackBackend(BuiltinBackend(), Answers()).interpolate(pre, post, {x})
    assert res == Interpolant(neg(eq(x, 1)))
    res = FallbackBackend(BuiltinBackend(), BuiltinBackend()).interpolate(pre, post, {x})
    assert isinstance(res, Unknown) and res.reason.count("builtin") == 2

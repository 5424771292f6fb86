"""Decision procedure and projection, checked against grid enumeration."""

import itertools
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from cddhorn import lra
from cddhorn.formula import INT, REAL, TRUE, Lin, Var, atom, conj, disj, eq, evaluate, ge, gt, le, lt, vocab
from cddhorn.sat import Sat, Unsat, check_sat, entails, equivalent, project

x, y, a, b = (Var(s, INT) for s in "xyab")
rx, ry, rz = (Var(s, REAL) for s in ("rx", "ry", "rz"))


def test_check_sat_trivial_unsat():
    assert isinstance(check_sat(conj(gt(x, 0), lt(x, 0))), Unsat)


def test_check_sat_integer_gap():
    # 2x = 1 has a rational solution but no integer one.
    assert isinstance(check_sat(eq(Lin.var(x) * 2, 1)), Unsat)
    r = Var("r", REAL)
    res = check_sat(eq(Lin.var(r) * 2, 1))
    assert isinstance(res, Sat) and res.model[r] == Fraction(1, 2)


def test_check_sat_model_satisfies():
    f = conj(ge(x, 3), le(Lin.var(x) + Lin.var(y), 1), disj(eq(y, -2), eq(y, -5)))
    res = check_sat(f)
    assert isinstance(res, Sat)
    assert evaluate(f, res.model)


def test_project_substitution_case():
    got = project(conj(eq(x, y), ge(y, 0)), {x})
    assert equivalent(got, ge(x, 0))


def test_project_fm_pairing():
    got = project(conj(le(a, x), le(x, b)), {a, b})
    assert equivalent(got, le(a, b))


def test_project_integer_tightening():
    # exists y. x = 2y  projected to x alone: over the integers only the
    # parity is lost, but bounds are tightened: 1 <= 2y <= 2 means y = 1.
    got = project(conj(le(1, Lin.var(y) * 2), le(Lin.var(y) * 2, 2), eq(x, Lin.var(y) * 2)), {x})
    assert equivalent(got, eq(x, 2))


def test_entails():
    assert entails(ge(x, 2), ge(x, 1))
    assert not entails(ge(x, 1), ge(x, 2))


def test_lra_tighten():
    c = lra.make({x: Fraction(2)}, "<=", 3)
    assert lra.tighten(c) == lra.make({x: Fraction(1)}, "<=", 1)


# --- grid oracle ------------------------------------------------------------

OPS = ["<", "<=", "=", ">=", ">"]


@st.composite
def cubes(draw, vs, max_atoms=5):
    k = draw(st.integers(1, max_atoms))
    atoms = []
    for _ in range(k):
        lin = Lin.constant(0)
        for v in vs:
            lin = lin + Lin.var(v) * draw(st.integers(-2, 2))
        atoms.append(atom(lin, draw(st.sampled_from(OPS)), draw(st.integers(-3, 3))))
    return conj(*atoms)


def grid(vs, values):
    for point in itertools.product(values, repeat=len(vs)):
        yield dict(zip(vs, point))


INT_GRID = [Fraction(i) for i in range(-6, 7)]
REAL_GRID = [Fraction(i, 4) for i in range(-16, 17)]


@settings(max_examples=300, deadline=None)
@given(cubes([x, y]))
def test_check_sat_agrees_with_integer_grid(f):
    res = check_sat(f)
    witness = next((m for m in grid([x, y], INT_GRID) if evaluate(f, m)), None)
    if witness is not None:
        assert isinstance(res, Sat)
    if isinstance(res, Sat):
        assert all(v.denominator == 1 for v in res.model.values())
        assert evaluate(f, res.model)


@settings(max_examples=300, deadline=None)
@given(cubes([rx, ry]))
def test_check_sat_agrees_with_rational_grid(f):
    res = check_sat(f)
    witness = next((m for m in grid([rx, ry], REAL_GRID) if evaluate(f, m)), None)
    if witness is not None:
        assert isinstance(res, Sat)
    if isinstance(res, Sat):
        assert evaluate(f, res.model)


@settings(max_examples=80, deadline=None)
@given(cubes([rx, ry, rz], max_atoms=4))
def test_project_matches_rational_grid(f):
    p = project(f, {rx, ry})
    assert vocab(p) <= {rx, ry}
    for point in grid([rx, ry], [Fraction(i, 2) for i in range(-6, 7)]):
        pinned = conj(f, eq(rx, Lin.constant(point[rx])), eq(ry, Lin.constant(point[ry])))
        exists = isinstance(check_sat(pinned), Sat)
        assert evaluate(p, point) == exists


@settings(max_examples=150, deadline=None)
@given(cubes([x, y, a], max_atoms=4))
def test_integer_projection_over_approximates(f):
    p = project(f, {x, y})
    for point in grid([x, y], INT_GRID[3:-3]):
        if any(evaluate(f, {**point, a: v}) for v in INT_GRID):
            assert evaluate(p, point)


def test_project_true_when_unconstrained():
    assert project(ge(y, 0), {x}) == TRUE

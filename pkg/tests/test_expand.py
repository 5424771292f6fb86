import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cddhorn.errors import CorrespondenceError, ExpansionBudget, IncompleteSolution, NotRecursionFree, NotShared
from cddhorn.expand import Correspondence, check_correspondence, collapse, copy_rel, expand, shared_rel
from cddhorn.formula import TRUE, conj
from cddhorn.horn_io import parse_chc, print_horn
from cddhorn.oracle import PROFILES, gen_system, nested_diamond, oracle_solvable
from cddhorn.sat import equivalent
from cddhorn.solver import solve_recursion_free, solve_cdd, validate

DUP = "P(x) <- ; x = 0\nfalse <- P(x), P(y) ; x < y"


def test_shared_rel_none_on_cdd(s_da):
    assert shared_rel(s_da) is None


def test_shared_rel_diamond(s_dd):
    c, p = shared_rel(s_dd)
    assert c.head.pred.name == "D"
    assert p.name == "A"


def test_shared_rel_duplicate_occurrence():
    s = parse_chc(DUP)
    c, p = shared_rel(s)
    assert c.is_query and p.name == "P"


def test_shared_rel_rejects_recursion(counter_unsafe):
    with pytest.raises(NotRecursionFree):
        shared_rel(counter_unsafe)
    with pytest.raises(NotRecursionFree):
        expand(counter_unsafe)


def test_copy_rel_diamond(s_dd):
    c, p = shared_rel(s_dd)
    out, made = copy_rel(s_dd, c, p)
    assert {q.name: r.name for q, r in made.items()} == {"A!1": "A"}
    assert len(out.clauses) == len(s_dd.clauses) + len(s_dd.clauses_of(p))
    body_of = {cl.head.pred.name: [b.pred.name for b in cl.body] for cl in out.clauses if cl.head}
    assert body_of["B"] == ["A"]
    assert body_of["C"] == ["A!1"]
    assert body_of["A!1"] == []
    eta = {q: q for q in s_dd.preds} | made
    assert check_correspondence(s_dd, out, eta) == []


def test_copy_rel_duplicate_occurrence():
    s = parse_chc(DUP)
    out, made = copy_rel(s, s.query, s.pred("P"))
    assert [b.pred.name for b in out.query.body] == ["P", "P!1"]


def test_copy_rel_precondition(s_da):
    with pytest.raises(NotShared):
        copy_rel(s_da, s_da.query, s_da.pred("main"))


def test_expand_identity_on_cdd(s_da):
    exp = expand(s_da)
    assert exp.copies == 0
    assert exp.corr.is_identity()
    assert print_horn(exp.system) == print_horn(s_da)


def test_expand_diamond(s_dd):
    exp = expand(s_dd, check=True)
    assert len(exp.system.clauses) == 6
    assert exp.system.is_cdd()
    assert exp.copies == 1
    assert exp.corr.lines() == "A -> A\nA!1 -> A\nB -> B\nC -> C\nD -> D\n"


def conjunctive_diamonds(k: int) -> str:
    lines = ["D0(x) <- ; x = 0"]
    for i in range(1, k + 1):
        lines += [f"B{i}(x) <- D{i - 1}(x)", f"C{i}(x) <- D{i - 1}(x)", f"D{i}(x) <- B{i}(x), C{i}(x)"]
    lines.append(f"false <- D{k}(x) ; x < 0")
    return "\n".join(lines)


def test_expand_budget():
    s = parse_chc(conjunctive_diamonds(4))
    with pytest.raises(ExpansionBudget):
        expand(s, budget=3)
    exp = expand(s)
    assert exp.system.is_cdd()
    assert exp.copies > 3


def test_nested_diamond_is_already_cdd():
    assert expand(nested_diamond(3)).copies == 0


def test_collapse_identity(s_da):
    eta = Correspondence({p: p for p in s_da.preds}, s_da.preds)
    sigma = {p: TRUE for p in s_da.preds}
    assert collapse(eta, sigma) == sigma


def test_collapse_two_preimages(s_dd):
    exp = expand(s_dd)
    sol = solve_cdd(exp.system)
    a = s_dd.pred("A")
    got = collapse(exp.corr, sol)
    copies = exp.corr.preimages(a)
    assert len(copies) == 2
    assert equivalent(got[a], conj(*(sol[q] for q in copies)))
    assert validate(s_dd, got)


def test_collapse_errors(s_dd):
    exp = expand(s_dd)
    with pytest.raises(IncompleteSolution):
        collapse(exp.corr, {})
    a = s_dd.pred("A")
    broken = Correspondence({q: r for q, r in exp.corr.mapping.items() if r != a}, exp.corr.origin_preds)
    with pytest.raises(CorrespondenceError):
        collapse(broken, {q: TRUE for q in broken.mapping})


def test_correspondence_with_identical_clauses():
    s = parse_chc("P(x) <- ; x <= 1\nP(x) <- ; x <= 1\nfalse <- P(x) ; x > 1")
    exp = expand(s)
    assert check_correspondence(s, exp.system, exp.corr) == []


def test_check_correspondence_detects_problems(s_dd):
    exp = expand(s_dd)
    bad = dict(exp.corr.mapping)
    a1 = next(q for q in bad if q.name == "A!1")
    bad[a1] = s_dd.pred("B")
    assert check_correspondence(s_dd, exp.system, bad)


# --- properties -------------------------------------------------------------

systems = st.builds(gen_system, st.integers(0, 10_000), st.sampled_from(PROFILES))


@settings(max_examples=120, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(systems)
def test_expand_postconditions(s):
    exp = expand(s)
    assert exp.system.is_cdd()
    assert check_correspondence(s, exp.system, exp.corr) == []
    again = expand(exp.system)
    assert again.copies == 0
    if s.is_cdd():
        assert exp.copies == 0


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(systems)
def test_expand_preserves_solvability(s):
    exp = expand(s)
    assert oracle_solvable(exp.system, guard=False) == oracle_solvable(s)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(systems)
def test_collapse_preserves_validity(s):
    exp = expand(s)
    sol = solve_cdd(exp.system)
    if sol is not None:
        assert validate(exp.system, sol)
        assert validate(s, collapse(exp.corr, sol))


def test_shara_diamond(s_dd):
    sol = solve_recursion_free(s_dd)
    assert sol is not None and validate(s_dd, sol)

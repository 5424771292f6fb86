import pytest

from cddhorn.errors import NoQuery, ParseError, SortError, UnknownPredicate, UnsupportedFeature
from cddhorn.formula import TRUE, ge, gt, lt
from cddhorn.horn_io import parse_chc, parse_horn, parse_solution, print_chc, print_horn, print_solution
from cddhorn.oracle import PROFILES, gen_system
from cddhorn.sat import equivalent

from conftest import fixture_path

DECL = "(set-logic HORN)\n"


def test_parse_s_da(s_da):
    assert len(s_da.preds) == 6
    assert len(s_da.clauses) == 8
    assert s_da.query.id == 8
    assert [p.name for p in s_da.preds] == ["L4", "L6", "L8", "L9", "dbl", "main"]


def test_query_only_system():
    s = parse_horn(DECL + "(assert (forall ((x Int)) (=> (> x 0) false)))")
    assert s.preds == ()
    assert s.query.body == ()
    v = next(iter(s.query.variables()))
    assert equivalent(s.query.constraint, gt(v, 0))


def test_no_query():
    with pytest.raises(NoQuery):
        parse_horn(DECL + "(declare-fun P (Int) Bool)\n(assert (forall ((x Int)) (=> (= x 0) (P x))))")


def test_syntax_error_position():
    with pytest.raises(ParseError) as e:
        parse_horn(DECL + "(assert (forall ((x Int)) (=> (> x 0) false))")
    assert e.value.line >= 1


def test_unsupported_constructs():
    with pytest.raises(UnsupportedFeature):
        parse_horn("(set-logic QF_LIA)")
    with pytest.raises(UnsupportedFeature):
        parse_horn(DECL + "(assert (forall ((x Int)) (=> (> (mod x 2) 0) false)))")
    with pytest.raises(UnsupportedFeature):
        parse_horn(DECL + "(declare-fun A (Int) Bool)\n"
                   "(assert (forall ((x Int)) (=> (exists ((y Int)) (forall ((z Int)) (> y z))) (A x))))")
    with pytest.raises(ParseError):
        parse_horn(DECL + "(declare-fun A ((Array Int Int)) Bool)")


def test_unknown_predicate_in_body():
    with pytest.raises(ParseError):
        parse_horn(DECL + "(assert (forall ((x Int)) (=> (Q x) false)))")


def test_multiple_queries_are_merged():
    s = parse_horn(DECL + "(declare-fun P (Int) Bool)\n"
                   "(assert (forall ((x Int)) (=> (= x 0) (P x))))\n"
                   "(assert (forall ((x Int)) (=> (and (P x) (> x 1)) false)))\n"
                   "(assert (forall ((x Int)) (=> (and (P x) (< x -1)) false)))\n")
    assert s.query.body_preds == (s.pred("bad!"),)
    assert len(s.clauses_of(s.pred("bad!"))) == 2


def test_native_format_matches_smt2(s_dd):
    assert [p.name for p in s_dd.preds] == ["A", "B", "C", "D"]
    assert len(s_dd.clauses) == 5
    again = parse_chc(print_chc(s_dd))
    assert print_horn(again) == print_horn(s_dd)


def test_native_parse_error_has_position():
    with pytest.raises(ParseError) as e:
        parse_chc("P(x) <- ; x $ 3\nfalse <- P(x)")
    assert e.value.line == 1


def test_print_solution_single_entry(s_da):
    l9 = s_da.pred("L9")
    text = print_solution({l9: ge(l9.params[1], 0)})
    assert text == "(define-fun L9 ((n Int) (abs1 Int)) Bool (>= abs1 0))\n"


def test_print_empty_solution():
    assert print_solution({}) == ""


def fig3(s):
    p = {q.name: q for q in s.preds}

    def a(name, i):
        return p[name].params[i]

    from cddhorn.formula import Lin, atom

    return {
        p["L4"]: TRUE,
        p["L6"]: ge(a("L6", 0), 0),
        p["L8"]: lt(a("L8", 0), 0),
        p["L9"]: ge(a("L9", 1), 0),
        p["dbl"]: atom(Lin.var(a("dbl", 1)), "=", Lin.var(a("dbl", 0)) * 2),
        p["main"]: ge(a("main", 1), 0),
    }


def test_solution_round_trip(s_da):
    sigma = fig3(s_da)
    text = print_solution(sigma)
    assert text.count("define-fun") == 6
    back = parse_solution("sat\n" + text, s_da)
    assert set(back) == set(sigma)
    for p in sigma:
        assert equivalent(back[p], sigma[p])


def test_solution_errors(s_da):
    with pytest.raises(UnknownPredicate):
        parse_solution("(define-fun nope ((x Int)) Bool true)", s_da)
    with pytest.raises(SortError):
        parse_solution("(define-fun L4 ((n Real) (abs Int)) Bool true)", s_da)


def test_fixture_files_parse():
    from cddhorn.horn_io import load

    for name in ("s_da.smt2", "counter_safe.smt2", "counter_unsafe.smt2", "s_dd.chc"):
        assert load(fixture_path(name)).query is not None


@pytest.mark.parametrize("seed", range(50))
def test_print_parse_round_trip(seed):
    s = gen_system(seed, PROFILES[seed % len(PROFILES)])
    once = parse_horn(print_horn(s))
    twice = parse_horn(print_horn(once))
    assert print_horn(once) == print_horn(twice)
    assert [p.name for p in once.preds] == [p.name for p in s.preds]
    assert len(once.clauses) == len(s.clauses)
    for c, d in zip(s.clauses, once.clauses):
        assert c.id == d.id
        assert [b.pred.name for b in c.body] == [b.pred.name for b in d.body]
        assert c.variables() == d.variables()
        assert equivalent(c.constraint, d.constraint)

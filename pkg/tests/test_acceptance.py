"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with its measurements; the
lines are also collected into the pytest terminal summary.
"""

import statistics
import time
from contextlib import contextmanager

from cddhorn.chc import BODY_DISJOINT, CDD, LINEAR, RECURSION_FREE
from cddhorn.cli import main as cli_main
from cddhorn.errors import SolverUnknown
from cddhorn.expand import check_correspondence, expand
from cddhorn.formula import conj, evaluate, lt
from cddhorn.horn_io import load, parse_horn, print_horn
from cddhorn.interpolate import BuiltinBackend, Interpolant, check_interpolant
from cddhorn.oracle import PROFILES, expansion_sizes, gen_system, nested_diamond, oracle, tree_formula
from cddhorn.sat import Unsat, check_sat
from cddhorn.solver import Refuted, Solved, SolveStats, Unknown, solve_cdd, solve_recursion_free, solve_recursive, validate

from conftest import fixture_path, record

SUITE_START = time.perf_counter()
SUITE_LIMIT_S = 300


@contextmanager
def criterion(n: int, title: str):
    info: dict = {}
    try:
        yield info
    except BaseException as e:
        detail = ", ".join(f"{k}={v}" for k, v in info.items())
        record(f"FAIL criterion {n}: {title} ({detail}) {type(e).__name__}: {e}")
        raise
    detail = ", ".join(f"{k}={v}" for k, v in info.items())
    record(f"PASS criterion {n}: {title} ({detail})")


class Recording:
    """Backend wrapper that keeps every interpolation query and answer."""

    def __init__(self, inner=None):
        self.inner = inner or BuiltinBackend()
        self.log = []

    def interpolate(self, pre, post, shared):
        res = self.inner.interpolate(pre, post, shared)
        self.log.append((pre, post, frozenset(shared), res))
        return res


RECORDER = Recording()


def differential_corpus():
    return [gen_system(seed, "dag") for seed in range(200)]


def test_criterion_1_golden_fixture(capsys):
    with criterion(1, "S_DA solves in under 1 s, validates, and sigma(L9) excludes abs' < 0") as info:
        path = fixture_path("s_da.smt2")
        t0 = time.perf_counter()
        code = cli_main(["solve", path])
        elapsed = time.perf_counter() - t0
        out = capsys.readouterr().out
        info["cli_seconds"] = round(elapsed, 3)
        assert code == 0 and out.startswith("sat\n")
        assert elapsed < 1.0
        s = load(path)
        sol = solve_recursion_free(s, RECORDER)
        assert sol is not None and validate(s, sol)
        l9 = s.pred("L9")
        abs1 = l9.params[1]
        # Reachable pre-states of L9: the post-states of L6 and L8.
        reach = check_sat(conj(sol[l9], lt(abs1, 0)))
        info["sigma(L9)"] = sol[l9].key
        assert isinstance(reach, Unsat)


def test_criterion_2_classification():
    with criterion(2, "S_DA is CDD only; no linear or body-disjoint instance outside CDD") as info:
        s = load(fixture_path("s_da.smt2"))
        labels = s.classify()
        assert labels == {RECURSION_FREE, CDD}
        assert LINEAR not in labels and BODY_DISJOINT not in labels
        violations = 0
        counts = {p: 0 for p in PROFILES}
        for seed in range(500):
            for prof in PROFILES:
                got = gen_system(seed, prof).classify()
                if (LINEAR in got or BODY_DISJOINT in got) and CDD not in got:
                    violations += 1
                counts[prof] += 1
        info["systems"] = sum(counts.values())
        info["violations"] = violations
        assert sum(counts.values()) == 2000
        assert violations == 0


def test_criterion_3_differential():
    with criterion(3, "solver verdict matches the derivation-tree oracle on 200 systems") as info:
        mismatches = unknowns = somes = nones = 0
        for s in differential_corpus():
            truth = oracle(s)
            try:
                sol = solve_recursion_free(s, RECORDER)
            except SolverUnknown:
                unknowns += 1
                continue
            if (sol is not None) != truth.solvable:
                mismatches += 1
                continue
            if sol is not None:
                somes += 1
                assert validate(s, sol)
            else:
                nones += 1
                f, _ = tree_formula(s, truth.witness)
                assert evaluate(f, truth.model)
        info.update(mismatches=mismatches, unknown=unknowns, some=somes, none=nones)
        assert mismatches == 0
        assert unknowns <= 0.05 * 200


def test_criterion_4_interpolant_contract():
    with criterion(4, "every interpolant satisfies the three interpolant conditions") as info:
        for name in ("s_dd.chc",):
            solve_recursion_free(load(fixture_path(name)), RECORDER)
        for seed in range(50):
            for prof in ("linear", "body-disjoint", "cdd"):
                try:
                    solve_recursion_free(gen_system(seed, prof), RECORDER)
                except SolverUnknown:
                    pass
        solve_recursive(load(fixture_path("counter_unsafe.smt2")), 5, RECORDER)
        solve_recursive(load(fixture_path("counter_safe.smt2")), 3, RECORDER)
        itps = [(pre, post, shared, r.formula) for pre, post, shared, r in RECORDER.log if isinstance(r, Interpolant)]
        good = sum(check_interpolant(pre, post, shared, f) for pre, post, shared, f in itps)
        info.update(interpolants=len(itps), valid=good, queries=len(RECORDER.log))
        assert itps and good == len(itps)


def _linear_fit(xs, ys):
    mx, my = statistics.fmean(xs), statistics.fmean(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx
    icpt = my - slope * mx
    ss_res = sum((y - (slope * x + icpt)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - my) ** 2 for y in ys)
    return slope, 1 - ss_res / ss_tot


def test_criterion_5_expansion():
    with criterion(5, "expansion is CDD with a valid correspondence; diamonds grow linearly") as info:
        inputs = [gen_system(seed, prof) for seed in range(125) for prof in PROFILES]
        not_cdd = bad_corr = not_identity = 0
        for s in inputs:
            exp = expand(s)
            not_cdd += not exp.system.is_cdd()
            bad_corr += bool(check_correspondence(s, exp.system, exp.corr))
            if s.is_cdd():
                same = exp.corr.is_identity() and print_horn(exp.system) == print_horn(s)
                not_identity += not same
        ks = list(range(1, 7))
        sizes = [expansion_sizes(nested_diamond(k)) for k in ks]
        cdd = [z["cdd"]["clauses"] for z in sizes]
        slope, r2 = _linear_fit(ks, cdd)
        derivs = [z["tree"]["derivations"] for z in sizes]
        info.update(inputs=len(inputs), not_cdd=not_cdd, bad_correspondence=bad_corr, not_identity=not_identity,
                    cdd_clauses=cdd, tree_clauses=[z["tree"]["clauses"] for z in sizes],
                    slope=round(slope, 3), r2=round(r2, 4), derivations=derivs)
        assert not_cdd == 0 and bad_corr == 0 and not_identity == 0
        assert slope > 0 and r2 >= 0.99
        assert derivs == [2 ** k for k in ks]


def test_criterion_6_query_count():
    with criterion(6, "one interpolation query per predicate; Pre/Post sizes linear in |S|") as info:
        cdd_inputs = [load(fixture_path("s_da.smt2"))]
        cdd_inputs += [expand(s).system for s in differential_corpus()]
        cdd_inputs += [nested_diamond(k) for k in range(1, 7)]
        complete = early = 0
        ratio = 0.0
        for s in cdd_inputs:
            assert s.is_cdd()
            stats = SolveStats()
            sol = solve_cdd(s, stats=stats)
            if sol is not None:
                complete += 1
                assert stats.itp_calls == len(s.preds)
            else:
                # Unsolvable: the walk stops at the first mutually
                # satisfiable query, which is the last one issued.
                early += 1
                assert stats.itp_calls <= len(s.preds)
                if stats.trace:
                    assert stats.trace[-1]["interpolant"] is None
            for rec in stats.trace:
                ratio = max(ratio, rec["pre-size"] / s.size(), rec["post-size"] / s.size())
        info.update(inputs=len(cdd_inputs), solved=complete, unsolvable=early, c=round(ratio, 3))
        assert ratio <= 4.0


def test_criterion_7_recursive_driver():
    with criterion(7, "counter refuted at depth 3; no invalid Solved on the safe variants") as info:
        unsafe = load(fixture_path("counter_unsafe.smt2"))
        res = solve_recursive(unsafe, 5)
        info["counter"] = res
        assert res == Refuted(3)
        verdicts = []
        safe = load(fixture_path("counter_safe.smt2"))
        text = open(fixture_path("counter_unsafe.smt2")).read().replace("(> x 2)", "(> x 10)")
        for s in (safe, parse_horn(text)):
            got = solve_recursive(s, 16)
            verdicts.append(type(got).__name__ + (f"({got.depth})" if not isinstance(got, Unknown) else ""))
            if isinstance(got, Solved):
                assert validate(s, got.solution)
        info["safe_variants"] = verdicts
        elapsed = time.perf_counter() - SUITE_START
        info["suite_seconds"] = round(elapsed, 1)
        assert elapsed < SUITE_LIMIT_S

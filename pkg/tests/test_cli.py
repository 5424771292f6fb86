import json
import subprocess
import sys

import pytest

from cddhorn.cli import main

from conftest import fixture_path

S_DA = fixture_path("s_da.smt2")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_s_da(capsys):
    code, out, _ = run(capsys, "solve", S_DA)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "sat"
    assert sum(line.startswith("(define-fun") for line in lines) == 6


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", S_DA)
    assert (code, out) == (0, "recursion-free cdd\n")


def test_solve_counter_unsafe(capsys):
    code, out, _ = run(capsys, "solve", fixture_path("counter_unsafe.smt2"), "--kmax", "5")
    assert code == 1
    assert out.splitlines() == ["unsat", "; depth 3"]


def test_solve_unsat_prints_derivation(capsys, tmp_path):
    text = open(S_DA).read().replace("(< res 0)", "(= res 2)")
    path = tmp_path / "reach.smt2"
    path.write_text(text)
    code, out, _ = run(capsys, "solve", str(path))
    assert code == 1
    assert out.startswith("unsat\n; derivation ")


def test_solve_then_validate(capsys, tmp_path):
    _, out, _ = run(capsys, "solve", S_DA, "--check", "--trace", str(tmp_path / "t.json"))
    sol = tmp_path / "sol.smt2"
    sol.write_text(out)
    code, out, _ = run(capsys, "validate", S_DA, str(sol))
    assert (code, out) == (0, "valid\n")
    trace = json.loads((tmp_path / "t.json").read_text())
    assert trace["itp_calls"] == 6
    assert [q["predicate"] for q in trace["queries"]] == ["L4", "L6", "L8", "L9", "dbl", "main"]


def test_validate_rejects(capsys, tmp_path):
    sol = tmp_path / "bad.smt2"
    sol.write_text(
        "(define-fun L4 ((n Int) (abs Int)) Bool true)\n"
        "(define-fun L6 ((n Int) (abs Int)) Bool true)\n"
        "(define-fun L8 ((n Int) (abs Int)) Bool true)\n"
        "(define-fun L9 ((n Int) (abs1 Int)) Bool true)\n"
        "(define-fun dbl ((x Int) (d Int)) Bool true)\n"
        "(define-fun main ((n Int) (res Int)) Bool true)\n"
    )
    code, out, _ = run(capsys, "validate", S_DA, str(sol))
    # Every clause with a head holds trivially; only the query fails.
    assert (code, out) == (1, "invalid 8\n")


def test_expand_writes_map(capsys, tmp_path):
    dest = tmp_path / "out.smt2"
    code, _, _ = run(capsys, "expand", fixture_path("s_dd.chc"), "-o", str(dest))
    assert code == 0
    assert "A!1 -> A" in (tmp_path / "out.smt2.map").read_text()
    code, out, _ = run(capsys, "expand", fixture_path("s_dd.chc"))
    assert "; A!1 -> A" in out


def test_oracle_command(capsys):
    code, out, _ = run(capsys, "oracle", S_DA)
    assert (code, out) == (0, "solvable\n")


def test_bench_sizes(capsys):
    code, out, _ = run(capsys, "bench-sizes", "--depth", "3")
    rows = [json.loads(line) for line in out.splitlines()]
    assert [r["tree"]["derivations"] for r in rows] == [2, 4, 8]
    code, out, _ = run(capsys, "bench-sizes", S_DA)
    assert json.loads(out)["cdd"]["clauses"] == 8


def test_errors(capsys, tmp_path):
    code, _, err = run(capsys, "solve", str(tmp_path / "missing.smt2"))
    assert code == 3 and "error" in err
    bad = tmp_path / "bad.smt2"
    bad.write_text("(assert (forall ((x Int)) (=> (> x 0) false))")
    code, _, err = run(capsys, "classify", str(bad))
    assert code == 3 and "ParseError" in err
    assert run(capsys, "nonsense")[0] == 3


def test_external_backend_flag(capsys, monkeypatch):
    from pathlib import Path

    fake = f"{sys.executable} {Path(__file__).with_name('fake_solver.py')}"
    code, out, _ = run(capsys, "solve", S_DA, "--backend", "external", "--external-cmd", fake)
    assert code == 0 and out.startswith("sat")


@pytest.mark.parametrize("argv", [["--version"], ["classify", S_DA]])
def test_module_entry_point(argv):
    proc = subprocess.run([sys.executable, "-m", "cddhorn", *argv], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip()

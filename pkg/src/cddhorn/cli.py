"""Command-line interface.

Exit codes: 0 sat / valid / solvable, 1 unsat / invalid / unsolvable,
2 unknown, 3 usage, parse or internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .chc import format_labels
from .errors import ChcError, OracleTooLarge, SolverUnknown
from .expand import expand
from .horn_io import load, parse_solution, print_horn, print_solution
from .interpolate import Config, make_backend
from .oracle import expansion_sizes, nested_diamond, oracle
from .solver import Refuted, Solved, SolveStats, first_failure, solve_recursion_free, solve_recursive

EXIT_SAT, EXIT_UNSAT, EXIT_UNKNOWN, EXIT_ERROR = 0, 1, 2, 3

log = logging.getLogger("cddhorn")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cddhorn", description="Solver for constrained Horn clause systems.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def backend_flags(p):
        p.add_argument("--backend", choices=["builtin", "external"], default="builtin")
        p.add_argument("--external-cmd", help="interpolating SMT solver command (default: $CDD_CHC_EXTERNAL_CMD)")
        p.add_argument("--dialect", choices=["smtinterpol", "mathsat"], default="smtinterpol")
        p.add_argument("--timeout-ms", type=int, default=30_000)

    p = sub.add_parser("solve", help="solve a system")
    p.add_argument("file")
    backend_flags(p)
    p.add_argument("--kmax", type=int, default=16, help="maximum unwinding depth for recursive systems")
    p.add_argument("--dump-expansion", metavar="PATH", help="write the CDD expansion and PATH.map")
    p.add_argument("--trace", metavar="PATH", help="write a JSON trace of interpolation queries ('-' for stderr)")
    p.add_argument("--check", action="store_true", help="verify every interpolant and partial solution")

    p = sub.add_parser("classify", help="print the class labels of a system")
    p.add_argument("file")

    p = sub.add_parser("expand", help="print a CDD expansion and its correspondence")
    p.add_argument("file")
    p.add_argument("-o", "--output", help="write the expansion here and the correspondence to OUTPUT.map")

    p = sub.add_parser("validate", help="check a solution against a system")
    p.add_argument("file")
    p.add_argument("solution")

    p = sub.add_parser("oracle", help="decide a small recursion-free system by derivation trees")
    p.add_argument("file")

    p = sub.add_parser("bench-sizes", help="compare expansion sizes")
    p.add_argument("file", nargs="?", help="system to measure (default: nested-diamond family)")
    p.add_argument("--depth", type=int, default=6, help="largest nested-diamond depth")
    p.add_argument("--seed", type=int, help="measure a generated system instead")
    p.add_argument("--profile", default="dag", choices=["linear", "body-disjoint", "dag", "cdd"])
    return ap


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _cmd_solve(args) -> int:
    config = Config(
        backend=args.backend,
        external_cmd=args.external_cmd,
        dialect=args.dialect,
        timeout_ms=args.timeout_ms,
    )
    backend = make_backend(config)
    s = load(args.file)
    stats = SolveStats()
    try:
        if s.is_recursion_free():
            exps: list = []
            sol = solve_recursion_free(s, backend, stats=stats, check=args.check, expansion_out=exps)
            if args.dump_expansion and exps:
                with open(args.dump_expansion, "w") as fh:
                    fh.write(print_horn(exps[0].system))
                with open(args.dump_expansion + ".map", "w") as fh:
                    fh.write(exps[0].corr.lines())
            if sol is None:
                _out("unsat")
                try:
                    res = oracle(s)
                    if res.witness is not None:
                        _out("; derivation " + " ".join(map(str, res.witness.clause_ids())))
                except OracleTooLarge:
                    pass
                return EXIT_UNSAT
            _out("sat")
            sys.stdout.write(print_solution(sol))
            return EXIT_SAT
        res = solve_recursive(s, args.kmax, backend, stats=stats)
        if isinstance(res, Solved):
            _out("sat")
            sys.stdout.write(print_solution(res.solution))
            return EXIT_SAT
        if isinstance(res, Refuted):
            _out("unsat")
            _out(f"; depth {res.depth}")
            return EXIT_UNSAT
        _out("unknown")
        _out(f"; {res.reason}")
        return EXIT_UNKNOWN
    finally:
        if args.trace:
            data = json.dumps({"itp_calls": stats.itp_calls, "queries": stats.trace}, indent=2)
            if args.trace == "-":
                sys.stderr.write(data + "\n")
            else:
                with open(args.trace, "w") as fh:
                    fh.write(data + "\n")


def _cmd_classify(args) -> int:
    _out(format_labels(load(args.file).classify()))
    return EXIT_SAT


def _cmd_expand(args) -> int:
    exp = expand(load(args.file))
    text = print_horn(exp.system)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
        with open(args.output + ".map", "w") as fh:
            fh.write(exp.corr.lines())
    else:
        sys.stdout.write(text)
        sys.stdout.write("".join(f"; {line}\n" for line in exp.corr.lines().splitlines()))
    return EXIT_SAT


def _cmd_validate(args) -> int:
    s = load(args.file)
    with open(args.solution, "rb") as fh:
        sigma = parse_solution(fh.read(), s)
    missing = [p.name for p in s.preds if p not in sigma]
    if missing:
        raise ChcError(f"solution has no entry for {', '.join(missing)}")
    bad = first_failure(s, sigma)
    if bad is None:
        _out("valid")
        return EXIT_SAT
    _out(f"invalid {bad}")
    return EXIT_UNSAT


def _cmd_oracle(args) -> int:
    s = load(args.file)
    res = oracle(s)
    if res.solvable:
        _out("solvable")
        return EXIT_SAT
    _out("unsolvable")
    _out(res.witness.render(s))
    return EXIT_UNSAT


def _cmd_bench(args) -> int:
    if args.file:
        rows = [(args.file, expansion_sizes(load(args.file)))]
    elif args.seed is not None:
        from .oracle import gen_system

        rows = [(f"{args.profile}:{args.seed}", expansion_sizes(gen_system(args.seed, args.profile)))]
    else:
        rows = [(f"diamond-{k}", expansion_sizes(nested_diamond(k))) for k in range(1, args.depth + 1)]
    for name, sizes in rows:
        _out(json.dumps({"system": name, **sizes}, sort_keys=True))
    return EXIT_SAT


_COMMANDS = {
    "solve": _cmd_solve,
    "classify": _cmd_classify,
    "expand": _cmd_expand,
    "validate": _cmd_validate,
    "oracle": _cmd_oracle,
    "bench-sizes": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_SAT if e.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ChcError as e:
        if isinstance(e, SolverUnknown):
            _out("unknown")
            _out(f"; {e}")
            return EXIT_UNKNOWN
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

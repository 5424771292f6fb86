"""Constrained Horn clause solving by clause-dependence-disjoint expansion."""

from .chc import Clause, Predicate, PredApp, System, build_clause, classify, deps, siblings, tdeps, topo_order
from .errors import ChcError
from .expand import Correspondence, Expansion, check_correspondence, collapse, copy_rel, expand, shared_rel
from .formula import Formula, Lin, Var, vocab
from .horn_io import load, parse_chc, parse_horn, parse_solution, print_horn, print_solution
from .interpolate import Interpolant, MutuallySat, Unknown, check_interpolant, itp
from .oracle import expansion_sizes, gen_system, oracle, oracle_solvable
from .sat import Sat, Unsat, check_sat, project
from .solver import (
    Refuted,
    Solved,
    SolveStats,
    post_formula,
    pre_formula,
    solve_recursion_free,
    solve_cdd,
    solve_recursive,
    unwind,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "ChcError",
    "Clause",
    "Correspondence",
    "Expansion",
    "Formula",
    "Interpolant",
    "Lin",
    "MutuallySat",
    "PredApp",
    "Predicate",
    "Refuted",
    "Sat",
    "SolveStats",
    "Solved",
    "System",
    "Unknown",
    "Unsat",
    "Var",
    "build_clause",
    "check_correspondence",
    "check_interpolant",
    "check_sat",
    "classify",
    "collapse",
    "copy_rel",
    "deps",
    "expand",
    "expansion_sizes",
    "gen_system",
    "itp",
    "load",
    "oracle",
    "oracle_solvable",
    "parse_chc",
    "parse_horn",
    "parse_solution",
    "post_formula",
    "pre_formula",
    "print_horn",
    "print_solution",
    "project",
    "shared_rel",
    "siblings",
    "solve_cdd",
    "solve_recursion_free",
    "solve_recursive",
    "tdeps",
    "topo_order",
    "unwind",
    "validate",
    "vocab",
]

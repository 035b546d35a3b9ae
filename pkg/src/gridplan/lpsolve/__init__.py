"""Linear programs: model type, built-in simplex, brute-force oracle, checks, MPS I/O."""

from .check import CheckReport, check_solution
from .model import LinearProgram, LPError, Solution, Status
from .mps import format_interchange, mangling_table, read_interchange, write_interchange
from .oracle import brute_force_oracle
from .simplex import SimplexOptions, solve_simplex
from .solve import SolveOptions, solve, solve_highs, write_solution_csv

__all__ = [
    "CheckReport",
    "LinearProgram",
    "LPError",
    "SimplexOptions",
    "Solution",
    "SolveOptions",
    "Status",
    "brute_force_oracle",
    "check_solution",
    "format_interchange",
    "mangling_table",
    "read_interchange",
    "solve",
    "solve_highs",
    "solve_simplex",
    "write_interchange",
    "write_solution_csv",
]

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .model import LinearProgram, Solution, Status
from .simplex import SimplexOptions, solve_simplex

logger = logging.getLogger(__name__)

# above this many rows x columns the dense basis inverse gets slow
DENSE_LIMIT = 2_000_000


@dataclass(frozen=True)
class SolveOptions:
    method: str = "auto"  # auto | simplex | highs
    simplex: SimplexOptions = field(default_factory=SimplexOptions)
    time_limit: float | None = None

    @property
    def max_iterations(self) -> int:
        return self.simplex.max_iterations


def solve(lp: LinearProgram, options: SolveOptions | None = None) -> Solution:
    """Solve ``lp``.  ``auto`` uses the built-in simplex at desk scale and HiGHS beyond it."""
    opts = options or SolveOptions()
    method = opts.method
    if method == "auto":
        method = "simplex" if lp.n_rows * (lp.n_cols + lp.n_rows) <= DENSE_LIMIT else "highs"
    if method == "simplex":
        return solve_simplex(lp, opts.simplex)
    if method == "highs":
        return solve_highs(lp, opts)
    raise ValueError(f"unknown solve method {opts.method!r}")


_HIGHS_STATUS = {0: Status.OPTIMAL, 1: Status.ITERATION_LIMIT, 2: Status.INFEASIBLE, 3: Status.UNBOUNDED}


def solve_highs(lp: LinearProgram, opts: SolveOptions | None = None) -> Solution:
    from scipy.optimize import linprog

    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    senses = np.array(lp.senses)
    A = lp.A.tocsr()
    le, ge, eq = np.flatnonzero(senses == "L"), np.flatnonzero(senses == "G"), np.flatnonzero(senses == "E")
    ineq = np.concatenate([le, ge])
    sign = np.concatenate([np.ones(le.size), -np.ones(ge.size)])
    A_ub = A[ineq].multiply(sign[:, None]).tocsr() if ineq.size else None
    b_ub = lp.b[ineq] * sign if ineq.size else None
    A_eq = A[eq] if eq.size else None
    b_eq = lp.b[eq] if eq.size else None
    bounds = np.column_stack([np.where(np.isfinite(lp.lb), lp.lb, -np.inf), lp.ub])
    hopts = {"presolve": True, "primal_feasibility_tolerance": opts.simplex.feasibility_tol,
             "dual_feasibility_tolerance": opts.simplex.optimality_tol}
    if opts.time_limit:
        hopts["time_limit"] = opts.time_limit
    res = linprog(lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs-ds", options=hopts)
    status = _HIGHS_STATUS.get(res.status, Status.INFEASIBLE)
    x = np.asarray(res.x, dtype=float) if res.x is not None else np.full(lp.n_cols, np.nan)
    duals = None
    if status is Status.OPTIMAL:
        duals = np.zeros(lp.n_rows)
        if ineq.size:
            duals[ineq] = np.asarray(res.ineqlin.marginals) * sign
        if eq.size:
            duals[eq] = np.asarray(res.eqlin.marginals)
    obj = float(res.fun) if status is Status.OPTIMAL else (-np.inf if status is Status.UNBOUNDED else float("nan"))
    return Solution(status, obj, x, duals, int(getattr(res, "nit", 0) or 0),
                    time.perf_counter() - t0, "highs", str(res.message))


def write_solution_csv(lp: LinearProgram, sol: Solution, path) -> None:
    """One row per column: ``name,value,lb,ub,cost``; a leading comment records status and objective."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# status={sol.status.value} objective={format(sol.objective, '.12g')}\n")
        fh.write("name,value,lb,ub,cost\n")
        for j, name in enumerate(lp.col_names):
            vals = (sol.x[j], lp.lb[j], lp.ub[j], lp.c[j])
            fh.write(name + "," + ",".join(_fmt(v) for v in vals) + "\n")


def _fmt(v: float) -> str:
    s = format(float(v), ".12g")
    return "0" if s == "-0" else s

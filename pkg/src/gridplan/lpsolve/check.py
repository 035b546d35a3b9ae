from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import LinearProgram, Solution


@dataclass(frozen=True)
class CheckReport:
    max_row_violation: float
    max_scaled_row_violation: float
    max_bound_violation: float
    objective_delta: float
    violated_rows: tuple[str, ...] = field(default=())
    violated_cols: tuple[str, ...] = field(default=())
    tol: float = 1e-7

    @property
    def passed(self) -> bool:
        return not self.violated_rows and not self.violated_cols


def row_violations(lp: LinearProgram, x) -> np.ndarray:
    act = lp.activity(x)
    viol = np.zeros(lp.n_rows)
    senses = np.array(lp.senses)
    le, ge, eq = senses == "L", senses == "G", senses == "E"
    viol[le] = np.maximum(0.0, act[le] - lp.b[le])
    viol[ge] = np.maximum(0.0, lp.b[ge] - act[ge])
    viol[eq] = np.abs(act[eq] - lp.b[eq])
    return viol


def check_solution(lp: LinearProgram, sol: Solution, tol: float = 1e-7) -> CheckReport:
    """Primal residuals (absolute and per unit max-abs row coefficient), bound violations, objective recomputation."""
    x = np.asarray(sol.x, dtype=float)
    viol = row_violations(lp, x)
    rowmax = abs(lp.A).max(axis=1).toarray().ravel() if lp.n_rows else np.zeros(0)
    scaled = viol / np.where(rowmax > 0, rowmax, 1.0)
    bviol = np.maximum(np.maximum(lp.lb - x, 0.0), np.maximum(x - lp.ub, 0.0))
    obj_delta = abs(lp.objective(x) - sol.objective) if np.isfinite(sol.objective) else float("inf")
    rows = tuple(lp.row_names[i] for i in np.flatnonzero(scaled > tol))
    cols = tuple(lp.col_names[j] for j in np.flatnonzero(bviol > tol))
    return CheckReport(
        float(viol.max()) if viol.size else 0.0,
        float(scaled.max()) if scaled.size else 0.0,
        float(bviol.max()) if bviol.size else 0.0,
        obj_delta,
        rows,
        cols,
        tol,
    )

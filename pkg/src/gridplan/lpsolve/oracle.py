"""Brute-force LP oracle: enumerate every basic point, keep the feasible ones.

Only for tiny problems (test utility).  Infinite bounds are replaced by a
finite box; a problem whose optimum moves when the box grows is unbounded.
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np

from .model import LinearProgram, Solution, Status

MAX_VARS = 8
MAX_ROWS = 10
_CHUNK = 50_000


def _best_vertex(lp: LinearProgram, box: float, tol: float):
    A = lp.A.toarray()
    m, n = A.shape
    lb = np.where(np.isfinite(lp.lb), lp.lb, -box)
    ub = np.where(np.isfinite(lp.ub), lp.ub, box)
    # constraint rows: A rows, then x_j = lb_j, then x_j = ub_j
    G = np.vstack([A, np.eye(n), np.eye(n)])
    h = np.concatenate([lp.b, lb, ub])
    best_val, best_x = math.inf, None
    combos = itertools.combinations(range(G.shape[0]), n)
    while True:
        chunk = np.array(list(itertools.islice(combos, _CHUNK)), dtype=int)
        if chunk.size == 0:
            break
        chunk = chunk.reshape(-1, n)
        systems = G[chunk]
        rhs = h[chunk]
        det = np.linalg.det(systems)
        ok = np.abs(det) > 1e-10
        if not ok.any():
            continue
        xs = np.linalg.solve(systems[ok], rhs[ok][..., None])[..., 0]
        act = xs @ A.T
        feas = np.all(xs >= lb - tol, axis=1) & np.all(xs <= ub + tol, axis=1)
        for i, s in enumerate(lp.senses):
            scale_i = tol * max(1.0, abs(lp.b[i]))
            if s == "L":
                feas &= act[:, i] <= lp.b[i] + scale_i
            elif s == "G":
                feas &= act[:, i] >= lp.b[i] - scale_i
            else:
                feas &= np.abs(act[:, i] - lp.b[i]) <= scale_i
        if not feas.any():
            continue
        vals = xs[feas] @ lp.c
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_x = float(vals[k]), xs[feas][k]
    return best_val, best_x


def brute_force_oracle(lp: LinearProgram, box: float = 1e4, tol: float = 1e-9) -> Solution:
    if lp.n_cols > MAX_VARS or lp.n_rows > MAX_ROWS:
        raise ValueError(f"oracle limited to {MAX_VARS} variables and {MAX_ROWS} rows")
    t0 = time.perf_counter()
    n = lp.n_cols
    if n == 0:
        feasible = all(
            (s == "L" and 0 <= b) or (s == "G" and 0 >= b) or (s == "E" and b == 0)
            for s, b in zip(lp.senses, lp.b)
        )
        st = Status.OPTIMAL if feasible else Status.INFEASIBLE
        return Solution(st, 0.0 if feasible else math.nan, np.zeros(0), method="oracle")
    val, x = _best_vertex(lp, box, tol)
    if x is None:
        return Solution(Status.INFEASIBLE, math.nan, np.full(n, np.nan), method="oracle",
                        wall_time=time.perf_counter() - t0)
    unbounded_dims = ~(np.isfinite(lp.lb) & np.isfinite(lp.ub))
    if unbounded_dims.any():
        val_big, _ = _best_vertex(lp, box * 10, tol)
        if val_big < val - 1e-9 * max(1.0, abs(val)):
            return Solution(Status.UNBOUNDED, -math.inf, x, method="oracle", wall_time=time.perf_counter() - t0)
    return Solution(Status.OPTIMAL, val, x, method="oracle", wall_time=time.perf_counter() - t0)

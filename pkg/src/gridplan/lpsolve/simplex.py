"""Bounded-variable revised primal simplex with a dense basis inverse.

Two phases: phase 1 minimizes the sum of artificial variables from a slack /
artificial crash basis, phase 2 optimizes the true objective with the
artificials fixed at zero.  Pricing is Dantzig's rule until a run of
degenerate pivots is detected, after which Bland's smallest-index rule is used
for the rest of the solve, which rules out cycling.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import LinearProgram, Solution, Status

logger = logging.getLogger(__name__)

BASIC, AT_LB, AT_UB, FREE_ZERO = 0, 1, 2, 3


@dataclass(frozen=True)
class SimplexOptions:
    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-7
    pivot_tol: float = 1e-9
    max_iterations: int = 50_000
    refactor_every: int = 100
    stall_limit: int = 50
    scale_rows: bool = True
    bland: bool = False


class _Phase:
    def __init__(self, M, b, lb, ub, basis, state, x, opts: SimplexOptions):
        self.M = M
        self.b = b
        self.lb = lb
        self.ub = ub
        self.basis = basis
        self.state = state
        self.x = x
        self.opts = opts
        self.m = M.shape[0]
        self.iterations = 0
        self.bland = opts.bland
        self._degenerate_run = 0
        self.refactor()

    def refactor(self):
        B = self.M[:, self.basis].toarray()
        self.Binv = np.linalg.inv(B) if self.m else np.zeros((0, 0))
        self._since_refactor = 0
        self.recompute_basics()

    def recompute_basics(self):
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.M @ xn)

    def run(self, c: np.ndarray, budget: int) -> Status:
        o = self.opts
        MT = self.M.T.tocsr()
        fixed = self.lb == self.ub
        while True:
            if self.iterations >= budget:
                return Status.ITERATION_LIMIT
            y = c[self.basis] @ self.Binv
            d = c - MT @ y
            up = ((self.state == AT_LB) | (self.state == FREE_ZERO)) & (d < -o.optimality_tol) & ~fixed
            down = ((self.state == AT_UB) | (self.state == FREE_ZERO)) & (d > o.optimality_tol) & ~fixed
            eligible = np.flatnonzero(up | down)
            if eligible.size == 0:
                self.duals = y
                return Status.OPTIMAL
            if self.bland:
                q = int(eligible[0])
            else:
                q = int(eligible[np.argmax(np.abs(d[eligible]))])
            sigma = 1.0 if up[q] else -1.0

            col = self.M[:, [q]].toarray().ravel()
            alpha = self.Binv @ col
            delta = -sigma * alpha  # change of each basic variable per unit step

            xb = self.x[self.basis]
            lbb, ubb = self.lb[self.basis], self.ub[self.basis]
            limits = np.full(self.m, np.inf)
            dec = delta < -o.pivot_tol
            inc = delta > o.pivot_tol
            with np.errstate(invalid="ignore", divide="ignore"):
                limits[dec] = (xb[dec] - lbb[dec]) / -delta[dec]
                limits[inc] = (ubb[inc] - xb[inc]) / delta[inc]
            limits = np.where(np.isnan(limits), np.inf, np.maximum(limits, 0.0))
            t_row = limits.min() if self.m else np.inf
            t_flip = self.ub[q] - self.lb[q]

            if not np.isfinite(min(t_row, t_flip)):
                self.ray = (q, sigma)
                return Status.UNBOUNDED

            self.iterations += 1
            if t_flip <= t_row:
                step = t_flip
                self.x[q] += sigma * step
                self.x[self.basis] = xb + delta * step
                self.state[q] = AT_UB if sigma > 0 else AT_LB
                self._track_degeneracy(step)
                continue

            step = t_row
            ties = np.flatnonzero(limits <= t_row + o.pivot_tol)
            if self.bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = self.basis[r]
            hit_lower = delta[r] < 0
            self.x[self.basis] = xb + delta * step
            self.x[q] += sigma * step
            self.x[leaving] = self.lb[leaving] if hit_lower else self.ub[leaving]
            self.state[leaving] = AT_LB if hit_lower else AT_UB
            if not np.isfinite(self.x[leaving]):  # pragma: no cover - guarded by ratio test
                self.x[leaving] = 0.0
                self.state[leaving] = FREE_ZERO
            self.basis[r] = q
            self.state[q] = BASIC

            piv = alpha[r]
            row_r = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, row_r)
            self.Binv[r] = row_r
            self._since_refactor += 1
            if self._since_refactor >= o.refactor_every:
                self.refactor()
            self._track_degeneracy(step)

    def _track_degeneracy(self, step):
        if step <= self.opts.pivot_tol:
            self._degenerate_run += 1
            if self._degenerate_run >= self.opts.stall_limit and not self.bland:
                logger.debug("stall detected after %d degenerate pivots; switching to Bland's rule",
                             self._degenerate_run)
                self.bland = True
        else:
            self._degenerate_run = 0


def solve_simplex(lp: LinearProgram, options: SimplexOptions | None = None) -> Solution:
    opts = options or SimplexOptions()
    t0 = time.perf_counter()
    m, n = lp.n_rows, lp.n_cols
    A = lp.A.tocsc()
    b = lp.b.astype(float).copy()
    scale = np.ones(m)
    if opts.scale_rows and m:
        rowmax = abs(lp.A).max(axis=1).toarray().ravel()
        scale = np.where(rowmax > 0, rowmax, 1.0)
        A = sp.diags(1.0 / scale) @ A
        b = b / scale

    slack_lb = np.array([0.0 if s == "L" else (-np.inf if s == "G" else 0.0) for s in lp.senses])
    slack_ub = np.array([np.inf if s == "L" else 0.0 for s in lp.senses])

    lb = np.concatenate([lp.lb, slack_lb])
    ub = np.concatenate([lp.ub, slack_ub])
    x = np.zeros(n + m)
    state = np.empty(n + m, dtype=int)
    for j in range(n + m):
        if np.isfinite(lb[j]):
            x[j], state[j] = lb[j], AT_LB
        elif np.isfinite(ub[j]):
            x[j], state[j] = ub[j], AT_UB
        else:
            x[j], state[j] = 0.0, FREE_ZERO

    residual = b - A @ x[:n]
    basis = np.empty(m, dtype=int)
    art_sign = np.ones(m)
    art_value = np.zeros(m)
    for i in range(m):
        s = n + i
        if slack_lb[i] - opts.feasibility_tol <= residual[i] <= slack_ub[i] + opts.feasibility_tol:
            basis[i] = s
            x[s] = residual[i]
            state[s] = BASIC
        else:
            bound = slack_lb[i] if residual[i] < slack_lb[i] else slack_ub[i]
            x[s] = bound
            state[s] = AT_LB if bound == slack_lb[i] else AT_UB
            gap = residual[i] - bound
            art_sign[i] = 1.0 if gap >= 0 else -1.0
            art_value[i] = abs(gap)
            basis[i] = n + m + i

    M = sp.hstack([A, sp.identity(m, format="csc"), sp.diags(art_sign, format="csc")], format="csc")
    lb_all = np.concatenate([lb, np.zeros(m)])
    ub_all = np.concatenate([ub, np.full(m, np.inf)])
    x_all = np.concatenate([x, art_value])
    state_all = np.concatenate([state, np.full(m, AT_LB)])
    for i in range(m):
        if basis[i] >= n + m:
            state_all[basis[i]] = BASIC
    # artificials that are not in the crash basis are never needed
    unused = np.array([n + m + i for i in range(m) if basis[i] != n + m + i], dtype=int)
    ub_all[unused] = 0.0

    phase = _Phase(M, b, lb_all, ub_all, basis, state_all, x_all, opts)
    # per-row tolerance: one huge right-hand side must not mask small violations elsewhere
    row_tol = opts.feasibility_tol * np.maximum(1.0, np.abs(b))

    if np.any(basis >= n + m):
        c1 = np.concatenate([np.zeros(n + m), np.ones(m)])
        st = phase.run(c1, opts.max_iterations)
        phase.recompute_basics()
        art = phase.x[n + m:]
        infeas = float(art.sum())
        if st is Status.ITERATION_LIMIT:
            return _result(lp, phase, Status.ITERATION_LIMIT, scale, n, t0, "phase 1 iteration limit")
        if np.any(art > row_tol):
            return _result(lp, phase, Status.INFEASIBLE, scale, n, t0, f"phase 1 infeasibility {infeas:.3g}")
    # phase 2: artificials pinned to zero
    phase.ub[n + m:] = 0.0
    phase.x[n + m:] = np.where(phase.state[n + m:] == BASIC, phase.x[n + m:], 0.0)
    phase.state[n + m:] = np.where(phase.state[n + m:] == BASIC, BASIC, AT_LB)
    c2 = np.concatenate([lp.c, np.zeros(2 * m)])
    st = phase.run(c2, opts.max_iterations)
    phase.refactor()
    return _result(lp, phase, st, scale, n, t0)


def _result(lp, phase: _Phase, status: Status, scale, n, t0, message=""):
    x = phase.x[:n].copy()
    # snap values within tolerance of their bounds
    lo, hi = lp.lb, lp.ub
    tol = phase.opts.feasibility_tol
    x = np.where(np.abs(x - lo) <= tol * 1e-3, lo, x)
    x = np.where(np.abs(x - hi) <= tol * 1e-3, hi, x)
    duals = None
    if status is Status.OPTIMAL:
        c_b = np.concatenate([lp.c, np.zeros(2 * lp.n_rows)])[phase.basis]
        y = c_b @ phase.Binv
        duals = y / scale
    obj = lp.objective(x) if status in (Status.OPTIMAL, Status.ITERATION_LIMIT) else float("nan")
    if status is Status.UNBOUNDED:
        obj = -np.inf
    return Solution(status, obj, x, duals, phase.iterations, time.perf_counter() - t0, "simplex", message)

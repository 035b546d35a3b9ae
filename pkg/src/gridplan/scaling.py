"""Mean-preserving rescaling of weighted series with an optional upper cap.

Shared by representative-day rescaling and per-bin capacity-factor scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_CLIP_ITERATIONS = 50
CLIP_TOLERANCE = 1e-6
# factors this close to 1 are treated as the identity
_IDENTITY_EPS = 1e-12


class RescaleError(ValueError):
    """Raised when a series cannot be scaled to the requested mean."""


@dataclass(frozen=True)
class ScaleResult:
    values: np.ndarray
    factor: float
    clipped: int = 0
    iterations: int = 0
    achieved_mean: float = 0.0
    notes: dict = field(default_factory=dict)


def weighted_mean(values: np.ndarray, weights: np.ndarray | None = None) -> float:
    values = np.asarray(values, dtype=float)
    if weights is None:
        return float(values.mean())
    weights = np.broadcast_to(np.asarray(weights, dtype=float), values.shape)
    return float((values * weights).sum() / weights.sum())


def scale_to_mean(
    values,
    target: float,
    weights=None,
    upper: float | None = None,
    max_iter: int = MAX_CLIP_ITERATIONS,
    tol: float = CLIP_TOLERANCE,
    name: str = "series",
) -> ScaleResult:
    """Multiply ``values`` by one scalar so the weighted mean equals ``target``.

    If ``upper`` is given and scaling pushes entries above it, those entries are
    clipped to ``upper`` and the remaining entries are rescaled again, repeating
    until nothing exceeds the cap (at most ``max_iter`` rounds).  The reported
    ``factor`` is the first-pass scalar.
    """
    x = np.array(values, dtype=float)
    if np.any(x < 0):
        raise RescaleError(f"{name}: negative values cannot be rescaled")
    w = np.ones_like(x) if weights is None else np.broadcast_to(np.asarray(weights, dtype=float), x.shape).copy()
    total_w = w.sum()
    current = float((x * w).sum() / total_w)
    if current == 0.0:
        if target == 0.0:
            return ScaleResult(x, 1.0, achieved_mean=0.0)
        raise RescaleError(f"{name}: weighted mean is zero but target mean is {target!r}")
    if upper is not None and target > upper:
        raise RescaleError(f"{name}: target mean {target} exceeds cap {upper}")

    factor = target / current
    if abs(factor - 1.0) <= _IDENTITY_EPS:
        factor = 1.0
    out = x * factor
    if upper is None or out.max() <= upper:
        return ScaleResult(out, factor, achieved_mean=weighted_mean(out, w))

    goal = target * total_w
    iterations = 0
    while out.max() > upper:
        if iterations >= max_iter:
            break
        iterations += 1
        np.minimum(out, upper, out=out)
        capped = out >= upper
        fixed_mass = float((w[capped] * upper).sum())
        free_mass = float((w[~capped] * out[~capped]).sum())
        if free_mass <= 0.0:
            break
        out[~capped] *= (goal - fixed_mass) / free_mass
    np.minimum(out, upper, out=out)
    achieved = weighted_mean(out, w)
    if abs(achieved - target) > tol:
        raise RescaleError(
            f"{name}: clipping at {upper} left mean {achieved:.9g} vs target {target:.9g} "
            f"after {iterations} iterations"
        )
    return ScaleResult(
        out,
        factor,
        clipped=int((out >= upper).sum()),
        iterations=iterations,
        achieved_mean=achieved,
        notes={"cap": upper},
    )

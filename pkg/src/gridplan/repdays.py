"""Representative-day selection by agglomerative hierarchical clustering.

Days are described by the concatenated, peak-normalized 24-hour profiles of
every input series.  Clusters are merged with Ward's criterion, the member
closest to each cluster mean becomes the representative day, and its weight is
the cluster size in days.  Finally each series is rescaled so the weighted
representative mean matches the full-year mean.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .scaling import RescaleError, scale_to_mean

logger = logging.getLogger(__name__)

HOURS_PER_DAY = 24
VALID_LENGTHS = (8760, 8784)


class SeriesKind(str, Enum):
    DEMAND = "demand"
    WIND_CF = "wind_cf"
    SOLAR_CF = "solar_cf"

    @property
    def is_cf(self) -> bool:
        return self is not SeriesKind.DEMAND


class ProfileError(ValueError):
    """Invalid hourly input (length, range, normalization)."""


@dataclass(frozen=True)
class HourlyProfile:
    series_id: str
    region: str
    kind: SeriesKind
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", SeriesKind(self.kind))
        if values.ndim != 1 or values.size not in VALID_LENGTHS:
            raise ProfileError(f"{self.series_id}: expected 8760 or 8784 hourly values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ProfileError(f"{self.series_id}: non-finite values")
        if values.min() < 0:
            raise ProfileError(f"{self.series_id}: negative values")
        if self.kind.is_cf and values.max() > 1.0:
            raise ProfileError(f"{self.series_id}: capacity factors must lie in [0, 1]")

    @property
    def n_days(self) -> int:
        return self.values.size // HOURS_PER_DAY

    def daily(self) -> np.ndarray:
        return self.values.reshape(self.n_days, HOURS_PER_DAY)


def infer_kind(series_id: str) -> SeriesKind:
    """Guess the series kind from its column name (``BA_demand``, ``ME_wind_cf`` ...)."""
    low = series_id.lower()
    if "demand" in low or "load" in low:
        return SeriesKind.DEMAND
    if "wind" in low:
        return SeriesKind.WIND_CF
    if "solar" in low or "pv" in low:
        return SeriesKind.SOLAR_CF
    raise ProfileError(f"cannot infer series kind from name {series_id!r}")


def infer_region(series_id: str) -> str:
    return series_id.split("_", 1)[0]


@dataclass(frozen=True)
class DayFeatureMatrix:
    rows: np.ndarray
    series_ids: tuple[str, ...]
    norms: Mapping[str, float]

    @property
    def n_days(self) -> int:
        return self.rows.shape[0]

    @property
    def n_series(self) -> int:
        return len(self.series_ids)


@dataclass(frozen=True)
class RepresentativeDaySet:
    day_indices: tuple[int, ...]
    weights: np.ndarray
    series: Mapping[str, np.ndarray]
    kinds: Mapping[str, SeriesKind]
    scale_factors: Mapping[str, float] = field(default_factory=dict)
    clip_report: Mapping[str, dict] = field(default_factory=dict)
    assignment: np.ndarray | None = None

    @property
    def k(self) -> int:
        return len(self.day_indices)

    @property
    def n_days(self) -> int:
        return int(round(float(self.weights.sum())))

    def weighted_mean(self, series_id: str) -> float:
        vals = self.series[series_id]
        return float((vals.sum(axis=1) * self.weights).sum() / (HOURS_PER_DAY * self.weights.sum()))

    def relative_weights(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def expanded(self, series_id: str) -> np.ndarray:
        """Weight-expanded hourly values: each representative day repeated by its weight."""
        counts = np.rint(self.weights).astype(int)
        return np.repeat(self.series[series_id], counts, axis=0).ravel()


def _as_profile_list(profiles: Iterable[HourlyProfile] | Mapping[str, HourlyProfile]) -> list[HourlyProfile]:
    if isinstance(profiles, Mapping):
        profiles = profiles.values()
    return list(profiles)


def build_day_features(profiles: Iterable[HourlyProfile]) -> DayFeatureMatrix:
    """Stack each day's peak-normalized 24-hour values of all series into one row."""
    profiles = _as_profile_list(profiles)
    if not profiles:
        raise ProfileError("at least one profile is required")
    lengths = {p.values.size for p in profiles}
    if len(lengths) != 1:
        raise ProfileError(f"profiles have mismatched lengths: {sorted(lengths)}")
    blocks = []
    norms = {}
    for p in profiles:
        peak = float(p.values.max())
        if peak <= 0.0:
            raise ProfileError(f"cannot normalize all-zero series {p.series_id!r}")
        norms[p.series_id] = peak
        blocks.append(p.daily() / peak)
    rows = np.hstack(blocks)
    return DayFeatureMatrix(rows=rows, series_ids=tuple(p.series_id for p in profiles), norms=norms)


def _ward_cost(size_a, centroid_a, sizes, centroids):
    diff = centroids - centroid_a
    return (size_a * sizes / (size_a + sizes)) * np.einsum("ij,ij->i", diff, diff)


def cluster_days(matrix: DayFeatureMatrix | np.ndarray, k: int, linkage: str = "ward") -> np.ndarray:
    """Agglomerative clustering of days into ``k`` groups.

    Each cluster lives in the slot of its smallest member day.  At every step the
    pair with the lowest merge cost is joined; exact ties go to the
    lexicographically smallest (slot_i, slot_j) pair.  Returned labels are
    0..k-1 ordered by each cluster's smallest member day.
    """
    rows = matrix.rows if isinstance(matrix, DayFeatureMatrix) else np.asarray(matrix, dtype=float)
    n = rows.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be within [1, {n}], got {k}")
    if linkage not in ("ward", "centroid"):
        raise ValueError(f"unsupported linkage {linkage!r}")

    sizes = np.ones(n)
    centroids = rows.astype(float).copy()
    active = np.ones(n, dtype=bool)
    owner = np.arange(n)

    cost = np.full((n, n), np.inf)
    for i in range(n - 1):
        if linkage == "ward":
            cost[i, i + 1:] = _ward_cost(1.0, centroids[i], sizes[i + 1:], centroids[i + 1:])
        else:
            d = centroids[i + 1:] - centroids[i]
            cost[i, i + 1:] = np.einsum("ij,ij->i", d, d)

    for _ in range(n - k):
        flat = int(np.argmin(cost))
        i, j = divmod(flat, n)
        # i < j always holds (upper triangle only); j is absorbed into slot i
        total = sizes[i] + sizes[j]
        centroids[i] = (sizes[i] * centroids[i] + sizes[j] * centroids[j]) / total
        sizes[i] = total
        active[j] = False
        owner[owner == j] = i
        cost[j, :] = np.inf
        cost[:, j] = np.inf

        others = np.flatnonzero(active)
        others = others[others != i]
        if others.size:
            if linkage == "ward":
                c = _ward_cost(sizes[i], centroids[i], sizes[others], centroids[others])
            else:
                d = centroids[others] - centroids[i]
                c = np.einsum("ij,ij->i", d, d)
            lo = others < i
            cost[others[lo], i] = c[lo]
            cost[i, others[~lo]] = c[~lo]

    slots = np.unique(owner)
    relabel = {int(s): lab for lab, s in enumerate(slots)}
    return np.array([relabel[int(o)] for o in owner], dtype=int)


def _nearest_to_mean(rows: np.ndarray, members: np.ndarray) -> int:
    block = rows[members]
    mean = block.mean(axis=0)
    dist = np.sqrt(((block - mean) ** 2).sum(axis=1))
    # argmin returns the first minimum; members are sorted so ties go to the lowest day
    return int(members[int(np.argmin(dist))])


def pick_representatives(
    matrix: DayFeatureMatrix,
    assignment: Sequence[int],
    profiles: Iterable[HourlyProfile] | None = None,
) -> RepresentativeDaySet:
    """Choose per cluster the member day nearest the cluster mean; weight = cluster size.

    Without ``profiles`` the representative series are the normalized features.
    """
    assignment = np.asarray(assignment, dtype=int)
    if assignment.shape != (matrix.n_days,):
        raise ValueError("assignment must cover every day")
    labels = np.unique(assignment)
    reps, weights = [], []
    for lab in labels:
        members = np.flatnonzero(assignment == lab)
        if members.size == 0:  # pragma: no cover - np.unique never yields empty labels
            raise RuntimeError(f"cluster {lab} is empty")
        reps.append(_nearest_to_mean(matrix.rows, members))
        weights.append(float(members.size))
    order = np.argsort(reps, kind="stable")
    reps = [reps[i] for i in order]
    weights = np.array([weights[i] for i in order])

    series, kinds = {}, {}
    if profiles is not None:
        for p in _as_profile_list(profiles):
            series[p.series_id] = p.daily()[reps].copy()
            kinds[p.series_id] = p.kind
    else:
        for s, sid in enumerate(matrix.series_ids):
            block = matrix.rows[:, s * HOURS_PER_DAY:(s + 1) * HOURS_PER_DAY]
            series[sid] = block[reps].copy()
            kinds[sid] = SeriesKind.WIND_CF
    return RepresentativeDaySet(
        day_indices=tuple(int(r) for r in reps),
        weights=weights,
        series=series,
        kinds=kinds,
        assignment=assignment,
    )


def rescale_to_annual_means(repset: RepresentativeDaySet, profiles: Iterable[HourlyProfile]) -> RepresentativeDaySet:
    """Scale each series so its weighted representative mean equals the full-year mean.

    Capacity-factor series are capped at 1.0; excess is redistributed over the
    unclipped hours and a clip report is recorded for that series.
    """
    profiles = {p.series_id: p for p in _as_profile_list(profiles)}
    series, factors, clips = {}, {}, {}
    hourly_weights = np.repeat(repset.weights[:, None], HOURS_PER_DAY, axis=1)
    for sid, vals in repset.series.items():
        if sid not in profiles:
            raise ProfileError(f"no source profile for series {sid!r}")
        prof = profiles[sid]
        target = float(prof.values.mean())
        upper = 1.0 if prof.kind.is_cf else None
        try:
            res = scale_to_mean(vals, target, weights=hourly_weights, upper=upper, name=sid)
        except RescaleError:
            logger.error("rescaling failed for %s", sid)
            raise
        series[sid] = res.values
        factors[sid] = res.factor
        if res.clipped:
            clips[sid] = {"clipped_hours": res.clipped, "iterations": res.iterations,
                          "achieved_mean": res.achieved_mean, "target_mean": target}
            logger.warning("%s: %d representative hours clipped at 1.0", sid, res.clipped)
    return RepresentativeDaySet(
        day_indices=repset.day_indices,
        weights=repset.weights.copy(),
        series=series,
        kinds=dict(repset.kinds),
        scale_factors=factors,
        clip_report=clips,
        assignment=repset.assignment,
    )


def extract_series(repset: RepresentativeDaySet, profile: HourlyProfile) -> np.ndarray:
    """Pick an additional hourly series at the representative days and rescale it."""
    vals = profile.daily()[list(repset.day_indices)]
    hourly_weights = np.repeat(repset.weights[:, None], HOURS_PER_DAY, axis=1)
    upper = 1.0 if profile.kind.is_cf else None
    return scale_to_mean(vals, float(profile.values.mean()), weights=hourly_weights,
                         upper=upper, name=profile.series_id).values


@dataclass(frozen=True)
class DurationCurveError:
    series_id: str
    rmse: float
    max_abs: float
    nrmse: float


def duration_curve_error(profiles: Iterable[HourlyProfile], repset: RepresentativeDaySet) -> dict[str, DurationCurveError]:
    """Compare sorted full-year curves with weight-expanded representative curves."""
    out = {}
    for p in _as_profile_list(profiles):
        if p.series_id not in repset.series:
            continue
        full = np.sort(p.values)[::-1]
        approx = np.sort(repset.expanded(p.series_id))[::-1]
        if approx.size != full.size:
            raise ValueError(f"{p.series_id}: expanded curve has {approx.size} hours, source {full.size}")
        diff = full - approx
        rmse = float(np.sqrt(np.mean(diff ** 2)))
        peak = float(full[0]) or 1.0
        out[p.series_id] = DurationCurveError(p.series_id, rmse, float(np.abs(diff).max()), rmse / peak)
    return out


def represent(
    profiles: Iterable[HourlyProfile],
    k: int = 15,
    cluster_on: Sequence[str] | None = None,
    linkage: str = "ward",
) -> RepresentativeDaySet:
    """Full pipeline: features, clustering, representatives, rescaling.

    ``cluster_on`` restricts which series drive the clustering; every profile
    is still reported at the chosen days.
    """
    profiles = _as_profile_list(profiles)
    drivers = profiles if cluster_on is None else [p for p in profiles if p.series_id in set(cluster_on)]
    if cluster_on is not None and len(drivers) != len(set(cluster_on)):
        missing = set(cluster_on) - {p.series_id for p in drivers}
        raise ProfileError(f"unknown clustering series: {sorted(missing)}")
    matrix = build_day_features(drivers)
    assignment = cluster_days(matrix, k, linkage=linkage)
    raw = pick_representatives(matrix, assignment, profiles)
    return rescale_to_annual_means(raw, profiles)


# --- CSV interface -------------------------------------------------------


def read_profiles_csv(path, region: str | None = None) -> list[HourlyProfile]:
    """Read ``hour,<series_id>...``; region and kind come from the column names."""
    import pandas as pd

    df = pd.read_csv(path)
    if df.columns[0] != "hour":
        raise ProfileError(f"{path}: first column must be 'hour'")
    df = df.sort_values("hour", kind="stable")
    return [
        HourlyProfile(col, region or infer_region(col), infer_kind(col), df[col].to_numpy(dtype=float))
        for col in df.columns[1:]
    ]


def _fmt(x: float) -> str:
    s = format(float(x), ".12g")
    return "0" if s == "-0" else s


def write_repdays_csv(repset: RepresentativeDaySet, path) -> None:
    ids = list(repset.series)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["rep_day", "weight", "hour", *ids]) + "\n")
        for r, day in enumerate(repset.day_indices):
            for h in range(HOURS_PER_DAY):
                vals = [_fmt(repset.series[s][r, h]) for s in ids]
                fh.write(",".join([str(day), _fmt(repset.weights[r]), str(h), *vals]) + "\n")


def read_repdays_csv(path) -> RepresentativeDaySet:
    import pandas as pd

    df = pd.read_csv(path)
    for col in ("rep_day", "weight", "hour"):
        if col not in df.columns:
            raise ProfileError(f"{path}: missing column {col!r}")
    days = list(dict.fromkeys(df["rep_day"].astype(int)))
    weights = np.array([float(df.loc[df["rep_day"] == d, "weight"].iloc[0]) for d in days])
    series, kinds = {}, {}
    for col in df.columns[3:]:
        block = np.zeros((len(days), HOURS_PER_DAY))
        for r, d in enumerate(days):
            sub = df[df["rep_day"] == d].sort_values("hour")
            block[r] = sub[col].to_numpy(dtype=float)
        series[col] = block
        try:
            kinds[col] = infer_kind(col)
        except ProfileError:
            kinds[col] = SeriesKind.DEMAND
    return RepresentativeDaySet(tuple(days), weights, series, kinds)


def write_errors_csv(errors: Mapping[str, DurationCurveError], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("series_id,rmse,max_abs,nrmse\n")
        for sid in errors:
            e = errors[sid]
            fh.write(f"{sid},{_fmt(e.rmse)},{_fmt(e.max_abs)},{_fmt(e.nrmse)}\n")

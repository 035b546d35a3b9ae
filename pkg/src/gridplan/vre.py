"""Land-eligibility and capacity-factor characterization of wind and solar resources.

The chain is: eligible land per region and land class, stratified point
samples of a high-resolution CF raster inside each grid cell, area-weighted
shares of four CF bins, per-bin land budgets (eligible land x share),
capacity potentials at a fixed installable density, and hourly CF series
rescaled to each bin's average CF.
"""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .scaling import RescaleError, scale_to_mean

logger = logging.getLogger(__name__)

CAPACITY_DENSITY_MW_PER_KM2 = 1.7
LAND_USE_KM2_PER_MW = 0.588
DEFAULT_POINTS_PER_CELL = 10_000
DEFAULT_SEED = 42
# 30 km expressed in degrees of latitude
DEFAULT_CELL_SIZE_DEG = 0.27


class LandClass(str, Enum):
    SHARED = "shared"
    AGRICULTURAL = "agricultural"
    OTHER = "other"


class ResourceError(ValueError):
    pass


@dataclass(frozen=True)
class LandCell:
    cell_id: str
    region: str
    lon: float
    lat: float
    eligible_km2: float
    land_class: LandClass = LandClass.SHARED

    def __post_init__(self):
        object.__setattr__(self, "land_class", LandClass(self.land_class))
        if self.eligible_km2 < 0:
            raise ResourceError(f"cell {self.cell_id}: negative eligible area")


@dataclass(frozen=True)
class EligibleLandGrid:
    cells: tuple[LandCell, ...]
    cell_size_deg: float = DEFAULT_CELL_SIZE_DEG

    def __post_init__(self):
        cells = tuple(self.cells)
        ids = [c.cell_id for c in cells]
        if len(ids) != len(set(ids)):
            raise ResourceError("duplicate cell_id in land grid")
        object.__setattr__(self, "cells", cells)

    @property
    def regions(self) -> tuple[str, ...]:
        return tuple(sorted({c.region for c in self.cells}))

    def region_cells(self, region: str, classes: Iterable[LandClass | str] | None = None) -> list[LandCell]:
        wanted = None if classes is None else {LandClass(c) for c in classes}
        return [c for c in self.cells if c.region == region and (wanted is None or c.land_class in wanted)]


@dataclass(frozen=True)
class CFBin:
    lo: float
    hi: float
    closed: bool = False

    @property
    def label(self) -> str:
        return f"{round(self.lo * 100):d}-{round(self.hi * 100):d}"

    def contains(self, cf: np.ndarray) -> np.ndarray:
        upper = cf <= self.hi if self.closed else cf < self.hi
        return (cf >= self.lo) & upper


@dataclass(frozen=True)
class CFBinSpec:
    bins: tuple[CFBin, ...]
    exclusion_threshold: float = 0.10

    def __post_init__(self):
        bins = tuple(self.bins)
        if not bins:
            raise ResourceError("at least one CF bin required")
        if abs(bins[0].lo - self.exclusion_threshold) > 1e-12:
            raise ResourceError("first bin must start at the exclusion threshold")
        for a, b in zip(bins, bins[1:]):
            if abs(a.hi - b.lo) > 1e-12 or a.closed:
                raise ResourceError("bins must be contiguous, ordered and half-open")
        if abs(bins[-1].hi - 1.0) > 1e-12 or not bins[-1].closed:
            raise ResourceError("last bin must close at CF = 1.0")
        object.__setattr__(self, "bins", bins)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.bins)


DEFAULT_BIN_SPEC = CFBinSpec(
    bins=(CFBin(0.10, 0.20), CFBin(0.20, 0.30), CFBin(0.30, 0.40), CFBin(0.40, 1.0, closed=True)),
    exclusion_threshold=0.10,
)


@dataclass(frozen=True)
class BinShares:
    shares: np.ndarray
    excluded_share: float
    avg_cf: np.ndarray  # NaN where a bin received no samples
    n_samples: int


@dataclass(frozen=True)
class CFRasterSample:
    """Per-cell CF samples drawn from a raster."""

    samples: Mapping[str, np.ndarray]
    seed: int = DEFAULT_SEED
    n_points: int = 0

    def count(self, cell_id: str) -> int:
        return int(self.samples[cell_id].size)


class CFRaster:
    """Nearest-pixel lookup over a (lon, lat, cf) point raster."""

    def __init__(self, lon, lat, cf):
        from scipy.spatial import cKDTree

        self.lon = np.asarray(lon, dtype=float)
        self.lat = np.asarray(lat, dtype=float)
        self.cf = np.asarray(cf, dtype=float)
        if self.cf.size == 0:
            raise ResourceError("empty CF raster")
        if np.any((self.cf < 0) | (self.cf > 1)) or not np.all(np.isfinite(self.cf)):
            raise ResourceError("raster capacity factors must lie in [0, 1]")
        self._tree = cKDTree(np.column_stack([self.lon, self.lat]))

    def lookup(self, lon: np.ndarray, lat: np.ndarray) -> np.ndarray:
        _, idx = self._tree.query(np.column_stack([lon, lat]))
        return self.cf[idx]


# --- land and capacity ----------------------------------------------------


def eligible_area(grid: EligibleLandGrid, region: str, classes: Iterable[LandClass | str] = (LandClass.SHARED,)) -> float:
    """Total eligible km2 of ``region`` restricted to the given land classes."""
    if region not in grid.regions:
        raise ResourceError(f"unknown region {region!r}")
    return float(math.fsum(c.eligible_km2 for c in grid.region_cells(region, classes)))


def capacity_potential(area_km2: float, density: float = CAPACITY_DENSITY_MW_PER_KM2) -> float:
    if area_km2 < 0:
        raise ResourceError(f"negative area {area_km2}")
    return float(area_km2) * density


# --- stratified sampling ----------------------------------------------------


def _cell_rng(seed: int, cell_id: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(cell_id.encode())]))


def stratified_points(cell: LandCell, n_points: int, cell_size_deg: float, rng: np.random.Generator):
    """One jittered point per stratum of a near-square stratification of the cell."""
    if n_points < 1:
        raise ResourceError("n_points must be >= 1")
    nx = math.ceil(math.sqrt(n_points))
    ny = math.ceil(n_points / nx)
    idx = np.arange(n_points)
    ix, iy = idx % nx, idx // nx
    u = rng.random((2, n_points))
    x = (ix + u[0]) / nx
    y = (iy + u[1]) / ny
    lon = cell.lon - cell_size_deg / 2 + x * cell_size_deg
    lat = cell.lat - cell_size_deg / 2 + y * cell_size_deg
    return lon, lat


def sample_raster(
    grid: EligibleLandGrid,
    raster: CFRaster,
    n_points: int = DEFAULT_POINTS_PER_CELL,
    seed: int = DEFAULT_SEED,
) -> CFRasterSample:
    """Draw ``n_points`` stratified samples per cell; each cell has its own seeded substream."""
    samples = {}
    for cell in grid.cells:
        lon, lat = stratified_points(cell, n_points, grid.cell_size_deg, _cell_rng(seed, cell.cell_id))
        samples[cell.cell_id] = raster.lookup(lon, lat)
    return CFRasterSample(samples, seed=seed, n_points=n_points)


def bin_shares(samples, spec: CFBinSpec = DEFAULT_BIN_SPEC, weights=None) -> BinShares:
    """Share of (weighted) sample points per CF bin, plus the excluded share below the threshold."""
    cf = np.asarray(samples, dtype=float).ravel()
    if cf.size == 0:
        raise ResourceError("empty sample set")
    w = np.ones_like(cf) if weights is None else np.broadcast_to(np.asarray(weights, dtype=float), cf.shape)
    total = float(w.sum())
    if total <= 0:
        return BinShares(np.zeros(len(spec.bins)), 1.0, np.full(len(spec.bins), np.nan), cf.size)
    shares = np.zeros(len(spec.bins))
    avg = np.full(len(spec.bins), np.nan)
    for b, cfbin in enumerate(spec.bins):
        mask = cfbin.contains(cf)
        wb = float(w[mask].sum())
        shares[b] = wb / total
        if wb > 0:
            avg[b] = float((cf[mask] * w[mask]).sum() / wb)
    excluded = float(w[cf < spec.exclusion_threshold].sum()) / total
    return BinShares(shares, excluded, avg, cf.size)


def regional_bin_shares(
    grid: EligibleLandGrid,
    sample: CFRasterSample,
    region: str,
    classes: Iterable[LandClass | str] = (LandClass.SHARED,),
    spec: CFBinSpec = DEFAULT_BIN_SPEC,
) -> BinShares:
    """Area-weighted bin shares over a region's cells: each point carries area / n_points."""
    cells = grid.region_cells(region, classes)
    if not cells:
        return BinShares(np.zeros(len(spec.bins)), 1.0, np.full(len(spec.bins), np.nan), 0)
    cfs, ws = [], []
    for c in cells:
        s = sample.samples[c.cell_id]
        cfs.append(s)
        ws.append(np.full(s.size, c.eligible_km2 / s.size))
    return bin_shares(np.concatenate(cfs), spec, np.concatenate(ws))


def allocate_bin_land(eligible_km2: float, shares: BinShares | Sequence[float], excluded_share: float | None = None):
    """Available land per CF bin = eligible land x bin share.

    Returns ``(per_bin_km2, excluded_km2)``.
    """
    if eligible_km2 < 0:
        raise ResourceError("negative eligible land")
    if isinstance(shares, BinShares):
        excluded_share = shares.excluded_share
        shares = shares.shares
    shares = np.asarray(shares, dtype=float)
    if excluded_share is None:
        excluded_share = 1.0 - float(shares.sum())
    if np.any(shares < 0) or excluded_share < -1e-12 or abs(shares.sum() + excluded_share - 1.0) > 1e-9:
        raise ResourceError("shares must be non-negative and sum to 1 with the excluded share")
    return eligible_km2 * shares, eligible_km2 * excluded_share


def rescale_cf_series(hourly_cf, target_mean: float) -> np.ndarray:
    """Scale an hourly CF series to ``target_mean``, capping at 1.0 with redistribution."""
    if not 0.0 < target_mean < 1.0:
        raise ResourceError(f"target mean must lie in (0, 1), got {target_mean}")
    cf = np.asarray(hourly_cf, dtype=float)
    if cf.mean() <= 0:
        raise RescaleError("source capacity-factor series has zero mean")
    return scale_to_mean(cf, target_mean, upper=1.0, name="cf_series").values


# --- regional resources ------------------------------------------------------


@dataclass(frozen=True)
class BinResource:
    label: str
    share: float
    agri_share: float
    avg_cf: float | None
    land_km2: float
    agri_land_km2: float
    wind_cf: np.ndarray | None = field(default=None, repr=False)

    @property
    def potential_mw(self) -> float:
        return capacity_potential(self.land_km2)

    @property
    def agri_potential_mw(self) -> float:
        return capacity_potential(self.agri_land_km2)


@dataclass(frozen=True)
class RegionalResource:
    region: str
    bins: tuple[BinResource, ...]
    excluded_share: float
    excluded_land_km2: float
    eligible_km2: float = 0.0
    agri_eligible_km2: float = 0.0
    solar_cf: np.ndarray | None = field(default=None, repr=False)

    @property
    def solar_only_mw(self) -> float:
        return capacity_potential(self.excluded_land_km2)

    @property
    def shared_mw(self) -> float:
        return math.fsum(b.potential_mw for b in self.bins)

    @property
    def agricultural_mw(self) -> float:
        return math.fsum(b.agri_potential_mw for b in self.bins)

    def check(self, tol: float = 1e-9) -> None:
        total = sum(b.share for b in self.bins) + self.excluded_share
        if abs(total - 1.0) > tol and self.eligible_km2 > 0:
            raise ResourceError(f"{self.region}: shares sum to {total}")


def build_regional_resources(
    grid: EligibleLandGrid,
    sample: CFRasterSample,
    spec: CFBinSpec = DEFAULT_BIN_SPEC,
    wind_hourly: Mapping[str, np.ndarray] | None = None,
    solar_hourly: Mapping[str, np.ndarray] | None = None,
) -> list[RegionalResource]:
    """Per region: bin shares on shared and agricultural land, land budgets, scaled wind series.

    Average CFs per bin are taken over both land classes.  Land with wind CF
    below the threshold, on shared land, is offered to solar only.
    """
    out = []
    for region in grid.regions:
        shared = regional_bin_shares(grid, sample, region, [LandClass.SHARED], spec)
        agri = regional_bin_shares(grid, sample, region, [LandClass.AGRICULTURAL], spec)
        both = regional_bin_shares(grid, sample, region, [LandClass.SHARED, LandClass.AGRICULTURAL], spec)
        elig = eligible_area(grid, region, [LandClass.SHARED])
        elig_ag = eligible_area(grid, region, [LandClass.AGRICULTURAL])
        land, excluded_land = allocate_bin_land(elig, shared)
        land_ag, _ = allocate_bin_land(elig_ag, agri)
        base_wind = None if wind_hourly is None else wind_hourly.get(region)
        bins = []
        for b, cfbin in enumerate(spec.bins):
            avg = None if np.isnan(both.avg_cf[b]) else float(both.avg_cf[b])
            series = None
            if base_wind is not None and avg is not None:
                series = rescale_cf_series(base_wind, avg)
            bins.append(BinResource(cfbin.label, float(shared.shares[b]), float(agri.shares[b]),
                                    avg, float(land[b]), float(land_ag[b]), series))
        res = RegionalResource(region, tuple(bins), shared.excluded_share, float(excluded_land), elig, elig_ag,
                               None if solar_hourly is None else solar_hourly.get(region))
        res.check()
        out.append(res)
    return out


@dataclass(frozen=True)
class PotentialInventory:
    regions: Mapping[str, Mapping[str, float]]
    totals: Mapping[str, float]

    @property
    def grand_total_mw(self) -> float:
        return self.totals["total"]

    def to_frame(self, unit: str = "GW"):
        import pandas as pd

        div = 1000.0 if unit == "GW" else 1.0
        rows = [{"region": r, **{k: v / div for k, v in vals.items()}} for r, vals in self.regions.items()]
        rows.append({"region": "Total", **{k: v / div for k, v in self.totals.items()}})
        return pd.DataFrame(rows)


def summarize_potentials(resources: Iterable[RegionalResource]) -> PotentialInventory:
    """Per-region subtotals and totals (MW) of shared-land, agricultural and solar-only potential."""
    regions = {}
    for r in sorted(resources, key=lambda x: x.region):
        vals = {"shared": r.shared_mw, "agricultural": r.agricultural_mw, "solar_only": r.solar_only_mw}
        vals["total"] = math.fsum(vals.values())
        regions[r.region] = vals
    totals = {k: math.fsum(v[k] for v in regions.values()) for k in ("shared", "agricultural", "solar_only", "total")}
    return PotentialInventory(regions, totals)


# --- CSV interface -------------------------------------------------------------


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    s = format(float(x), ".12g")
    return "0" if s == "-0" else s


def read_land_csv(path, cell_size_deg: float = DEFAULT_CELL_SIZE_DEG) -> EligibleLandGrid:
    import pandas as pd

    df = pd.read_csv(path, dtype={"cell_id": str, "region": str})
    need = {"cell_id", "region", "lon", "lat", "eligible_km2", "class"}
    if need - set(df.columns):
        raise ResourceError(f"{path}: missing columns {sorted(need - set(df.columns))}")
    cells = tuple(
        LandCell(cid, reg, float(lon), float(lat), float(area), LandClass(cls))
        for cid, reg, lon, lat, area, cls in zip(
            df["cell_id"], df["region"], df["lon"], df["lat"], df["eligible_km2"], df["class"]
        )
    )
    return EligibleLandGrid(cells, cell_size_deg)


def read_raster_csv(path) -> CFRaster:
    import pandas as pd

    df = pd.read_csv(path)
    return CFRaster(df["lon"].to_numpy(), df["lat"].to_numpy(), df["cf"].to_numpy())


def write_inventory_csv(resources: Sequence[RegionalResource], path) -> None:
    """``region,bin,share,avg_cf,land_km2,potential_mw``; agricultural bins carry an ``ag:`` prefix."""
    with open(path, "w", newline="") as fh:
        fh.write("region,bin,share,avg_cf,land_km2,potential_mw\n")
        for r in sorted(resources, key=lambda x: x.region):
            for b in r.bins:
                fh.write(f"{r.region},{b.label},{_fmt(b.share)},{_fmt(b.avg_cf)},{_fmt(b.land_km2)},{_fmt(b.potential_mw)}\n")
            for b in r.bins:
                fh.write(f"{r.region},ag:{b.label},{_fmt(b.agri_share)},{_fmt(b.avg_cf)},"
                         f"{_fmt(b.agri_land_km2)},{_fmt(b.agri_potential_mw)}\n")
            fh.write(f"{r.region},excluded,{_fmt(r.excluded_share)},,{_fmt(r.excluded_land_km2)},{_fmt(r.solar_only_mw)}\n")


def read_inventory_csv(path):
    """Land budgets keyed ``<region>/<bin>`` in km2."""
    import pandas as pd

    df = pd.read_csv(path, dtype={"region": str, "bin": str})
    return {f"{r.region}/{r.bin}": float(r.land_km2) for r in df.itertuples()}


def write_series_csv(resources: Sequence[RegionalResource], path) -> None:
    cols, data = [], []
    for r in sorted(resources, key=lambda x: x.region):
        for b in r.bins:
            if b.wind_cf is not None:
                cols.append(f"{r.region}_wind_{b.label}")
                data.append(b.wind_cf)
        if r.solar_cf is not None:
            cols.append(f"{r.region}_solar_cf")
            data.append(np.asarray(r.solar_cf))
    if not data:
        raise ResourceError("no hourly series to write")
    n = len(data[0])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["hour", *cols]) + "\n")
        for h in range(n):
            fh.write(",".join([str(h), *(_fmt(d[h]) for d in data)]) + "\n")

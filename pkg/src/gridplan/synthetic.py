"""Synthetic desk-scale inputs: hourly profiles, land grids, rasters, cascades.

Everything here is seeded and deterministic.  The numbers are illustrative,
not calibrated to any real system.
"""

from __future__ import annotations

import math

import numpy as np

from .repdays import HourlyProfile, SeriesKind

REGIONS = ("BA", "ME", "RS")
RIVERS = ("Cehotina", "Lim", "Piva", "Tara", "Uvac")


def demand_profile(n_days: int = 365, peak_mw: float = 2000.0, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    day = np.arange(n_days)[:, None]
    hour = np.arange(24)[None, :]
    seasonal = 1.0 + 0.18 * np.cos(2 * np.pi * (day - 15) / n_days)
    daily = 0.78 + 0.12 * np.sin(np.pi * (hour - 6) / 12).clip(0) + 0.08 * np.exp(-((hour - 19) ** 2) / 6.0)
    weekly = np.where((day % 7) >= 5, 0.93, 1.0)
    noise = 1.0 + 0.025 * rng.standard_normal((n_days, 24))
    load = seasonal * daily * weekly * noise
    return (peak_mw * load / load.max()).ravel()


def wind_profile(n_days: int = 365, mean_cf: float = 0.22, seed: int = 1) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = n_days * 24
    z = np.zeros(n)
    eps = rng.standard_normal(n)
    for t in range(1, n):
        z[t] = 0.97 * z[t - 1] + 0.25 * eps[t]
    seasonal = 0.15 * np.cos(2 * np.pi * (np.arange(n) / 24 - 20) / n_days)
    raw = 1.0 / (1.0 + np.exp(-(z + seasonal - 1.0)))
    cf = np.clip(raw * mean_cf / raw.mean(), 0.0, 0.95)
    return cf


def solar_profile(n_days: int = 365, seed: int = 2, latitude: float = 44.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    day = np.arange(n_days)[:, None]
    hour = np.arange(24)[None, :] + 0.5
    decl = 23.44 * np.sin(2 * np.pi * (284 + day) / 365.0)
    phi, delta = np.radians(latitude), np.radians(decl)
    omega = np.radians(15.0 * (hour - 12.0))
    elevation = np.sin(phi) * np.sin(delta) + np.cos(phi) * np.cos(delta) * np.cos(omega)
    clear = np.clip(elevation, 0.0, None)
    clouds = np.clip(1.0 - 0.6 * rng.beta(1.2, 2.5, size=(n_days, 1)), 0.2, 1.0)
    return np.clip(0.85 * clear * clouds, 0.0, 1.0).ravel()


def profile_suite(n_days: int = 365, regions=REGIONS, seed: int = 7) -> list[HourlyProfile]:
    """Demand, wind and solar series per region."""
    out = []
    for r, region in enumerate(regions):
        s = seed + 10 * r
        out.append(HourlyProfile(f"{region}_demand", region, SeriesKind.DEMAND,
                                 demand_profile(n_days, 1500.0 + 500.0 * r, seed=s)))
        out.append(HourlyProfile(f"{region}_wind_cf", region, SeriesKind.WIND_CF,
                                 wind_profile(n_days, 0.2 + 0.02 * r, seed=s + 1)))
        out.append(HourlyProfile(f"{region}_solar_cf", region, SeriesKind.SOLAR_CF,
                                 solar_profile(n_days, seed=s + 2, latitude=42.5 + r)))
    return out


def basin_profiles(n_days: int = 365, seed: int = 7) -> list[HourlyProfile]:
    """One demand, one wind and one solar series (basin aggregate)."""
    return [
        HourlyProfile("demand", "DRB", SeriesKind.DEMAND, demand_profile(n_days, 5000.0, seed=seed)),
        HourlyProfile("wind_cf", "DRB", SeriesKind.WIND_CF, wind_profile(n_days, 0.22, seed=seed + 1)),
        HourlyProfile("solar_cf", "DRB", SeriesKind.SOLAR_CF, solar_profile(n_days, seed=seed + 2)),
    ]


# --- land and raster --------------------------------------------------------


def land_grid(regions=REGIONS, cells_per_side: int = 3, cell_size_deg: float = 0.27, seed: int = 3,
              area_range=(20.0, 120.0)):
    """Small regular grid per region; every third cell is agricultural."""
    from .vre import EligibleLandGrid, LandCell, LandClass

    rng = np.random.default_rng(seed)
    cells = []
    for r, region in enumerate(regions):
        lon0, lat0 = 18.0 + 1.5 * r, 43.0 + 0.4 * r
        for i in range(cells_per_side):
            for j in range(cells_per_side):
                n = i * cells_per_side + j
                cls = LandClass.AGRICULTURAL if n % 3 == 2 else LandClass.SHARED
                area = float(rng.uniform(*area_range))
                cells.append(LandCell(f"{region}-{n:02d}", region, lon0 + i * cell_size_deg,
                                      lat0 + j * cell_size_deg, area, cls))
    return EligibleLandGrid(tuple(cells), cell_size_deg)


def gradient_raster(grid, lo: float = 0.10, hi: float = 0.50, pixels_per_side: int = 250):
    """CF rising linearly west to east across every cell, uniform on [lo, hi)."""
    from .vre import CFRaster

    size = grid.cell_size_deg
    frac = (np.arange(pixels_per_side) + 0.5) / pixels_per_side
    lons, lats, cfs = [], [], []
    for c in grid.cells:
        gx, gy = np.meshgrid(frac, frac, indexing="ij")
        lons.append((c.lon - size / 2 + gx * size).ravel())
        lats.append((c.lat - size / 2 + gy * size).ravel())
        cfs.append((lo + (hi - lo) * gx).ravel())
    return CFRaster(np.concatenate(lons), np.concatenate(lats), np.concatenate(cfs))


def smooth_raster(grid, pixels_per_side: int = 40, seed: int = 5):
    """Spatially smooth CF field (bumps of good wind sites) on [0.02, 0.6]."""
    from .vre import CFRaster

    rng = np.random.default_rng(seed)
    lon_min = min(c.lon for c in grid.cells) - grid.cell_size_deg
    lon_max = max(c.lon for c in grid.cells) + grid.cell_size_deg
    lat_min = min(c.lat for c in grid.cells) - grid.cell_size_deg
    lat_max = max(c.lat for c in grid.cells) + grid.cell_size_deg
    nx = max(2, int((lon_max - lon_min) / grid.cell_size_deg * pixels_per_side / 4))
    ny = max(2, int((lat_max - lat_min) / grid.cell_size_deg * pixels_per_side / 4))
    gx, gy = np.meshgrid(np.linspace(lon_min, lon_max, nx), np.linspace(lat_min, lat_max, ny), indexing="ij")
    field = np.full(gx.shape, 0.12)
    for _ in range(12):
        cx, cy = rng.uniform(lon_min, lon_max), rng.uniform(lat_min, lat_max)
        amp, rad = rng.uniform(0.1, 0.35), rng.uniform(0.1, 0.4)
        field += amp * np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2 * rad ** 2))
    field -= 0.06 * np.sin(3 * gx) ** 2
    return CFRaster(gx.ravel(), gy.ravel(), np.clip(field, 0.02, 0.6).ravel())


def spread_raster(grid, pixels_per_side: int = 60, seed: int = 9, spread: float = 0.32):
    """Per-cell base CF with a smooth west-east ramp, so every CF bin holds some land."""
    from .vre import CFRaster

    rng = np.random.default_rng(seed)
    size = grid.cell_size_deg
    frac = (np.arange(pixels_per_side) + 0.5) / pixels_per_side
    gx, gy = np.meshgrid(frac, frac, indexing="ij")
    lons, lats, cfs = [], [], []
    for c in grid.cells:
        base = rng.uniform(0.16, 0.34)
        wobble = 0.03 * np.sin(2 * np.pi * (gy + rng.uniform()))
        cf = base + spread * (gx - 0.5) + wobble
        lons.append((c.lon - size / 2 + gx * size).ravel())
        lats.append((c.lat - size / 2 + gy * size).ravel())
        cfs.append(np.clip(cf, 0.02, 0.6).ravel())
    return CFRaster(np.concatenate(lons), np.concatenate(lats), np.concatenate(cfs))


# --- cascade -----------------------------------------------------------------

# mean discharge (MCM/day) and spring-peak amplitude per inflow record
RIVER_MEANS = {"Cehotina": 1.9, "Lim": 5.5, "Piva": 6.3, "Tara": 6.9, "Uvac": 1.2, "Drina_catchment": 8.0}


def river_inflows(seed: int = 13, n_days: int = 365) -> dict:
    """Daily discharge with a spring snowmelt peak, autumn rise and AR(1) noise."""
    from .cascade import InflowRecord

    rng = np.random.default_rng(seed)
    day = np.arange(n_days)
    shape = (1.0 + 0.9 * np.exp(-((day - 110) ** 2) / (2 * 30.0 ** 2))
             + 0.35 * np.exp(-((day - 320) ** 2) / (2 * 25.0 ** 2)) - 0.45 * np.exp(-((day - 235) ** 2) / (2 * 35.0 ** 2)))
    out = {}
    for river in sorted(RIVER_MEANS):
        z = np.zeros(n_days)
        eps = rng.standard_normal(n_days)
        for t in range(1, n_days):
            z[t] = 0.9 * z[t - 1] + 0.12 * eps[t]
        q = shape * np.exp(z)
        out[river] = InflowRecord(river, RIVER_MEANS[river] * q / q.mean())
    return out


def basin_cascade():
    """Five-river cascade: three headwater reservoirs, two storage plants on the main stem."""
    from .cascade import CascadeNode as N, CascadeTopology

    def reservoir_pair(name, region, storage, mw, rate):
        return [N(f"res_{name}", "reservoir", region, storage_mcm=storage, level_min_mcm=0.1 * storage),
                N(f"hpp_{name}", "plant", region, capacity_mw=mw, rate_mwh_per_mcm=rate,
                  capex=2.5e6, fixed_om=25e3, life=80),
                N(f"spill_{name}", "spillway", region)]

    nodes = [
        N("seg_Piva", "river_segment", "ME", river="Piva"),
        N("seg_Tara", "river_segment", "ME", river="Tara"),
        N("seg_Cehotina", "river_segment", "ME", river="Cehotina"),
        N("seg_Lim", "river_segment", "ME", river="Lim"),
        N("seg_Uvac", "river_segment", "RS", river="Uvac"),
        N("catch_Drina", "catchment", "BA", river="Drina_catchment"),
        N("seg_Drina_upper", "river_segment", "BA"),
        N("seg_Lim_lower", "river_segment", "RS"),
        N("seg_Drina_mid", "river_segment", "RS"),
        N("seg_outlet", "river_segment", "RS"),
        *reservoir_pair("Piva", "ME", 880.0, 342.0, 400.0),
        *reservoir_pair("Uvac", "RS", 250.0, 36.0, 280.0),
        *reservoir_pair("Visegrad", "BA", 161.0, 315.0, 100.0),
        *reservoir_pair("Bajina", "RS", 340.0, 420.0, 150.0),
        N("hpp_Potpec", "plant", "RS", capacity_mw=51.0, rate_mwh_per_mcm=110.0, capex=3.0e6, fixed_om=25e3, life=80),
        N("spill_Potpec", "spillway", "RS"),
    ]
    links = [
        ("seg_Piva", "res_Piva"), ("res_Piva", "hpp_Piva"), ("res_Piva", "spill_Piva"),
        ("hpp_Piva", "seg_Drina_upper"), ("spill_Piva", "seg_Drina_upper"),
        ("seg_Tara", "seg_Drina_upper"), ("seg_Cehotina", "seg_Drina_upper"), ("catch_Drina", "seg_Drina_upper"),
        ("seg_Uvac", "res_Uvac"), ("res_Uvac", "hpp_Uvac"), ("res_Uvac", "spill_Uvac"),
        ("hpp_Uvac", "seg_Lim_lower"), ("spill_Uvac", "seg_Lim_lower"), ("seg_Lim", "seg_Lim_lower"),
        ("seg_Lim_lower", "hpp_Potpec"), ("seg_Lim_lower", "spill_Potpec"),
        ("hpp_Potpec", "seg_Drina_mid"), ("spill_Potpec", "seg_Drina_mid"),
        ("seg_Drina_upper", "res_Visegrad"), ("res_Visegrad", "hpp_Visegrad"), ("res_Visegrad", "spill_Visegrad"),
        ("hpp_Visegrad", "seg_Drina_mid"), ("spill_Visegrad", "seg_Drina_mid"),
        ("seg_Drina_mid", "res_Bajina"), ("res_Bajina", "hpp_Bajina"), ("res_Bajina", "spill_Bajina"),
        ("hpp_Bajina", "seg_outlet"), ("spill_Bajina", "seg_outlet"),
    ]
    return CascadeTopology(tuple(nodes), tuple(links), ("Cehotina", "Lim", "Piva", "Tara", "Uvac"))


# --- full scenario dataset ---------------------------------------------------

DEMAND_PEAK_MW = {"BA": 2000.0, "ME": 650.0, "RS": 4500.0}
LOSSES = {"BA": 0.10, "ME": 0.12, "RS": 0.13}
BASELINE_1990_T = 45.0e6

# name suffix: (kind, fuel, capex/MW, fixed/MW/yr, var/MWh, life, tCO2/MWh)
_CONVENTIONAL = {
    "coal": ("thermal", "coal", 1.8e6, 45e3, 32.0, 40, 1.05),
    "gas": ("thermal", "gas", 0.9e6, 20e3, 85.0, 30, 0.37),
    "hydro": ("hydro_storage", None, 2.8e6, 20e3, 0.0, 80, 0.0),
}
# residual MW and retirement year of the existing fleet
_FLEET = {
    "BA": {"coal": (1800.0, 2040), "gas": (0.0, None), "hydro": (1100.0, None)},
    "ME": {"coal": (225.0, 2035), "gas": (0.0, None), "hydro": (330.0, None)},
    "RS": {"coal": (4200.0, 2045), "gas": (450.0, 2040), "hydro": (1500.0, None)},
}
_HYDRO_CF = 0.42
# undeveloped hydro outside the cascade
_HYDRO_POTENTIAL_MW = {"BA": 1500.0, "ME": 600.0, "RS": 1200.0}
_WIND = dict(capex=1.25e6, fixed_om=32e3, life=25)
_SOLAR = dict(capex=0.65e6, fixed_om=14e3, life=25)

# border: capacity MW, low price, high price (per MWh)
_TRADE = {
    "BA-HR": (2000.0, 45.0, 120.0), "ME-AL": (600.0, 47.0, 118.0), "ME-IT": (1200.0, 52.0, 125.0),
    "RS-HU": (1500.0, 44.0, 121.0), "RS-RO": (1200.0, 43.0, 117.0), "RS-BG": (1000.0, 46.0, 119.0),
    "BA-ME": (1000.0, None, None), "BA-RS": (1500.0, None, None), "ME-RS": (800.0, None, None),
}


def scenario_technologies(regions=REGIONS, bin_labels=("10-20", "20-30", "30-40", "40-100"), desk: bool = False):
    """Technology list matching the land budgets of :func:`write_dataset`.

    ``desk`` keeps five technologies per region (coal, gas, hydro, one wind, one solar).
    """
    from .esom import Technology

    techs = []
    for r in regions:
        for name, (kind, fuel, capex, fom, vom, life, ef) in _CONVENTIONAL.items():
            res, retire = _FLEET[r][name]
            cf = _HYDRO_CF if kind == "hydro_storage" else 0.85
            cap = res + _HYDRO_POTENTIAL_MW[r] if name == "hydro" else math.inf
            techs.append(Technology(f"{r}_{name}", r, kind, capex=capex, fixed_om=fom, var_om=vom, life=life,
                                    residual_mw=res, retire_year=retire, cf=cf, emission_factor=ef, fuel=fuel,
                                    max_total_mw=cap))
        wind_bins = bin_labels[-2:-1] if desk else bin_labels
        for b in wind_bins:
            techs.append(Technology(f"{r}_wind_{b}", r, "wind", cf=f"{r}_wind_{b}", land_bin=f"{r}/{b}", **_WIND))
            if not desk:
                techs.append(Technology(f"{r}_solar_{b}", r, "solar", cf=f"{r}_solar_cf", land_bin=f"{r}/{b}",
                                        **_SOLAR))
                techs.append(Technology(f"{r}_wind_ag_{b}", r, "wind", cf=f"{r}_wind_{b}", land_bin=f"{r}/ag:{b}",
                                        **_WIND))
        techs.append(Technology(f"{r}_solar_lowcf", r, "solar", cf=f"{r}_solar_cf", land_bin=f"{r}/excluded",
                                **_SOLAR))
    return techs


def write_dataset(out_dir, preset: str = "basin", seed: int = 7) -> dict:
    """Write a complete seeded input directory.  Presets: ``basin`` (cascade, all bins) or ``desk``."""
    from pathlib import Path

    from .cascade import format_topology, write_inflows_csv
    from .esom import write_technologies_csv

    if preset not in ("basin", "desk"):
        raise ValueError(f"unknown preset {preset!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}

    cols = {}
    for r, region in enumerate(REGIONS):
        s = seed + 10 * r
        cols[f"{region}_demand"] = demand_profile(365, DEMAND_PEAK_MW[region], seed=s)
        cols[f"{region}_wind_cf"] = wind_profile(365, 0.2 + 0.02 * r, seed=s + 1)
        cols[f"{region}_solar_cf"] = solar_profile(365, seed=s + 2, latitude=42.5 + r)
    with open(out / "profiles.csv", "w", newline="") as fh:
        names = list(cols)
        fh.write(",".join(["hour", *names]) + "\n")
        for h in range(365 * 24):
            fh.write(",".join([str(h), *(_g(cols[n][h]) for n in names)]) + "\n")
    files["profiles"] = "profiles.csv"

    grid = land_grid(REGIONS, cells_per_side=3, seed=seed + 1, area_range=(300.0, 1500.0))
    with open(out / "land.csv", "w", newline="") as fh:
        fh.write("cell_id,region,lon,lat,eligible_km2,class\n")
        for c in grid.cells:
            fh.write(f"{c.cell_id},{c.region},{_g(c.lon)},{_g(c.lat)},{_g(c.eligible_km2)},{c.land_class.value}\n")
    raster = spread_raster(grid, seed=seed + 2)
    with open(out / "cf_raster.csv", "w", newline="") as fh:
        fh.write("lon,lat,cf\n")
        for lo, la, cf in zip(raster.lon, raster.lat, raster.cf):
            fh.write(f"{_g(lo)},{_g(la)},{_g(cf)}\n")
    files.update(land="land.csv", raster="cf_raster.csv")

    write_technologies_csv(scenario_technologies(desk=preset == "desk"), out / "technologies.csv")
    files["technologies"] = "technologies.csv"

    with open(out / "demand_growth.csv", "w", newline="") as fh:
        fh.write("region,year,factor\n")
        for region, rate in zip(REGIONS, (0.008, 0.010, 0.007)):
            for year in (2020, 2030, 2040, 2050):
                fh.write(f"{region},{year},{_g((1.0 + rate) ** (year - 2020))}\n")
    with open(out / "losses.csv", "w", newline="") as fh:
        fh.write("region,loss\n")
        for region in REGIONS:
            fh.write(f"{region},{_g(LOSSES[region])}\n")
    with open(out / "trade.csv", "w", newline="") as fh:
        fh.write("border,year,price_low,price_high,capacity_mw\n")
        for border, (cap, low, high) in sorted(_TRADE.items()):
            for year in (2020, 2035, 2050):
                drift = 1.0 + 0.004 * (year - 2020)
                lo = "" if low is None else _g(low * drift)
                hi = "" if high is None else _g(high * (1.0 - 0.006 * (year - 2020)))
                fh.write(f"{border},{year},{lo},{hi},{_g(cap)}\n")
    with open(out / "emissions.csv", "w", newline="") as fh:
        fh.write("key,value\n")
        fh.write(f"baseline_t,{_g(BASELINE_1990_T)}\nanchor_2030,0.45\nanchor_2050,0\n")
    files.update(growth="demand_growth.csv", losses="losses.csv", trade="trade.csv", emissions="emissions.csv")

    if preset == "basin":
        (out / "cascade.ini").write_text(format_topology(basin_cascade()), encoding="utf-8")
        write_inflows_csv(river_inflows(seed + 6), out / "inflows.csv")
        files.update(cascade="cascade.ini", inflows="inflows.csv")
    return files


def _g(v) -> str:
    s = format(float(v), ".12g")
    return "0" if s == "-0" else s

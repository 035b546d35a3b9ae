"""Scenario runs: load inputs, apply overrides, build, solve, report.

A run writes plot-ready CSVs (GW, GWh, MtCO2, MCM) plus ``manifest.json``
(config digest, code version, seed, input digests, solver status) into its own
directory.  Wall-clock timings go to ``timings.json`` so that the manifest and
every table are byte-identical across reruns.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .cascade import (
    CascadeFragment,
    annual_water_account,
    build_topology,
    compile_to_model,
    inflow_per_timeslice,
    read_inflows_csv,
    segment_capacities,
    storage_levels,
)
from .esom import (
    AssembledModel,
    EmissionPolicy,
    ModelBuilder,
    ModelSets,
    SystemParams,
    Technology,
    Timeslices,
    balance_residuals,
    horizon,
    read_emissions_csv,
    read_growth_csv,
    read_technologies_csv,
    read_trade_csv,
)
from .lpsolve import LinearProgram, Solution, SolveOptions, Status, solve
from .repdays import RepresentativeDaySet, read_profiles_csv, represent
from .scaling import scale_to_mean
from .vre import (
    DEFAULT_BIN_SPEC,
    LAND_USE_KM2_PER_MW,
    RegionalResource,
    build_regional_resources,
    read_land_csv,
    read_raster_csv,
    sample_raster,
)

logger = logging.getLogger(__name__)

SCENARIOS = ("REF", "AG", "EL")
TRADE_VARIANTS = ("low", "high")
OVERRIDE_TYPES = ("max_new", "max_total", "residual", "land", "emission_limit", "reserve_margin")


class ConfigError(ValueError):
    pass


class RunError(RuntimeError):
    def __init__(self, message: str, report: Mapping | None = None):
        super().__init__(message)
        self.report = dict(report or {})


@dataclass(frozen=True)
class Override:
    """One explicit scenario delta.  ``target`` is a technology, a land bin key or ``*``."""

    type: str
    target: str = "*"
    value: float | str | None = None

    def __post_init__(self):
        if self.type not in OVERRIDE_TYPES:
            raise ConfigError(f"unknown override type {self.type!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    trade_cost: str
    inputs: Path
    output: Path
    overrides: tuple[Override, ...] = ()
    start_year: int = 2020
    end_year: int = 2050
    rep_days: int = 15
    points_per_cell: int = 10_000
    seed: int = 42
    reserve_margin: float = 0.20
    discount_rate: float = 0.05
    ror_credit: float = 0.0
    cascade: bool = True
    solver: str = "auto"
    time_limit: float | None = None
    source_text: str = field(default="", repr=False, compare=False)

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ConfigError(f"scenario name must be one of {SCENARIOS}, got {self.name!r}")
        if self.trade_cost not in TRADE_VARIANTS:
            raise ConfigError(f"trade_cost must be one of {TRADE_VARIANTS}, got {self.trade_cost!r}")
        if self.end_year < self.start_year:
            raise ConfigError("end_year before start_year")

    @property
    def run_id(self) -> str:
        return f"{self.name.lower()}_{self.trade_cost}"

    def digest(self) -> str:
        """Hash of every setting that shapes the results (paths excluded)."""
        payload = {k: v for k, v in dataclasses.asdict(self).items() if k not in ("inputs", "output", "source_text")}
        payload["overrides"] = [dataclasses.asdict(o) for o in self.overrides]
        text = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()


def _parse_value(text: str):
    t = text.strip()
    try:
        return float(t)
    except ValueError:
        return t


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_config(text, base=path.parent)


def parse_config(text: str, base: Path | str = ".") -> ScenarioConfig:
    base = Path(base)
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    if not cp.has_section("scenario"):
        raise ConfigError("missing [scenario] section")
    sc = cp["scenario"]
    known = {"scenario", "inputs", "model", "solver", "output"}
    overrides = []
    for sec in cp.sections():
        if sec.startswith("override"):
            o = cp[sec]
            if "type" not in o:
                raise ConfigError(f"[{sec}] needs a type")
            overrides.append((sec, Override(o["type"].strip(), o.get("target", "*").strip(),
                                            _parse_value(o["value"]) if "value" in o else None)))
        elif sec not in known:
            raise ConfigError(f"unknown section [{sec}]")

    def get(section, key, default, conv=str):
        if cp.has_section(section) and key in cp[section] and cp[section][key].strip() != "":
            return conv(cp[section][key].strip())
        return default

    def as_bool(v: str) -> bool:
        if v.lower() in ("yes", "true", "on", "1"):
            return True
        if v.lower() in ("no", "false", "off", "0"):
            return False
        raise ConfigError(f"not a boolean: {v!r}")

    name = sc.get("name", "").strip().upper()
    trade = sc.get("trade_cost", "").strip().lower()
    inputs = base / get("inputs", "dir", "data")
    output = base / get("output", "dir", f"runs/{name.lower()}_{trade}")
    return ScenarioConfig(
        name=name,
        trade_cost=trade,
        inputs=inputs,
        output=output,
        overrides=tuple(o for _, o in sorted(overrides, key=lambda so: _section_order(so[0]))),
        start_year=get("model", "start_year", 2020, int),
        end_year=get("model", "end_year", 2050, int),
        rep_days=get("model", "rep_days", 15, int),
        points_per_cell=get("model", "points_per_cell", 10_000, int),
        seed=get("model", "seed", get("output", "seed", 42, int), int),
        reserve_margin=get("model", "reserve_margin", 0.20, float),
        discount_rate=get("model", "discount_rate", 0.05, float),
        ror_credit=get("model", "ror_credit", 0.0, float),
        cascade=get("inputs", "cascade", True, as_bool),
        solver=get("solver", "method", "auto"),
        time_limit=get("solver", "time_limit", None, float),
        source_text=text,
    )


def _section_order(sec: str):
    tail = sec[len("override"):].lstrip(".: ")
    return (0, int(tail), "") if tail.isdigit() else (1, 0, tail)


def format_config(cfg: ScenarioConfig, base: Path | str = ".") -> str:
    base = Path(base)

    def rel(p: Path) -> str:
        try:
            return str(Path(p).relative_to(base))
        except ValueError:
            return str(p)

    lines = ["[scenario]", f"name = {cfg.name}", f"trade_cost = {cfg.trade_cost}", "",
             "[inputs]", f"dir = {rel(cfg.inputs)}", f"cascade = {'yes' if cfg.cascade else 'no'}", "",
             "[model]", f"start_year = {cfg.start_year}", f"end_year = {cfg.end_year}",
             f"rep_days = {cfg.rep_days}", f"points_per_cell = {cfg.points_per_cell}", f"seed = {cfg.seed}",
             f"reserve_margin = {cfg.reserve_margin:g}", f"discount_rate = {cfg.discount_rate:g}",
             f"ror_credit = {cfg.ror_credit:g}", "",
             "[solver]", f"method = {cfg.solver}"]
    if cfg.time_limit:
        lines.append(f"time_limit = {cfg.time_limit:g}")
    lines += ["", "[output]", f"dir = {rel(cfg.output)}", ""]
    for i, o in enumerate(cfg.overrides, 1):
        lines += [f"[override.{i}]", f"type = {o.type}", f"target = {o.target}"]
        if o.value is not None:
            lines.append(f"value = {o.value:g}" if isinstance(o.value, float) else f"value = {o.value}")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------- inputs


@dataclass
class ModelInputs:
    """Everything needed to build one scenario LP."""

    sets: ModelSets
    technologies: list[Technology]
    params: SystemParams
    repdays: RepresentativeDaySet
    resources: list[RegionalResource]
    cascade: CascadeFragment | None = None
    digests: dict = field(default_factory=dict)

    def technology(self, name: str) -> Technology:
        for t in self.technologies:
            if t.name == name:
                return t
        raise ConfigError(f"override targets unknown technology {name!r}")

    def wind_potential_mw(self, region: str) -> float:
        """Upper bound on wind capacity implied by the land budgets wind may use."""
        bins = {t.land_bin for t in self.technologies if t.region == region and t.kind == "wind" and t.land_bin}
        return sum(self.params.land_budgets.get(b, 0.0) for b in bins) / LAND_USE_KM2_PER_MW


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _losses(path: Path) -> dict[str, float]:
    if not path.exists():
        return {}
    df = pd.read_csv(path)
    return {str(r): float(v) for r, v in zip(df["region"], df["loss"])}


def load_inputs(cfg: ScenarioConfig) -> ModelInputs:
    """Representative days, VRE resources, technologies and system parameters from the input directory."""
    d = Path(cfg.inputs)
    need = ["profiles.csv", "land.csv", "cf_raster.csv", "technologies.csv", "trade.csv", "emissions.csv"]
    missing = [f for f in need if not (d / f).exists()]
    if missing:
        raise ConfigError(f"{d}: missing inputs {', '.join(missing)}")
    digests = {f: _digest(d / f) for f in sorted(p.name for p in d.iterdir() if p.is_file())}

    profiles = read_profiles_csv(d / "profiles.csv")
    repset = represent(profiles, k=cfg.rep_days)
    ts = Timeslices.from_repdays(repset)
    by_id = {p.series_id: p for p in profiles}
    regions = tuple(sorted({p.region for p in profiles}))

    grid = read_land_csv(d / "land.csv")
    raster = read_raster_csv(d / "cf_raster.csv")
    sample = sample_raster(grid, raster, cfg.points_per_cell, cfg.seed)
    wind = {r: by_id[f"{r}_wind_cf"].values for r in regions if f"{r}_wind_cf" in by_id}
    solar = {r: by_id[f"{r}_solar_cf"].values for r in regions if f"{r}_solar_cf" in by_id}
    resources = build_regional_resources(grid, sample, DEFAULT_BIN_SPEC, wind, solar)

    dur = ts.duration
    cf_series, budgets = {}, {}
    for res in resources:
        r = res.region
        base_wind = repset.series.get(f"{r}_wind_cf")
        for b in res.bins:
            budgets[f"{r}/{b.label}"] = b.land_km2
            budgets[f"{r}/ag:{b.label}"] = b.agri_land_km2
            key = f"{r}_wind_{b.label}"
            if base_wind is None or b.avg_cf is None or base_wind.sum() == 0:
                cf_series[key] = np.zeros(ts.n)
            else:
                cf_series[key] = scale_to_mean(base_wind.ravel(), b.avg_cf, weights=dur, upper=1.0, name=key).values
        budgets[f"{r}/excluded"] = res.excluded_land_km2
        if f"{r}_solar_cf" in repset.series:
            cf_series[f"{r}_solar_cf"] = repset.series[f"{r}_solar_cf"].ravel()
    demand = {r: repset.series[f"{r}_demand"].ravel() for r in regions if f"{r}_demand" in repset.series}
    growth = read_growth_csv(d / "demand_growth.csv") if (d / "demand_growth.csv").exists() else {}

    techs = read_technologies_csv(d / "technologies.csv")
    fragment = None
    if cfg.cascade and (d / "cascade.ini").exists():
        topo = build_topology(d / "cascade.ini")
        records = read_inflows_csv(d / "inflows.csv")
        fragment = compile_to_model(topo, inflow_per_timeslice(records, ts, topo), segment_capacities(records, topo))
        techs = techs + fragment.technologies()

    params = SystemParams(
        demand=demand,
        demand_growth=growth,
        cf_series=cf_series,
        losses=_losses(d / "losses.csv"),
        borders=tuple(read_trade_csv(d / "trade.csv")),
        trade_variant=cfg.trade_cost,
        land_budgets=budgets,
        emissions=read_emissions_csv(d / "emissions.csv"),
        reserve_margin=cfg.reserve_margin,
        discount_rate=cfg.discount_rate,
        ror_credit=cfg.ror_credit,
    )
    sets = ModelSets(horizon(cfg.start_year, cfg.end_year), ts, regions)
    return ModelInputs(sets, techs, params, repset, resources, fragment, digests)


def apply_scenario(inputs: ModelInputs, cfg: ScenarioConfig) -> ModelInputs:
    """Scenario semantics plus explicit override records; returns a modified copy.

    Every scenario keeps the reference restrictions (no new coal in Montenegro,
    no cascade expansion).  Agricultural land is open to wind only in AG; the
    emission trajectory is active only in EL.
    """
    techs = {t.name: t for t in inputs.technologies}
    params = inputs.params
    budgets = dict(params.land_budgets)

    for t in list(techs.values()):
        if t.region == "ME" and t.fuel == "coal":
            techs[t.name] = dataclasses.replace(t, max_new_mw=0.0)
    if inputs.cascade is not None:
        for n in inputs.cascade.topology.of_kind("plant"):
            techs[n.node_id] = dataclasses.replace(techs[n.node_id], max_new_mw=0.0)
    if cfg.name != "AG":
        for key in budgets:
            if "/ag:" in key:
                budgets[key] = 0.0
    emissions = dataclasses.replace(params.emissions, active=cfg.name == "EL")
    margin = params.reserve_margin

    for o in cfg.overrides:
        if o.type in ("max_new", "max_total", "residual"):
            names = sorted(techs) if o.target == "*" else [o.target]
            for name in names:
                if name not in techs:
                    raise ConfigError(f"override targets unknown technology {name!r}")
                attr = {"max_new": "max_new_mw", "max_total": "max_total_mw", "residual": "residual_mw"}[o.type]
                techs[name] = dataclasses.replace(techs[name], **{attr: float(o.value)})
        elif o.type == "land":
            if o.target not in budgets:
                raise ConfigError(f"override targets unknown land bin {o.target!r}")
            budgets[o.target] = (params.land_budgets[o.target] if o.value == "enable" else float(o.value))
        elif o.type == "emission_limit":
            if o.value not in ("on", "off"):
                raise ConfigError("emission_limit override takes value on/off")
            emissions = dataclasses.replace(emissions, active=o.value == "on")
        elif o.type == "reserve_margin":
            margin = float(o.value)

    new_params = dataclasses.replace(params, land_budgets=budgets, emissions=emissions,
                                     trade_variant=cfg.trade_cost, reserve_margin=margin)
    return dataclasses.replace(inputs, technologies=[techs[k] for k in sorted(techs)], params=new_params)


def build(inputs: ModelInputs) -> AssembledModel:
    b = ModelBuilder(inputs.sets, inputs.technologies, inputs.params).add_all_blocks()
    if inputs.cascade is not None:
        inputs.cascade.applied = False
    return b.assemble([inputs.cascade] if inputs.cascade is not None else [])


# ---------------------------------------------------------------- infeasibility

USER_GROUP_PREFIXES = ("emission_limit:", "land:", "max_new:", "max_total:", "segment:", "reserve:")


def find_infeasible_set(lp: LinearProgram, options: SolveOptions | None = None,
                        prefixes: Sequence[str] = USER_GROUP_PREFIXES) -> dict:
    """Deletion filter over user constraint groups.

    Starts from the full set of candidate groups and drops each group whose
    removal leaves the model infeasible.  What is left is an irreducible set:
    relaxing any one member makes the model feasible.
    """
    opts = options or SolveOptions(method="highs")
    rows = sorted(g for g in lp.row_groups if g.startswith(tuple(prefixes)))
    bounds = sorted(g for g in lp.bound_groups if g.startswith(tuple(prefixes)))
    candidates = [("row", g) for g in rows] + [("bound", g) for g in bounds]

    def feasible(active):
        relax_r = [g for k, g in candidates if k == "row" and (k, g) not in active]
        relax_b = [g for k, g in candidates if k == "bound" and (k, g) not in active]
        sol = solve(lp.relaxed(relax_r, relax_b), opts)
        return sol.status in (Status.OPTIMAL, Status.UNBOUNDED)

    if not feasible(set()):
        return {"irreducible": [], "solves": 1, "note": "infeasible without any user constraint group"}
    active = set(candidates)
    solves = 1
    for item in candidates:
        trial = active - {item}
        solves += 1
        if not feasible(trial):
            active = trial
    keep = [g for k, g in candidates if (k, g) in active]
    return {"irreducible": keep, "solves": solves}


# ---------------------------------------------------------------- results


@dataclass
class RunResult:
    scenario: str
    capacity: pd.DataFrame  # year, technology, region, kind, new_gw, total_gw
    generation: pd.DataFrame  # year, rep_day, hour, technology, region, gwh
    trade: pd.DataFrame  # year, rep_day, hour, border, imports_gwh, exports_gwh
    emissions: pd.DataFrame  # year, region, mt
    storage: pd.DataFrame  # reservoir, year, rep_day, hour, mcm
    objective: float
    provenance: dict
    checks: dict = field(default_factory=dict)
    model: AssembledModel | None = field(default=None, repr=False)
    solution: Solution | None = field(default=None, repr=False)
    inputs: ModelInputs | None = field(default=None, repr=False)

    TABLES = ("capacity", "generation", "trade", "emissions", "storage")

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in self.TABLES:
            _write_frame(getattr(self, name), out / f"{name}.csv")
        manifest = dict(self.provenance)
        manifest["scenario"] = self.scenario
        manifest["objective"] = _g(self.objective)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return out

    @classmethod
    def read(cls, run_dir) -> "RunResult":
        d = Path(run_dir)
        if not (d / "manifest.json").exists():
            raise FileNotFoundError(f"{d}: not a run directory (manifest.json missing)")
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        frames = {name: pd.read_csv(d / f"{name}.csv") for name in cls.TABLES}
        return cls(manifest.get("scenario", d.name), objective=float(manifest["objective"]), provenance=manifest,
                   **frames)


def _g(v) -> str:
    s = format(float(v), ".12g")
    return "0" if s == "-0" else s


def _write_frame(df: pd.DataFrame, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(df.columns) + "\n")
        cols = [df[c].to_numpy() for c in df.columns]
        for row in zip(*cols):
            fh.write(",".join(_g(v) if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")


def _clean(v: float) -> float:
    v = float(v)
    return 0.0 if abs(v) < 1e-9 else v


def extract_results(inputs: ModelInputs, model: AssembledModel, sol: Solution, scenario: str,
                    provenance: dict) -> RunResult:
    b = model.builder
    x = sol.x
    years = inputs.sets.years
    ts_keys = inputs.sets.timeslices.keys
    cap_rows, gen_rows = [], []
    for t in b.techs:
        new = model.values(x, b.cap_new[t.name])
        tot = model.values(x, b.cap_total[t.name])
        for i, y in enumerate(years):
            cap_rows.append((y, t.name, t.region, t.kind, _clean(new[i] / 1e3), _clean(tot[i] / 1e3)))
            g = model.values(x, b.gen[t.name, y])
            for (d, h), v in zip(ts_keys, g):
                gen_rows.append((y, d, h, t.name, t.region, _clean(v / 1e3)))
    trade_rows = []
    for br in b.borders:
        for y in years:
            if (br.name, y) in b.link:
                f = model.values(x, b.link[br.name, y])
                imp, exp = np.zeros_like(f), f
            else:
                imp, exp = model.values(x, b.imp[br.name, y]), model.values(x, b.exp[br.name, y])
            for (d, h), vi, ve in zip(ts_keys, imp, exp):
                trade_rows.append((y, d, h, br.name, _clean(vi / 1e3), _clean(ve / 1e3)))
    emis_rows = []
    for r in inputs.sets.regions:
        for y in years:
            total = math.fsum(t.emission_factor * float(model.values(x, b.gen[t.name, y]).sum())
                              for t in b.techs_in(r) if t.emission_factor)
            emis_rows.append((y, r, _clean(total / 1e6)))
    storage_rows = []
    if inputs.cascade is not None:
        for (nid, y), lev in storage_levels(model, inputs.cascade, x).items():
            for (d, h), v in zip(ts_keys, lev):
                storage_rows.append((nid, y, d, h, _clean(v)))
    return RunResult(
        scenario,
        pd.DataFrame(cap_rows, columns=["year", "technology", "region", "kind", "new_gw", "total_gw"]),
        pd.DataFrame(gen_rows, columns=["year", "rep_day", "hour", "technology", "region", "gwh"]),
        pd.DataFrame(trade_rows, columns=["year", "rep_day", "hour", "border", "imports_gwh", "exports_gwh"]),
        pd.DataFrame(emis_rows, columns=["year", "region", "mt"]),
        pd.DataFrame(storage_rows, columns=["reservoir", "year", "rep_day", "hour", "mcm"]),
        float(sol.objective),
        provenance,
    )


def run(cfg: ScenarioConfig, write: bool = True, inputs: ModelInputs | None = None) -> RunResult:
    """Load, apply the scenario, build, solve, extract; abort with diagnostics unless optimal."""
    timings = {}
    t0 = time.perf_counter()
    base = inputs if inputs is not None else load_inputs(cfg)
    timings["load_s"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    scen = apply_scenario(base, cfg)
    model = build(scen)
    timings["build_s"] = time.perf_counter() - t1
    t2 = time.perf_counter()
    opts = SolveOptions(method=cfg.solver, time_limit=cfg.time_limit)
    sol = solve(model.lp, opts)
    timings["solve_s"] = time.perf_counter() - t2
    provenance = {
        "config_digest": cfg.digest(),
        "version": __version__,
        "seed": cfg.seed,
        "inputs": base.digests,
        "status": sol.status.value,
        "lp_rows": model.lp.n_rows,
        "lp_cols": model.lp.n_cols,
        "lp_nonzeros": int(model.lp.A.nnz),
        "solver": sol.method,
    }
    out = Path(cfg.output)
    if sol.status is not Status.OPTIMAL:
        report = {"status": sol.status.value, "message": sol.message, **provenance}
        if sol.status is Status.INFEASIBLE:
            report.update(find_infeasible_set(model.lp))
        if write:
            out.mkdir(parents=True, exist_ok=True)
            (out / "infeasibility.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                                    encoding="utf-8")
        raise RunError(f"{cfg.run_id}: solver status {sol.status.value}", report)
    t3 = time.perf_counter()
    result = extract_results(scen, model, sol, cfg.run_id, provenance)
    result.checks = run_checks(scen, model, sol)
    timings["report_s"] = time.perf_counter() - t3
    if write:
        result.write(out)
        (out / "checks.json").write_text(json.dumps(result.checks, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
        timings["total_s"] = time.perf_counter() - t0
        (out / "timings.json").write_text(json.dumps({k: round(v, 3) for k, v in timings.items()}, indent=2) + "\n",
                                          encoding="utf-8")
    result.model = model
    result.solution = sol
    result.inputs = scen
    return result


def run_checks(inputs: ModelInputs, model: AssembledModel, sol: Solution) -> dict:
    """Post-solve residuals: energy balance, land budgets, emission limits and water balance."""
    lp = model.lp
    act = lp.activity(sol.x)
    out = {"max_balance_shortfall": _g(balance_residuals(model, sol).max(initial=0.0))}
    land = model.family_rows("land")
    out["max_land_excess_km2"] = _g(max(0.0, float((act[land] - lp.b[land]).max(initial=0.0))))
    lim = model.family_rows("emis_limit")
    out["max_emission_limit_excess_t"] = _g(max(0.0, float((act[lim] - lp.b[lim]).max(initial=0.0))))
    water = model.family_rows("water_bal")
    out["max_water_residual_mcm"] = _g(float(np.abs(act[water] - lp.b[water]).max(initial=0.0)))
    if inputs.cascade is not None:
        worst = 0.0
        for y in inputs.sets.years:
            acc = annual_water_account(model, inputs.cascade, sol.x, y)
            worst = max(worst, abs(acc["inflow"] - acc["outflow"] - acc["storage_change"]))
        out["max_annual_water_gap_mcm"] = _g(worst)
    return out


# ---------------------------------------------------------------- reports


def _as_result(obj) -> RunResult:
    return obj if isinstance(obj, RunResult) else RunResult.read(obj)


def report_capacity_diff(a, b) -> pd.DataFrame:
    """Cumulative capacity a − b (GW) per year and technology; negative means lower than ``b``."""
    ra, rb = _as_result(a), _as_result(b)
    ta, tb = set(ra.capacity["technology"]), set(rb.capacity["technology"])
    if ta != tb:
        raise ValueError(f"technology sets differ: {sorted(ta ^ tb)}")
    pa = ra.capacity.pivot(index="year", columns="technology", values="total_gw")
    pb = rb.capacity.pivot(index="year", columns="technology", values="total_gw")
    if not pa.index.equals(pb.index):
        raise ValueError("year sets differ")
    diff = (pa - pb).sort_index(axis=1)
    diff = diff.where(diff.abs() > 1e-9, 0.0)
    long = diff.reset_index().melt(id_vars="year", var_name="technology", value_name="diff_gw")
    long.insert(0, "scenario", f"{ra.scenario}-{rb.scenario}")
    return long.sort_values(["year", "technology"], kind="stable").reset_index(drop=True)


def report_emissions(results: Sequence) -> pd.DataFrame:
    """Annual MtCO2 by scenario from generation × emission factor (imports carry none)."""
    frames = []
    for obj in results:
        r = _as_result(obj)
        tot = r.emissions.groupby("year", sort=True)["mt"].sum()
        frames.append(pd.Series(tot.to_numpy(), index=tot.index, name=r.scenario))
    df = pd.concat(frames, axis=1) if frames else pd.DataFrame()
    df.index.name = "year"
    return df.reset_index()


def emissions_from_generation(generation: pd.DataFrame, factors: Mapping[str, float]) -> pd.DataFrame:
    """Mt per year from a generation table in GWh and factors in t/MWh."""
    g = generation.assign(mt=generation["gwh"] * generation["technology"].map(factors).fillna(0.0) * 1e3 / 1e6)
    return g.groupby("year", sort=True)["mt"].sum().reset_index()


def report_storage_envelope(result, by_reservoir: bool = False) -> pd.DataFrame:
    """Per timeslice: mean, min, max, 2.5 and 97.5 percentiles of storage (MCM) across model years."""
    r = _as_result(result)
    st = r.storage
    if st.empty:
        raise ValueError("run has no cascade storage")
    keys = ["reservoir", "rep_day", "hour"] if by_reservoir else ["rep_day", "hour"]
    if not by_reservoir:
        st = st.groupby(["year", "rep_day", "hour"], sort=True)["mcm"].sum().reset_index()
    order = st[["rep_day", "hour"]].drop_duplicates()
    g = st.groupby(keys, sort=False)["mcm"]
    out = pd.DataFrame({
        "mean": g.mean(),
        "min": g.min(),
        "max": g.max(),
        "p2_5": g.quantile(0.025),
        "p97_5": g.quantile(0.975),
    }).reset_index()
    out["_o"] = out.set_index(["rep_day", "hour"]).index.map(
        {k: i for i, k in enumerate(zip(order["rep_day"], order["hour"]))})
    sort = ["reservoir", "_o"] if by_reservoir else ["_o"]
    return out.sort_values(sort, kind="stable").drop(columns="_o").reset_index(drop=True)


def write_table(df: pd.DataFrame, path) -> None:
    _write_frame(df, Path(path))

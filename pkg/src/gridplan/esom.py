"""Capacity-expansion LP for a small multi-region power system.

Variables are grouped in families (``cap_new``, ``cap_total``, ``gen``, ...)
keyed by tuples.  Blocks add rows and cost terms; ``assemble`` sorts columns
and rows by (family rank, key) so the LP does not depend on input order.

Units: capacity MW, energy MWh, land km², water MCM, emissions tCO2, costs in
one abstract currency.  A timeslice is one hour of one representative day; its
duration is the day's weight in hours per year.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .lpsolve import LinearProgram, Solution
from .vre import LAND_USE_KM2_PER_MW

logger = logging.getLogger(__name__)

BASE_YEAR = 2020
END_YEAR = 2050
DISCOUNT_RATE = 0.05
RESERVE_MARGIN = 0.20
EL_ANCHORS = {2030: 0.45, 2050: 0.0}

TECH_KINDS = ("thermal", "hydro_storage", "hydro_ror", "wind", "solar", "other")
_DEFAULT_CREDIT = {"thermal": 1.0, "hydro_storage": 1.0, "wind": 0.0, "solar": 0.0, "other": 0.0}

BLOCKS = ("demand_balance", "capacity_activity", "reserve_margin", "emissions", "land_budget", "trade", "objective")

VAR_RANK = ("cap_new", "cap_total", "gen", "imp", "exp", "link", "emis", "water", "level", "level0", "exit")
ROW_RANK = ("balance", "cap_acc", "activity", "reserve", "emis_acc", "emis_limit", "land", "trade_net",
            "water_bal", "level_close", "plant_water", "segment_cap")


class ModelError(ValueError):
    pass


def discount_factor(year: int, rate: float = DISCOUNT_RATE, base_year: int = BASE_YEAR) -> float:
    return (1.0 + rate) ** -(year - base_year)


def emission_limit(year: int, baseline: float, anchors: Mapping[int, float] = EL_ANCHORS) -> float | None:
    """Limit in tCO2 for ``year``: linear between anchor fractions of the baseline, flat after the last.

    Returns ``None`` before the first anchor (no limit).
    """
    ys = sorted(anchors)
    if year < ys[0]:
        return None
    frac = float(np.interp(year, ys, [anchors[y] for y in ys]))
    return frac * baseline


def salvage_fraction(build_year: int, life: int, end_year: int = END_YEAR) -> float:
    """Linear depreciation: share of capex still undepreciated at the horizon end."""
    return max(0.0, build_year + life - end_year) / life if build_year <= end_year else 0.0


# ---------------------------------------------------------------- inputs


@dataclass(frozen=True)
class Timeslices:
    """Representative days × hours; ``weights[d]`` days per year stand behind day ``d``."""

    days: tuple[int, ...]
    weights: np.ndarray
    hours: int = 24

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.days),) or np.any(w <= 0):
            raise ModelError("one positive weight per representative day")
        if len(set(self.days)) != len(self.days):
            raise ModelError("duplicate representative day")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "days", tuple(int(d) for d in self.days))

    @property
    def n(self) -> int:
        return len(self.days) * self.hours

    @property
    def keys(self) -> list[tuple[int, int]]:
        return [(d, h) for d in self.days for h in range(self.hours)]

    @property
    def duration(self) -> np.ndarray:
        """Hours per year represented by each timeslice."""
        return np.repeat(self.weights, self.hours)

    @classmethod
    def from_repdays(cls, repset) -> "Timeslices":
        return cls(tuple(repset.day_indices), np.asarray(repset.weights, float))


@dataclass(frozen=True)
class ModelSets:
    years: tuple[int, ...]
    timeslices: Timeslices
    regions: tuple[str, ...]

    def __post_init__(self):
        years = tuple(sorted(int(y) for y in self.years))
        if len(set(years)) != len(years) or not years:
            raise ModelError("years must be unique and non-empty")
        if len(set(self.regions)) != len(self.regions):
            raise ModelError("duplicate region")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "regions", tuple(sorted(self.regions)))

    @property
    def total_hours(self) -> float:
        return float(self.timeslices.duration.sum())


def horizon(start: int = BASE_YEAR, end: int = END_YEAR) -> tuple[int, ...]:
    return tuple(range(start, end + 1))


@dataclass(frozen=True)
class Technology:
    name: str
    region: str
    kind: str
    capex: float = 0.0  # per MW
    fixed_om: float = 0.0  # per MW and year
    var_om: float = 0.0  # per MWh
    life: int = 30
    residual_mw: float = 0.0
    retire_year: int | None = None  # residual capacity gone from this year on
    cf: float | str = 1.0  # constant availability or a series id
    emission_factor: float = 0.0  # tCO2/MWh
    land_bin: str | None = None  # land budget key "<region>/<bin>"
    land_intensity: float = LAND_USE_KM2_PER_MW
    max_total_mw: float = math.inf
    max_new_mw: float = math.inf  # per year
    firm_credit: float | None = None
    fuel: str | None = None  # coal, gas, ...

    def __post_init__(self):
        if self.kind not in TECH_KINDS:
            raise ModelError(f"{self.name}: unknown kind {self.kind!r}")
        if self.life < 1:
            raise ModelError(f"{self.name}: life must be >= 1")
        if min(self.capex, self.fixed_om, self.var_om, self.residual_mw, self.emission_factor) < 0:
            raise ModelError(f"{self.name}: costs, residual capacity and emission factor must be non-negative")
        if isinstance(self.cf, (int, float)) and not 0.0 <= self.cf <= 1.0:
            raise ModelError(f"{self.name}: CF outside [0, 1]")

    def residual(self, year: int) -> float:
        if self.retire_year is not None and year >= self.retire_year:
            return 0.0
        return self.residual_mw

    def credit(self, ror_credit: float) -> float:
        if self.firm_credit is not None:
            return self.firm_credit
        return ror_credit if self.kind == "hydro_ror" else _DEFAULT_CREDIT[self.kind]


@dataclass(frozen=True)
class Border:
    """Transmission interface.  ``neighbour`` outside the model means priced trade, inside means a free link."""

    name: str
    region: str
    neighbour: str
    capacity_mw: float
    price_low: Mapping[int, float] = field(default_factory=dict)
    price_high: Mapping[int, float] = field(default_factory=dict)

    def price(self, year: int, variant: str) -> float:
        table = {"low": self.price_low, "high": self.price_high}.get(variant)
        if table is None:
            raise ModelError(f"unknown trade variant {variant!r}")
        if not table:
            raise ModelError(f"border {self.name} has no {variant} prices")
        ys = sorted(table)
        return float(np.interp(year, ys, [table[y] for y in ys]))


@dataclass(frozen=True)
class EmissionPolicy:
    baseline_t: float | None = None
    anchors: Mapping[int, float] = field(default_factory=lambda: dict(EL_ANCHORS))
    active: bool = False

    def limit(self, year: int) -> float | None:
        if not self.active:
            return None
        if self.baseline_t is None:
            raise ModelError("emission limit trajectory requires a baseline")
        return emission_limit(year, self.baseline_t, self.anchors)


@dataclass(frozen=True)
class SystemParams:
    demand: Mapping[str, np.ndarray]  # MWh per representative hour, base year
    demand_growth: Mapping[str, Mapping[int, float]] = field(default_factory=dict)
    cf_series: Mapping[str, np.ndarray] = field(default_factory=dict)
    losses: Mapping[str, float] = field(default_factory=dict)
    borders: Sequence[Border] = ()
    trade_variant: str = "low"
    land_budgets: Mapping[str, float] = field(default_factory=dict)  # km²
    emissions: EmissionPolicy = field(default_factory=EmissionPolicy)
    reserve_margin: float = RESERVE_MARGIN
    discount_rate: float = DISCOUNT_RATE
    ror_credit: float = 0.0
    salvage: str = "linear"  # linear | none
    link_cost: float = 0.0  # per MWh on internal links

    def __post_init__(self):
        if self.reserve_margin < 0:
            raise ModelError("reserve margin must be >= 0")
        if not 0.0 < self.discount_rate < 1.0:
            raise ModelError("discount rate must lie in (0, 1)")
        if any(not 0.0 <= v < 1.0 for v in self.losses.values()):
            raise ModelError("loss fractions must lie in [0, 1)")
        if self.salvage not in ("linear", "none"):
            raise ModelError(f"unknown salvage method {self.salvage!r}")

    def demand_mwh(self, region: str, year: int) -> np.ndarray:
        """MWh per representative hour in ``year``."""
        growth = self.demand_growth.get(region, {})
        g = 1.0
        if growth:
            ys = sorted(growth)
            g = float(np.interp(year, ys, [growth[y] for y in ys]))
        return np.asarray(self.demand[region], float) * g


# ---------------------------------------------------------------- builder


@dataclass(frozen=True)
class _Family:
    name: str
    keys: list
    start: int


class ModelBuilder:
    """Single-writer LP builder.  Core variables exist from construction; each block may be added once."""

    def __init__(self, sets: ModelSets, technologies: Iterable[Technology], params: SystemParams):
        self.sets = sets
        self.params = params
        techs = sorted(technologies, key=lambda t: t.name)
        names = [t.name for t in techs]
        if len(set(names)) != len(names):
            raise ModelError("duplicate technology name")
        for t in techs:
            if t.region not in sets.regions:
                raise ModelError(f"{t.name}: unknown region {t.region!r}")
        self.techs = tuple(techs)
        self.borders = tuple(sorted(params.borders, key=lambda b: b.name))
        for b in self.borders:
            if b.region not in sets.regions:
                raise ModelError(f"border {b.name}: unknown region {b.region!r}")
        if len({b.name for b in self.borders}) != len(self.borders):
            raise ModelError("duplicate border name")
        self.blocks: list[str] = []
        self._n_cols = 0
        self._n_rows = 0
        self._col_fams: list[_Family] = []
        self._row_fams: list[_Family] = []
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._senses: list[str] = []
        self._rhs: list[np.ndarray] = []
        self._tri: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._cost: list[tuple[np.ndarray, np.ndarray]] = []
        self._ub_cuts: list[tuple[np.ndarray, np.ndarray]] = []
        self.row_groups: dict[str, list[np.ndarray]] = {}
        self.bound_groups: dict[str, list[np.ndarray]] = {}
        self._make_core_vars()

    # low-level registry -------------------------------------------------

    def add_vars(self, family: str, keys: list, lb=0.0, ub=math.inf) -> np.ndarray:
        n = len(keys)
        cols = np.arange(self._n_cols, self._n_cols + n)
        self._col_fams.append(_Family(family, list(keys), self._n_cols))
        self._lb.append(np.broadcast_to(np.asarray(lb, float), (n,)).copy())
        self._ub.append(np.broadcast_to(np.asarray(ub, float), (n,)).copy())
        self._n_cols += n
        return cols

    def add_rows(self, family: str, keys: list, sense: str, rhs, group: str | None = None) -> np.ndarray:
        n = len(keys)
        rows = np.arange(self._n_rows, self._n_rows + n)
        self._row_fams.append(_Family(family, list(keys), self._n_rows))
        self._senses.extend([sense] * n)
        self._rhs.append(np.broadcast_to(np.asarray(rhs, float), (n,)).copy())
        self._n_rows += n
        if group is not None:
            self.row_groups.setdefault(group, []).append(rows)
        return rows

    def add_coefs(self, rows, cols, vals) -> None:
        rows, cols = np.asarray(rows, int), np.asarray(cols, int)
        vals = np.broadcast_to(np.asarray(vals, float), rows.shape)
        self._tri.append((rows.ravel(), cols.ravel(), vals.ravel().copy()))

    def add_cost(self, cols, vals) -> None:
        cols = np.asarray(cols, int)
        self._cost.append((cols.ravel(), np.broadcast_to(np.asarray(vals, float), cols.shape).ravel().copy()))

    def set_upper(self, cols, ub, group: str | None = None) -> None:
        cols = np.asarray(cols, int)
        self._ub_cuts.append((cols, np.broadcast_to(np.asarray(ub, float), cols.shape).copy()))
        if group is not None:
            self.bound_groups.setdefault(group, []).append(cols)

    def _mark(self, block: str) -> None:
        if block in self.blocks:
            raise ModelError(f"block {block!r} added twice")
        self.blocks.append(block)

    # core variables ------------------------------------------------------

    def _make_core_vars(self):
        years, ts = self.sets.years, self.sets.timeslices
        self.cap_new, self.cap_total, self.gen = {}, {}, {}
        ts_keys = ts.keys
        for t in self.techs:
            self.cap_new[t.name] = self.add_vars("cap_new", [(t.name, y) for y in years], 0.0, t.max_new_mw)
            self.cap_total[t.name] = self.add_vars("cap_total", [(t.name, y) for y in years], 0.0, t.max_total_mw)
            if t.max_new_mw != math.inf:
                self.bound_groups.setdefault(f"max_new:{t.name}", []).append(self.cap_new[t.name])
            if t.max_total_mw != math.inf:
                self.bound_groups.setdefault(f"max_total:{t.name}", []).append(self.cap_total[t.name])
            for y in years:
                self.gen[t.name, y] = self.add_vars("gen", [(t.name, y, d, h) for d, h in ts_keys])
        self.imp, self.exp, self.link = {}, {}, {}
        regions = set(self.sets.regions)
        for b in self.borders:
            for y in years:
                if b.neighbour in regions:
                    self.link[b.name, y] = self.add_vars("link", [(b.name, y, d, h) for d, h in ts_keys])
                else:
                    self.imp[b.name, y] = self.add_vars("imp", [(b.name, y, d, h) for d, h in ts_keys])
                    self.exp[b.name, y] = self.add_vars("exp", [(b.name, y, d, h) for d, h in ts_keys])
        self.emis = {r: self.add_vars("emis", [(r, y) for y in years]) for r in self.sets.regions}

    def techs_in(self, region: str) -> list[Technology]:
        return [t for t in self.techs if t.region == region]

    def tech(self, name: str) -> Technology:
        for t in self.techs:
            if t.name == name:
                return t
        raise ModelError(f"unknown technology {name!r}")

    def _cf(self, t: Technology) -> np.ndarray:
        n = self.sets.timeslices.n
        if isinstance(t.cf, str):
            if t.cf not in self.params.cf_series:
                raise ModelError(f"{t.name}: missing CF series {t.cf!r}")
            cf = np.asarray(self.params.cf_series[t.cf], float)
            if cf.shape != (n,):
                raise ModelError(f"{t.name}: CF series has {cf.size} values, expected {n}")
            if np.any(cf < 0) or np.any(cf > 1):
                raise ModelError(f"{t.name}: CF outside [0, 1]")
            return cf
        return np.full(n, float(t.cf))

    def _demand(self, region: str) -> dict[int, np.ndarray]:
        if region not in self.params.demand:
            raise ModelError(f"region {region!r} has no demand series")
        n = self.sets.timeslices.n
        out = {}
        for y in self.sets.years:
            d = self.params.demand_mwh(region, y)
            if d.shape != (n,):
                raise ModelError(f"demand for {region} has {d.size} values, expected {n}")
            out[y] = d
        return out

    # blocks --------------------------------------------------------------

    def add_demand_balance(self) -> None:
        """Σ gen·(1−loss) + imports − exports + link inflow − link outflow ≥ demand, per region/timeslice/year."""
        self._mark("demand_balance")
        dur = self.sets.timeslices.duration
        ts_keys = self.sets.timeslices.keys
        regions = set(self.sets.regions)
        for r in self.sets.regions:
            demand = self._demand(r)
            keep = 1.0 - self.params.losses.get(r, 0.0)
            for y in self.sets.years:
                rows = self.add_rows("balance", [(r, y, d, h) for d, h in ts_keys], "G", demand[y] * dur,
                                     group=f"demand:{r}")
                for t in self.techs_in(r):
                    self.add_coefs(rows, self.gen[t.name, y], keep)
                for b in self.borders:
                    if b.neighbour in regions:
                        if b.region == r:
                            self.add_coefs(rows, self.link[b.name, y], -1.0)
                        elif b.neighbour == r:
                            self.add_coefs(rows, self.link[b.name, y], 1.0)
                    elif b.region == r:
                        self.add_coefs(rows, self.imp[b.name, y], 1.0)
                        self.add_coefs(rows, self.exp[b.name, y], -1.0)

    def add_capacity_activity(self) -> None:
        """Vintage accounting and gen ≤ total capacity × CF × duration."""
        self._mark("capacity_activity")
        years = self.sets.years
        dur = self.sets.timeslices.duration
        ts_keys = self.sets.timeslices.keys
        for t in self.techs:
            rows = self.add_rows("cap_acc", [(t.name, y) for y in years], "E", [t.residual(y) for y in years])
            self.add_coefs(rows, self.cap_total[t.name], 1.0)
            for i, y in enumerate(years):
                vint = [j for j, v in enumerate(years) if y - t.life < v <= y]
                self.add_coefs(np.full(len(vint), rows[i]), self.cap_new[t.name][vint], -1.0)
            avail = self._cf(t) * dur
            for i, y in enumerate(years):
                rows = self.add_rows("activity", [(t.name, y, d, h) for d, h in ts_keys], "L", 0.0)
                self.add_coefs(rows, self.gen[t.name, y], 1.0)
                self.add_coefs(rows, np.full(rows.size, self.cap_total[t.name][i]), -avail)

    def peak_mw(self, region: str, year: int) -> float:
        return float(self.params.demand_mwh(region, year).max())

    def add_reserve_margin(self) -> None:
        """Σ credit × total capacity ≥ (1 + margin) × peak demand, per region and year."""
        self._mark("reserve_margin")
        m = self.params.reserve_margin
        for r in self.sets.regions:
            self._demand(r)
            techs = [t for t in self.techs_in(r) if t.credit(self.params.ror_credit) > 0]
            for i, y in enumerate(self.sets.years):
                row = self.add_rows("reserve", [(r, y)], "G", (1.0 + m) * self.peak_mw(r, y), group=f"reserve:{r}")
                for t in techs:
                    self.add_coefs(row, [self.cap_total[t.name][i]], t.credit(self.params.ror_credit))

    def add_emissions(self) -> None:
        """emis(region, yr) = Σ gen × factor; basin-wide cap when the policy is active."""
        self._mark("emissions")
        policy = self.params.emissions
        for r in self.sets.regions:
            rows = self.add_rows("emis_acc", [(r, y) for y in self.sets.years], "E", 0.0)
            self.add_coefs(rows, self.emis[r], 1.0)
            for t in self.techs_in(r):
                if t.emission_factor == 0.0:
                    continue
                for i, y in enumerate(self.sets.years):
                    g = self.gen[t.name, y]
                    self.add_coefs(np.full(g.size, rows[i]), g, -t.emission_factor)
        if policy.active and policy.baseline_t is None:
            raise ModelError("emission limit trajectory requires a baseline")
        for i, y in enumerate(self.sets.years):
            lim = policy.limit(y)
            if lim is None:
                continue
            row = self.add_rows("emis_limit", [(y,)], "L", lim, group=f"emission_limit:{y}")
            self.add_coefs(np.full(len(self.sets.regions), row[0]), [self.emis[r][i] for r in self.sets.regions], 1.0)

    def add_land_budget(self) -> None:
        """Σ total capacity × land intensity ≤ budget, per land bin and year."""
        self._mark("land_budget")
        budgets = self.params.land_budgets
        by_bin: dict[str, list[Technology]] = {}
        for t in self.techs:
            if t.land_bin is None:
                continue
            if t.land_bin not in budgets:
                raise ModelError(f"{t.name}: unknown land bin {t.land_bin!r}")
            by_bin.setdefault(t.land_bin, []).append(t)
        for key in sorted(by_bin):
            rows = self.add_rows("land", [(key, y) for y in self.sets.years], "L", budgets[key], group=f"land:{key}")
            for t in by_bin[key]:
                self.add_coefs(rows, self.cap_total[t.name], t.land_intensity)

    def add_trade(self) -> None:
        """Flows bounded by capacity × duration; imports cost and exports earn the variant's price."""
        self._mark("trade")
        dur = self.sets.timeslices.duration
        variant = self.params.trade_variant
        for b in self.borders:
            if b.capacity_mw < 0:
                raise ModelError(f"border {b.name}: negative capacity")
            for y in self.sets.years:
                cap = b.capacity_mw * dur
                if (b.name, y) in self.link:
                    self.set_upper(self.link[b.name, y], cap)
                else:
                    self.set_upper(self.imp[b.name, y], cap)
                    self.set_upper(self.exp[b.name, y], cap)
                    # net flow limited by the same interface
                    rows = self.add_rows("trade_net", [(b.name, y, d, h) for d, h in self.sets.timeslices.keys],
                                         "L", cap)
                    self.add_coefs(rows, self.imp[b.name, y], 1.0)
                    self.add_coefs(rows, self.exp[b.name, y], 1.0)
                    b.price(y, variant)

    def add_objective(self) -> None:
        """Discounted capex, fixed and variable cost, trade cost minus revenue, minus discounted salvage."""
        self._mark("objective")
        p = self.params
        years = self.sets.years
        df = {y: discount_factor(y, p.discount_rate) for y in years}
        end = max(years)
        for t in self.techs:
            for i, y in enumerate(years):
                capex = t.capex * df[y]
                if p.salvage == "linear":
                    capex -= t.capex * salvage_fraction(y, t.life, end) * df[end]
                self.add_cost([self.cap_new[t.name][i]], capex)
                self.add_cost([self.cap_total[t.name][i]], t.fixed_om * df[y])
                if t.var_om:
                    self.add_cost(self.gen[t.name, y], t.var_om * df[y])
        for b in self.borders:
            for y in years:
                if (b.name, y) in self.link:
                    if p.link_cost:
                        self.add_cost(self.link[b.name, y], p.link_cost * df[y])
                    continue
                price = b.price(y, p.trade_variant) * df[y]
                self.add_cost(self.imp[b.name, y], price)
                self.add_cost(self.exp[b.name, y], -price)

    def add_all_blocks(self) -> "ModelBuilder":
        for block in BLOCKS:
            getattr(self, f"add_{block}")()
        return self

    # assembly ------------------------------------------------------------

    def assemble(self, fragments: Sequence = ()) -> "AssembledModel":
        missing = [b for b in BLOCKS if b not in self.blocks]
        if missing:
            raise ModelError(f"missing blocks: {', '.join(missing)}")
        for frag in fragments:
            frag.apply(self)
        col_perm, col_names, col_keys = _ordering(self._col_fams, VAR_RANK, self._n_cols)
        row_perm, row_names, row_keys = _ordering(self._row_fams, ROW_RANK, self._n_rows)
        if self._tri:
            r = np.concatenate([t[0] for t in self._tri])
            c = np.concatenate([t[1] for t in self._tri])
            v = np.concatenate([t[2] for t in self._tri])
        else:
            r = c = np.zeros(0, int)
            v = np.zeros(0)
        A = sp.coo_matrix((v, (row_perm[r], col_perm[c])), shape=(self._n_rows, self._n_cols)).tocsr()
        cost = np.zeros(self._n_cols)
        for cols, vals in self._cost:
            np.add.at(cost, col_perm[cols], vals)

        def place(values, perm):
            out = np.empty_like(values)
            out[perm] = values
            return out

        lb = place(np.concatenate(self._lb) if self._lb else np.zeros(0), col_perm)
        ub_prov = np.concatenate(self._ub) if self._ub else np.zeros(0)
        for cols, vals in self._ub_cuts:
            ub_prov[cols] = np.minimum(ub_prov[cols], vals)
        ub = place(ub_prov, col_perm)
        b = place(np.concatenate(self._rhs) if self._rhs else np.zeros(0), row_perm)
        senses = np.empty(self._n_rows, dtype="U1")
        senses[row_perm] = np.array(self._senses, dtype="U1")
        row_groups = {g: tuple(sorted(int(i) for i in row_perm[np.concatenate(v)])) for g, v in self.row_groups.items()}
        bound_groups = {g: tuple(sorted(int(i) for i in col_perm[np.concatenate(v)])) for g, v in self.bound_groups.items()}
        lp = LinearProgram(c=cost, A=A, senses=tuple(senses), b=b, lb=lb, ub=ub, row_names=tuple(row_names),
                           col_names=tuple(col_names), name="GRIDPLAN", row_groups=row_groups,
                           bound_groups=bound_groups)
        return AssembledModel(lp, col_keys, row_keys, self, col_perm, row_perm)


def _ordering(fams: list[_Family], rank: Sequence[str], total: int):
    """Permutation provisional → final index, sorted by (family rank, family, key)."""
    order = []
    for f in fams:
        if f.name not in rank:
            raise ModelError(f"family {f.name!r} has no rank")
        r = rank.index(f.name)
        order.extend(((r, f.name) + (tuple(k),), f.start + i) for i, k in enumerate(f.keys))
    order.sort(key=lambda item: item[0])
    perm = np.empty(total, dtype=int)
    names, keys = [], []
    for final, ((_, fam, key), prov) in enumerate(order):
        perm[prov] = final
        names.append(f"{fam}[{','.join(str(k) for k in key)}]")
        keys.append((fam, key))
    if len(set(names)) != len(names):
        raise ModelError("duplicate variable or row key")
    return perm, names, keys


@dataclass
class AssembledModel:
    lp: LinearProgram
    col_keys: list  # (family, key) per column
    row_keys: list
    builder: ModelBuilder
    col_perm: np.ndarray  # provisional builder column -> final column
    row_perm: np.ndarray

    def __post_init__(self):
        self._col_index = {k: i for i, k in enumerate(self.col_keys)}
        self._row_index = {k: i for i, k in enumerate(self.row_keys)}

    def final(self, cols) -> np.ndarray:
        """Map builder column ids (e.g. ``builder.gen[tech, year]``) to LP columns."""
        return self.col_perm[np.asarray(cols, int)]

    def values(self, x, cols) -> np.ndarray:
        return np.asarray(x)[self.final(cols)]

    def col(self, family: str, *key) -> int:
        return self._col_index[family, tuple(key)]

    def row(self, family: str, *key) -> int:
        return self._row_index[family, tuple(key)]

    def family_values(self, family: str, x) -> list[tuple[tuple, float]]:
        x = np.asarray(x)
        return [(key, float(x[i])) for i, (fam, key) in enumerate(self.col_keys) if fam == family]

    def family_rows(self, family: str) -> np.ndarray:
        return np.array([i for i, (fam, _) in enumerate(self.row_keys) if fam == family], dtype=int)


def build_model(sets: ModelSets, technologies, params: SystemParams, fragments: Sequence = ()) -> AssembledModel:
    return ModelBuilder(sets, technologies, params).add_all_blocks().assemble(fragments)


def balance_residuals(model: AssembledModel, sol: Solution) -> np.ndarray:
    """Shortfall Σ gen·(1−loss) + trade − demand below zero, per balance row (0 when satisfied)."""
    lp = model.lp
    rows = model.family_rows("balance")
    act = lp.activity(sol.x)[rows]
    return np.maximum(0.0, lp.b[rows] - act)


def write_model_dump(lp: LinearProgram, path) -> Path:
    """Readable constraint listing for audits (one row per line)."""
    path = Path(path)
    A = lp.A.tocsr()
    sym = {"L": "<=", "E": "=", "G": ">="}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        terms = " ".join(f"{_g(v)} {lp.col_names[j]}" for j, v in enumerate(lp.c) if v != 0.0)
        fh.write(f"min: {terms}\n")
        for i in range(lp.n_rows):
            s, e = A.indptr[i], A.indptr[i + 1]
            terms = " ".join(f"{_g(v)} {lp.col_names[j]}" for j, v in zip(A.indices[s:e], A.data[s:e]))
            fh.write(f"{lp.row_names[i]}: {terms} {sym[lp.senses[i]]} {_g(lp.b[i])}\n")
        for j in range(lp.n_cols):
            if lp.lb[j] != 0.0 or lp.ub[j] != math.inf:
                fh.write(f"bound: {_g(lp.lb[j])} <= {lp.col_names[j]} <= {_g(lp.ub[j])}\n")
    return path


def _g(v: float) -> str:
    s = format(float(v), ".12g")
    return "0" if s == "-0" else s


# ---------------------------------------------------------------- CSV inputs

_TECH_FLOATS = ("capex", "fixed_om", "var_om", "residual_mw", "emission_factor", "land_intensity",
                "max_total_mw", "max_new_mw")


def _opt(row, key):
    v = row.get(key, "")
    return None if v is None or v.strip() == "" else v.strip()


def read_technologies_csv(path) -> list[Technology]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {"name": row["name"], "region": row["region"], "kind": row["kind"]}
            for k in _TECH_FLOATS:
                v = _opt(row, k)
                if v is not None:
                    kw[k] = float(v)
            for k in ("life", "retire_year"):
                v = _opt(row, k)
                if v is not None:
                    kw[k] = int(v)
            cf = _opt(row, "cf")
            if cf is not None:
                try:
                    kw["cf"] = float(cf)
                except ValueError:
                    kw["cf"] = cf
            for k in ("land_bin", "fuel"):
                v = _opt(row, k)
                if v is not None:
                    kw[k] = v
            v = _opt(row, "firm_credit")
            if v is not None:
                kw["firm_credit"] = float(v)
            out.append(Technology(**kw))
    return out


def write_technologies_csv(techs: Sequence[Technology], path) -> None:
    cols = ["name", "region", "kind", "capex", "fixed_om", "var_om", "life", "residual_mw", "retire_year", "cf",
            "emission_factor", "land_bin", "land_intensity", "max_total_mw", "max_new_mw", "firm_credit", "fuel"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for t in sorted(techs, key=lambda t: t.name):
            row = []
            for c in cols:
                v = getattr(t, c)
                row.append("" if v is None else (_g(v) if isinstance(v, float) else str(v)))
            w.writerow(row)


def read_demand_csv(path, timeslices: Timeslices) -> dict[str, np.ndarray]:
    """``region,rep_day,hour,mwh`` → MWh per representative hour, ordered like ``timeslices.keys``."""
    pos = {k: i for i, k in enumerate(timeslices.keys)}
    out: dict[str, np.ndarray] = {}
    seen: dict[str, set] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            r = row["region"]
            key = (int(row["rep_day"]), int(row["hour"]))
            if key not in pos:
                raise ModelError(f"demand row for unknown timeslice {key}")
            arr = out.setdefault(r, np.full(timeslices.n, np.nan))
            arr[pos[key]] = float(row["mwh"])
            seen.setdefault(r, set()).add(key)
    for r, arr in out.items():
        if np.isnan(arr).any():
            raise ModelError(f"demand for {r} does not cover every timeslice")
    return out


def read_growth_csv(path) -> dict[str, dict[int, float]]:
    out: dict[str, dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["region"], {})[int(row["year"])] = float(row["factor"])
    return out


def read_trade_csv(path) -> list[Border]:
    """``border,year,price_low,price_high,capacity_mw``; border ids are ``<region>-<neighbour>``."""
    rows: dict[str, list[dict]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(row["border"], []).append(row)
    out = []
    for name in sorted(rows):
        recs = rows[name]
        if "-" not in name:
            raise ModelError(f"border id {name!r} must read <region>-<neighbour>")
        region, neighbour = name.split("-", 1)
        caps = {float(r["capacity_mw"]) for r in recs}
        if len(caps) != 1:
            raise ModelError(f"border {name}: capacity varies across years")
        low = {int(r["year"]): float(r["price_low"]) for r in recs if _opt(r, "price_low") is not None}
        high = {int(r["year"]): float(r["price_high"]) for r in recs if _opt(r, "price_high") is not None}
        out.append(Border(name, region, neighbour, caps.pop(), low, high))
    return out


def read_emissions_csv(path) -> EmissionPolicy:
    """``key,value`` rows: ``baseline_t`` and ``anchor_<year>`` fractions of the baseline."""
    baseline, anchors = None, {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            k, v = row["key"].strip(), float(row["value"])
            if k == "baseline_t":
                baseline = v
            elif k.startswith("anchor_"):
                anchors[int(k[len("anchor_"):])] = v
            else:
                raise ModelError(f"unknown emissions key {k!r}")
    return EmissionPolicy(baseline, anchors or dict(EL_ANCHORS), False)


def read_cf_series_csv(path, timeslices: Timeslices) -> dict[str, np.ndarray]:
    """``rep_day,hour,<series...>`` → series ordered like ``timeslices.keys``."""
    pos = {k: i for i, k in enumerate(timeslices.keys)}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = header[2:]
        out = {n: np.full(timeslices.n, np.nan) for n in names}
        for row in reader:
            i = pos.get((int(row[0]), int(row[1])))
            if i is None:
                continue
            for n, v in zip(names, row[2:]):
                out[n][i] = float(v)
    for n, arr in out.items():
        if np.isnan(arr).any():
            raise ModelError(f"CF series {n} does not cover every timeslice")
    return out

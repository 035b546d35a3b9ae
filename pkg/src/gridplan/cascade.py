"""Hydropower cascade: topology, inflows and water-balance fragments for the expansion LP.

Water flows are in MCM per representative hour.  Each representative day is
balanced on its own with a cyclic closure: every reservoir ends hour 23 at the
level it started hour 0 with, and that start level is one free variable per
reservoir and year shared by all days.
"""

from __future__ import annotations

import configparser
import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .esom import ModelBuilder, Technology, Timeslices

logger = logging.getLogger(__name__)

NODE_KINDS = ("catchment", "river_segment", "reservoir", "plant", "spillway")
_NUM_FIELDS = ("storage_mcm", "level_min_mcm", "level_max_mcm", "capacity_mw", "rate_mwh_per_mcm",
               "flow_cap_mcm_per_day", "capex", "fixed_om", "var_om", "max_new_mw")


class CascadeError(ValueError):
    pass


@dataclass(frozen=True)
class CascadeNode:
    node_id: str
    kind: str
    region: str = ""
    river: str | None = None  # inflow record entering at this node
    storage_mcm: float | None = None
    level_min_mcm: float = 0.0
    level_max_mcm: float | None = None
    capacity_mw: float | None = None
    rate_mwh_per_mcm: float | None = None
    flow_cap_mcm_per_day: float | None = None
    capex: float = 0.0
    fixed_om: float = 0.0
    var_om: float = 0.0
    life: int = 100
    max_new_mw: float = 0.0  # the cascade is not expanded unless allowed

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise CascadeError(f"{self.node_id}: unknown kind {self.kind!r}")
        if self.kind == "reservoir":
            if self.storage_mcm is None or self.storage_mcm <= 0:
                raise CascadeError(f"{self.node_id}: reservoir storage must be > 0")
            hi = self.storage_mcm if self.level_max_mcm is None else self.level_max_mcm
            if not 0.0 <= self.level_min_mcm <= hi <= self.storage_mcm:
                raise CascadeError(f"{self.node_id}: level bounds must satisfy 0 <= min <= max <= storage")
        if self.kind == "plant":
            if self.rate_mwh_per_mcm is None or self.rate_mwh_per_mcm <= 0:
                raise CascadeError(f"{self.node_id}: plant energy-per-water rate must be > 0")
            if self.capacity_mw is None or self.capacity_mw < 0:
                raise CascadeError(f"{self.node_id}: plant capacity must be >= 0")
            if not self.region:
                raise CascadeError(f"{self.node_id}: plant needs a region")

    @property
    def level_bounds(self) -> tuple[float, float]:
        hi = self.storage_mcm if self.level_max_mcm is None else self.level_max_mcm
        return self.level_min_mcm, hi


@dataclass(frozen=True)
class CascadeTopology:
    nodes: tuple[CascadeNode, ...]
    links: tuple[tuple[str, str], ...]
    rivers: tuple[str, ...] = ()

    def __post_init__(self):
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise CascadeError(f"duplicate node_id: {', '.join(dup)}")
        known = set(ids)
        for u, v in self.links:
            for end in (u, v):
                if end not in known:
                    raise CascadeError(f"dangling link {u} -> {v}: unknown node {end!r}")
            if u == v:
                raise CascadeError(f"cycle detected: self-link at {u}")
        if len(set(self.links)) != len(self.links):
            raise CascadeError("duplicate link")
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.node_id)))
        object.__setattr__(self, "links", tuple(sorted(self.links)))
        rivers = self.rivers or tuple(sorted({n.river for n in self.nodes if n.river}))
        object.__setattr__(self, "rivers", tuple(rivers))
        self._check_acyclic()
        self._check_roles()

    # graph helpers
    def node(self, node_id: str) -> CascadeNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise CascadeError(f"unknown node {node_id!r}")

    def upstream(self, node_id: str) -> list[str]:
        return [u for u, v in self.links if v == node_id]

    def downstream(self, node_id: str) -> list[str]:
        return [v for u, v in self.links if u == node_id]

    def of_kind(self, kind: str) -> list[CascadeNode]:
        return [n for n in self.nodes if n.kind == kind]

    @property
    def entry_nodes(self) -> list[CascadeNode]:
        """Nodes where river or catchment water enters."""
        return [n for n in self.nodes if n.river]

    @property
    def entry_segments(self) -> list[CascadeNode]:
        return [n for n in self.entry_nodes if n.kind == "river_segment" and not self.upstream(n.node_id)]

    @property
    def terminal_nodes(self) -> list[CascadeNode]:
        return [n for n in self.nodes if not self.downstream(n.node_id)]

    def topological_order(self) -> list[str]:
        indeg = {n.node_id: 0 for n in self.nodes}
        for _, v in self.links:
            indeg[v] += 1
        ready = sorted(k for k, d in indeg.items() if d == 0)
        order = []
        while ready:
            u = ready.pop(0)
            order.append(u)
            for v in self.downstream(u):
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
                    ready.sort()
        return order

    def _check_acyclic(self):
        order = self.topological_order()
        if len(order) != len(self.nodes):
            stuck = sorted(set(n.node_id for n in self.nodes) - set(order))
            raise CascadeError(f"cycle detected among: {', '.join(stuck)}")

    def _check_roles(self):
        for n in self.nodes:
            up, down = self.upstream(n.node_id), self.downstream(n.node_id)
            if n.kind == "plant":
                if len(up) != 1:
                    raise CascadeError(f"plant {n.node_id} needs exactly one upstream water source, has {len(up)}")
                if len(down) != 1:
                    raise CascadeError(f"plant {n.node_id} needs exactly one downstream sink, has {len(down)}")
                if n.river:
                    raise CascadeError(f"plant {n.node_id} cannot take river inflow directly")
            if n.kind == "reservoir":
                if not down:
                    raise CascadeError(f"reservoir {n.node_id} must drain through a plant or spillway")
                bad = [d for d in down if self.node(d).kind not in ("plant", "spillway")]
                if bad:
                    raise CascadeError(f"reservoir {n.node_id} drains into {', '.join(bad)}, not a plant or spillway")
            if n.kind == "catchment" and up:
                raise CascadeError(f"catchment {n.node_id} cannot have upstream links")

    def describe(self) -> str:
        """Human-readable dump in topological order."""
        lines = [f"cascade: {len(self.nodes)} nodes, {len(self.links)} links, rivers {', '.join(self.rivers)}"]
        for nid in self.topological_order():
            n = self.node(nid)
            attrs = [n.kind]
            if n.region:
                attrs.append(f"region={n.region}")
            if n.river:
                attrs.append(f"river={n.river}")
            if n.kind == "reservoir":
                attrs.append(f"storage={n.storage_mcm:g} MCM")
            if n.kind == "plant":
                attrs.append(f"{n.capacity_mw:g} MW, {n.rate_mwh_per_mcm:g} MWh/MCM")
            down = self.downstream(nid)
            lines.append(f"  {nid} [{'; '.join(attrs)}] -> {', '.join(down) if down else '(outlet)'}")
        return "\n".join(lines)


def build_topology(path) -> CascadeTopology:
    """Parse an INI topology: one ``[node <id>]`` section per node plus ``[links]`` (upstream = downstream, ...)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    text = Path(path).read_text(encoding="utf-8")
    try:
        cp.read_string(text)
    except configparser.DuplicateSectionError as exc:
        raise CascadeError(f"duplicate node_id: {exc.section.split(None, 1)[-1]}") from exc
    return topology_from_config(cp)


def topology_from_config(cp: configparser.ConfigParser) -> CascadeTopology:
    nodes, links = [], []
    rivers: tuple[str, ...] = ()
    for sec in cp.sections():
        if sec.startswith("node "):
            nid = sec[len("node "):].strip()
            kw = {"node_id": nid}
            for key, val in cp[sec].items():
                if key in _NUM_FIELDS:
                    kw[key] = float(val)
                elif key == "life":
                    kw[key] = int(val)
                elif key in ("kind", "region", "river"):
                    kw[key] = val.strip()
                else:
                    raise CascadeError(f"node {nid}: unknown attribute {key!r}")
            if "kind" not in kw:
                raise CascadeError(f"node {nid}: missing kind")
            nodes.append(CascadeNode(**kw))
        elif sec == "links":
            for up, downs in cp[sec].items():
                for d in downs.split(","):
                    if d.strip():
                        links.append((up.strip(), d.strip()))
        elif sec == "cascade":
            rv = cp[sec].get("rivers", "")
            rivers = tuple(r.strip() for r in rv.split(",") if r.strip())
        else:
            raise CascadeError(f"unknown section [{sec}]")
    return CascadeTopology(tuple(nodes), tuple(links), rivers)


def format_topology(topo: CascadeTopology) -> str:
    """Inverse of :func:`build_topology`."""
    out = []
    if topo.rivers:
        out += ["[cascade]", f"rivers = {', '.join(topo.rivers)}", ""]
    defaults = CascadeNode("_", "spillway")
    for n in topo.nodes:
        out.append(f"[node {n.node_id}]")
        out.append(f"kind = {n.kind}")
        for key in ("region", "river", *_NUM_FIELDS, "life"):
            v = getattr(n, key)
            if v is None or v == "" or (v == getattr(defaults, key) and key != "kind"):
                continue
            out.append(f"{key} = {format(v, '.12g') if isinstance(v, float) else v}")
        out.append("")
    out.append("[links]")
    grouped = defaultdict(list)
    for u, v in topo.links:
        grouped[u].append(v)
    for u in sorted(grouped):
        out.append(f"{u} = {', '.join(grouped[u])}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- inflows


@dataclass(frozen=True)
class InflowRecord:
    river: str
    discharge: np.ndarray  # MCM/day, index 0 is day-of-year 1

    def __post_init__(self):
        d = np.asarray(self.discharge, dtype=float)
        if d.ndim != 1 or d.size not in (365, 366):
            raise CascadeError(f"{self.river}: inflow record needs 365 or 366 daily values, has {d.size}")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise CascadeError(f"{self.river}: discharge must be finite and >= 0")
        d.setflags(write=False)
        object.__setattr__(self, "discharge", d)

    def day(self, day_of_year: int) -> float:
        return float(self.discharge[day_of_year - 1])


def read_inflows_csv(path) -> dict[str, InflowRecord]:
    """``river,day_of_year,discharge_mcm_per_day`` (day_of_year from 1)."""
    raw: dict[str, dict[int, float]] = defaultdict(dict)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            river, doy = row["river"].strip(), int(row["day_of_year"])
            if doy in raw[river]:
                raise CascadeError(f"{river}: duplicate day {doy}")
            raw[river][doy] = float(row["discharge_mcm_per_day"])
    out = {}
    for river in sorted(raw):
        days = sorted(raw[river])
        if days != list(range(1, len(days) + 1)):
            raise CascadeError(f"{river}: days must run 1..N without gaps")
        out[river] = InflowRecord(river, np.array([raw[river][d] for d in days]))
    return out


def write_inflows_csv(records: Mapping[str, InflowRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("river,day_of_year,discharge_mcm_per_day\n")
        for river in sorted(records):
            for i, v in enumerate(records[river].discharge):
                fh.write(f"{river},{i + 1},{format(float(v), '.12g')}\n")


def _as_timeslices(rep_days) -> Timeslices:
    return rep_days if isinstance(rep_days, Timeslices) else Timeslices.from_repdays(rep_days)


def inflow_per_timeslice(records: Mapping[str, InflowRecord], rep_days,
                         topology: CascadeTopology | None = None) -> dict[str, np.ndarray]:
    """MCM entering per representative hour: 1/24 of the day's discharge, constant within the day.

    Keys are rivers, or entry node ids when a topology is given.  ``rep_day``
    indices are 0-based days of the year.
    """
    ts = _as_timeslices(rep_days)
    if topology is None:
        wanted = {r: r for r in records}
    else:
        wanted = {n.node_id: n.river for n in topology.entry_nodes}
    out = {}
    for key, river in sorted(wanted.items()):
        if river not in records:
            raise CascadeError(f"no inflow record for river {river!r}")
        rec = records[river]
        daily = []
        for d in ts.days:
            if not 0 <= d < rec.discharge.size:
                raise CascadeError(f"{river}: no discharge for representative day {d}")
            daily.append(rec.discharge[d])
        out[key] = np.repeat(np.array(daily) / ts.hours, ts.hours)
    return out


def segment_capacities(records: Mapping[str, InflowRecord],
                       topology: CascadeTopology | None = None) -> dict[str, float]:
    """Maximum daily discharge (MCM/day) per river, or per river segment when a topology is given.

    Segments without a river and without an explicit cap are left out (unbounded).
    """
    per_river = {}
    for river in sorted(records):
        cap = float(records[river].discharge.max())
        if cap == 0.0:
            logger.warning("river %s has an all-zero inflow record; segment capacity 0", river)
        per_river[river] = cap
    if topology is None:
        return per_river
    out = {}
    for n in topology.of_kind("river_segment"):
        if n.flow_cap_mcm_per_day is not None:
            out[n.node_id] = n.flow_cap_mcm_per_day
        elif n.river:
            if n.river not in per_river:
                raise CascadeError(f"no inflow record for river {n.river!r}")
            out[n.node_id] = per_river[n.river]
    return out


# ---------------------------------------------------------------- LP fragments


def plant_technologies(topology: CascadeTopology) -> list[Technology]:
    """One expansion technology per plant; residual capacity is the installed MW."""
    out = []
    for n in topology.of_kind("plant"):
        up = topology.upstream(n.node_id)
        if not up:
            raise CascadeError(f"plant {n.node_id} has no water source")
        kind = "hydro_storage" if topology.node(up[0]).kind == "reservoir" else "hydro_ror"
        out.append(Technology(n.node_id, n.region, kind, capex=n.capex, fixed_om=n.fixed_om, var_om=n.var_om,
                              life=n.life, residual_mw=float(n.capacity_mw), cf=1.0, max_new_mw=n.max_new_mw))
    return out


@dataclass
class CascadeFragment:
    """Water variables and balances; ``apply`` registers them on a :class:`ModelBuilder`."""

    topology: CascadeTopology
    inflows: Mapping[str, np.ndarray]  # entry node -> MCM per representative hour
    capacities: Mapping[str, float] = field(default_factory=dict)  # segment -> MCM/day
    applied: bool = False

    def __post_init__(self):
        for n in self.topology.of_kind("plant"):
            if not self.topology.upstream(n.node_id):
                raise CascadeError(f"plant {n.node_id} has no water source")
        missing = [n.node_id for n in self.topology.entry_nodes if n.node_id not in self.inflows]
        if missing:
            raise CascadeError(f"missing inflow for entry nodes: {', '.join(missing)}")

    def technologies(self) -> list[Technology]:
        return plant_technologies(self.topology)

    def apply(self, b: ModelBuilder) -> None:
        if self.applied:
            raise CascadeError("cascade fragment applied twice")
        topo = self.topology
        ts = b.sets.timeslices
        n_ts, hours = ts.n, ts.hours
        ts_keys = ts.keys
        weights = ts.duration  # days behind each timeslice
        plant_names = {n.node_id for n in topo.of_kind("plant")}
        missing = plant_names - {t.name for t in b.techs}
        if missing:
            raise CascadeError(f"plant technologies missing from the model: {', '.join(sorted(missing))}")
        for n in topo.entry_nodes:
            if np.asarray(self.inflows[n.node_id]).shape != (n_ts,):
                raise CascadeError(f"inflow for {n.node_id} does not match the timeslices")
        # previous-hour index within each day
        idx = np.arange(n_ts)
        first_hour = idx % hours == 0
        last_hour = idx % hours == hours - 1
        self.cols: dict = {}
        for y in b.sets.years:
            flow = {(u, v): b.add_vars("water", [(u, v, y, d, h) for d, h in ts_keys]) for u, v in topo.links}
            exits = {n.node_id: b.add_vars("exit", [(n.node_id, y, d, h) for d, h in ts_keys])
                     for n in topo.terminal_nodes}
            levels, level0 = {}, {}
            for n in topo.of_kind("reservoir"):
                lo, hi = n.level_bounds
                levels[n.node_id] = b.add_vars("level", [(n.node_id, y, d, h) for d, h in ts_keys], lo, hi)
                level0[n.node_id] = b.add_vars("level0", [(n.node_id, y)], lo, hi)[0]
            self.cols[y] = {"flow": flow, "exit": exits, "level": levels, "level0": level0}
            for n in topo.nodes:
                nid = n.node_id
                inflow = np.asarray(self.inflows.get(nid, np.zeros(n_ts)), float)
                rows = b.add_rows("water_bal", [(nid, y, d, h) for d, h in ts_keys], "E", inflow)
                for u in topo.upstream(nid):
                    b.add_coefs(rows, flow[u, nid], -1.0)
                outs = [flow[nid, v] for v in topo.downstream(nid)]
                if nid in exits:
                    outs.append(exits[nid])
                for cols in outs:
                    b.add_coefs(rows, cols, 1.0)
                if n.kind == "reservoir":
                    lev = levels[nid]
                    b.add_coefs(rows, lev, 1.0)
                    prev = np.where(first_hour, -1, idx - 1)
                    b.add_coefs(rows[~first_hour], lev[prev[~first_hour]], -1.0)
                    b.add_coefs(rows[first_hour], np.full(first_hour.sum(), level0[nid]), -1.0)
                    close = b.add_rows("level_close", [(nid, y, d) for d in ts.days], "E", 0.0)
                    b.add_coefs(close, lev[last_hour], 1.0)
                    b.add_coefs(close, np.full(close.size, level0[nid]), -1.0)
                if n.kind == "plant":
                    rows_p = b.add_rows("plant_water", [(nid, y, d, h) for d, h in ts_keys], "E", 0.0)
                    b.add_coefs(rows_p, b.gen[nid, y], 1.0)
                    b.add_coefs(rows_p, flow[topo.upstream(nid)[0], nid], -n.rate_mwh_per_mcm * weights)
                if n.kind == "river_segment" and nid in self.capacities:
                    cap = self.capacities[nid] / hours
                    rows_s = b.add_rows("segment_cap", [(nid, y, d, h) for d, h in ts_keys], "L", cap,
                                        group=f"segment:{nid}")
                    for cols in outs:
                        b.add_coefs(rows_s, cols, 1.0)
        self.applied = True


def compile_to_model(topology: CascadeTopology, inflows: Mapping[str, np.ndarray],
                     capacities: Mapping[str, float] | None = None) -> CascadeFragment:
    return CascadeFragment(topology, dict(inflows), dict(capacities or {}))


# ---------------------------------------------------------------- checks and reports


def water_balance_residuals(model, fragment: CascadeFragment, x) -> np.ndarray:
    """|activity − inflow| for every water balance row of a solved model."""
    lp = model.lp
    rows = model.family_rows("water_bal")
    return np.abs(lp.activity(x)[rows] - lp.b[rows])


def annual_water_account(model, fragment: CascadeFragment, x, year: int) -> dict[str, float]:
    """Whole-cascade totals in MCM over one year: inflow, outflow through outlets, storage change."""
    x = np.asarray(x)[model.col_perm]  # indexed by builder column
    ts = model.builder.sets.timeslices
    w = ts.duration
    n_ts, hours = ts.n, ts.hours
    inflow = sum(float((np.asarray(v) * w).sum()) for v in fragment.inflows.values())
    cols = fragment.cols[year]
    out = sum(float((x[c] * w).sum()) for c in cols["exit"].values())
    delta = 0.0
    last = np.arange(n_ts) % hours == hours - 1
    for nid, lev in cols["level"].items():
        # weight each day's net change (end of day minus start level)
        delta += float(((x[lev[last]] - x[cols["level0"][nid]]) * ts.weights).sum())
    return {"inflow": inflow, "outflow": out, "storage_change": delta}


def storage_levels(model, fragment: CascadeFragment, x) -> dict[tuple[str, int], np.ndarray]:
    """(reservoir, year) -> end-of-hour level per timeslice in MCM."""
    x = np.asarray(x)[model.col_perm]
    return {(nid, y): x[lev].copy() for y, c in fragment.cols.items() for nid, lev in sorted(c["level"].items())}

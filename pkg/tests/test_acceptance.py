"""Acceptance checks; each test prints a single PASS/FAIL line."""

import dataclasses
import math
import time

import numpy as np
import pytest

from gridplan import repdays
from gridplan.cascade import annual_water_account, water_balance_residuals
from gridplan.esom import Technology, discount_factor
from gridplan.lpsolve import SolveOptions, Status, brute_force_oracle, read_interchange, solve, write_interchange
from gridplan.repdays import duration_curve_error
from gridplan.runner import run
from gridplan.synthetic import gradient_raster, profile_suite, write_dataset
from gridplan.vre import (
    EligibleLandGrid,
    LandCell,
    allocate_bin_land,
    bin_shares,
    capacity_potential,
    sample_raster,
    summarize_potentials,
)

from conftest import desk_config, make_table2_resources, random_feasible_lp
from test_cascade import chain, flow, solve_toy
from test_esom import BACKUP, CHEAP, cap, gen, solved, toy


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail=""):
        with capsys.disabled():
            print(f"\nCRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def test_c01_table2(verdict):
    t0 = time.perf_counter()
    inv = summarize_potentials(make_table2_resources())
    dt = time.perf_counter() - t0
    want = {"BA": (12.6, 8.4, 2.1), "ME": (6.5, 2.0, 1.8), "RS": (10.5, 48.9, 1.6)}
    keys = ("shared", "agricultural", "solar_only")
    ok = all(abs(inv.regions[r][k] / 1000 - v) <= 0.05 for r, vals in want.items() for k, v in zip(keys, vals))
    ok &= all(abs(inv.totals[k] / 1000 - v) <= 0.05 for k, v in zip(keys, (29.6, 59.3, 5.5)))
    ok &= abs(inv.grand_total_mw / 1000 - 94.4) <= 0.05 and dt < 1.0
    verdict(1, ok, f"grand total {inv.grand_total_mw / 1000:.2f} GW in {dt:.3f} s")


def test_c02_density(verdict):
    p = capacity_potential(1.0)
    ok = p == pytest.approx(1.7, abs=1e-12) and 0.999 <= 0.588 * p <= 1.001
    verdict(2, ok, f"1 km2 -> {p} MW, 0.588 x 1.7 = {0.588 * p:.4f}")


def test_c03_land_conservation(verdict):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        raw = rng.random(5) * (rng.random(5) < 0.8)
        raw = raw if raw.sum() > 0 else np.ones(5)
        shares = raw / raw.sum()
        eligible = float(rng.uniform(0.0, 1e5))
        land, excl = allocate_bin_land(eligible, shares[:4], float(shares[4]))
        worst = max(worst, abs(math.fsum(land) + excl - eligible) / max(eligible, 1e-300))
    verdict(3, worst <= 1e-9, f"max relative error {worst:.2e}")


def test_c04_stratified_sampling(verdict):
    grid = EligibleLandGrid((LandCell("c0", "X", 20.0, 44.0, 100.0),), 0.27)
    sample = sample_raster(grid, gradient_raster(grid), n_points=10_000, seed=42)
    s = bin_shares(sample.samples["c0"])
    closure = abs(s.shares.sum() + s.excluded_share - 1.0)
    ok = bool(np.all(np.abs(s.shares - 0.25) <= 0.02)) and closure <= 1e-9
    verdict(4, ok, f"shares {np.round(s.shares, 4).tolist()}, closure {closure:.1e}")


def test_c05_clustering(verdict):
    t0 = time.perf_counter()
    profiles = profile_suite(seed=7)
    problems = []
    for k in (1, 5, 15, 40):
        rs = repdays.represent(profiles, k)
        if rs.weights.sum() != 365:
            problems.append(f"weights k={k}")
        for p in profiles:
            if abs(rs.weighted_mean(p.series_id) - p.values.mean()) > 1e-9:
                problems.append(f"mean {p.series_id} k={k}")
    e5 = duration_curve_error(profiles, repdays.represent(profiles, 5))
    e15 = duration_curve_error(profiles, repdays.represent(profiles, 15))
    problems += [f"order {sid}" for sid in e5 if e15[sid].rmse > e5[sid].rmse]
    full = duration_curve_error(profiles, repdays.represent(profiles, 365))
    problems += [f"k=n {sid}" for sid, e in full.items() if e.rmse != 0.0 or e.max_abs != 0.0]
    dt = time.perf_counter() - t0
    if dt >= 10.0:
        problems.append(f"runtime {dt:.1f} s")
    verdict(5, not problems, ", ".join(problems) or f"{len(profiles)} series, {dt:.2f} s")


def test_c06_simplex_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    opts = SolveOptions(method="simplex")
    bad = 0
    for _ in range(100):
        p = random_feasible_lp(rng)
        s, o = solve(p, opts), brute_force_oracle(p)
        if not (s.optimal and o.status is Status.OPTIMAL
                and abs(s.objective - o.objective) <= 1e-6 * max(1.0, abs(o.objective))):
            bad += 1
    from gridplan.lpsolve import LinearProgram

    infeas = LinearProgram.from_dense([1.0, 1.0], [[1, 1], [1, 1]], "LG", [1, 2], [0, 0], [np.inf, np.inf])
    unbnd = LinearProgram.from_dense([-1.0, -1.0], [[1.0, -1.0]], "L", [1.0], [0, 0], [np.inf, np.inf])
    classified = (solve(infeas, opts).status is Status.INFEASIBLE
                  and solve(unbnd, opts).status is Status.UNBOUNDED)
    dt = time.perf_counter() - t0
    verdict(6, bad == 0 and classified and dt < 5.0,
            f"{100 - bad}/100 agree, fixtures {'ok' if classified else 'misclassified'}, {dt:.2f} s")


def test_c07_toy_optimum(verdict):
    m = toy([CHEAP, BACKUP], [10.0, 8.0])
    sol = solved(m)
    hand = 1.0 * 10 + 10.0 * 8 + 0.1 * 5 + 0.2 * 5
    ok = abs(sol.objective - hand) <= 1e-6 * hand
    ok &= np.allclose(gen(m, sol, "cheap"), [5.0, 5.0], atol=1e-9)
    mr = toy([CHEAP, BACKUP], [10.0, 8.0], reserve_margin=0.2)
    sr = solved(mr)
    total = cap(mr, sr, "cheap")[0] + cap(mr, sr, "backup")[0]
    ok &= abs(total - 1.2 * 10.0) <= 1e-6
    verdict(7, ok, f"cost {sol.objective:.6f} vs {hand}, margin capacity {total:.6f}")


def test_c08_discounting(verdict):
    d = discount_factor(2030)
    t = Technology("g", "R", "thermal", capex=100.0, fixed_om=10.0, var_om=2.0)
    m = toy([t], [3.0, 4.0], years=(2030,), reserve_margin=0.2, salvage="none")
    sol = solved(m)
    hand = 1.05 ** -10 * (100.0 * 4.8 + 10.0 * 4.8 + 2.0 * 7.0)
    ok = abs(d - 0.61391) <= 1e-4 and discount_factor(2020) == 1.0
    ok &= abs(sol.objective - hand) <= 1e-9 * hand
    verdict(8, ok, f"discount(2030) {d:.6f}, toy {sol.objective:.10f} vs {hand:.10f}")


def test_c09_cascade_conservation(verdict):
    inflow = np.array([4.0, 1.0, 0.0, 2.5])
    backup = Technology("backup", "R", "thermal", var_om=50.0)
    m, frag, sol = solve_toy(chain(), {"c": inflow}, [1.0, 1.0, 1.0, 1.0], weights=(3.0, 2.0), extra_techs=[backup])
    res = water_balance_residuals(m, frag, sol.x).max()
    acc = annual_water_account(m, frag, sol.x, 2020)
    gap = abs(acc["inflow"] - acc["outflow"] - acc["storage_change"])
    g = m.values(sol.x, m.builder.gen["p", 2020])
    q = flow(m, frag, sol, "c", "p")
    dur = m.builder.sets.timeslices.duration
    limits = bool(np.all(g <= 10.0 * dur + 1e-9) and np.all(g <= q * 2.0 * dur + 1e-9))
    ok = res <= 1e-6 * max(inflow.max(), 1.0) and gap <= 1e-6 and limits
    verdict(9, ok, f"max residual {res:.1e}, annual gap {gap:.1e}, limits {'hold' if limits else 'violated'}")


def test_c10_el_trajectory(desk_runs, verdict):
    res = desk_runs["EL"]
    em = res.emissions.groupby("year")["mt"].sum()
    base = res.inputs.params.emissions.baseline_t / 1e6
    ok = em[2030] <= 0.45 * base + 1e-6 and em[2050] <= 1e-6
    verdict(10, ok, f"2030 {em[2030]:.4f} Mt (cap {0.45 * base:.4f}), 2050 {em[2050]:.2e} Mt")


def test_c11_end_to_end(tmp_path, verdict):
    write_dataset(tmp_path / "data", preset="desk")
    cfg = desk_config(tmp_path, "REF")
    t0 = time.perf_counter()
    first = run(cfg)
    dt = time.perf_counter() - t0
    run(dataclasses.replace(cfg, output=tmp_path / "runs" / "again"))
    a, b = cfg.output, tmp_path / "runs" / "again"
    names = sorted(p.name for p in a.iterdir() if p.name != "timings.json")
    same = names == sorted(p.name for p in b.iterdir() if p.name != "timings.json")
    same &= all((a / n).read_bytes() == (b / n).read_bytes() for n in names)
    lp = first.model.lp
    write_interchange(lp, tmp_path / "model.mps")
    round_trip = read_interchange(tmp_path / "model.mps").structurally_equal(lp)
    techs = {t.name.split("_", 1)[1].split("_")[0] for t in first.inputs.technologies}
    shape = (len(first.inputs.sets.regions) == 3 and len(first.inputs.sets.timeslices.days) == 4
             and len(first.inputs.sets.years) == 31 and len(techs) == 5)
    ok = dt < 60.0 and same and round_trip and shape
    verdict(11, ok, f"{dt:.1f} s, {lp.n_rows} rows x {lp.n_cols} cols, identical {same}, "
                    f"mps {round_trip}, shape {shape}")

import dataclasses
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridplan.esom import (
    BLOCKS,
    Border,
    EmissionPolicy,
    ModelBuilder,
    ModelError,
    ModelSets,
    SystemParams,
    Technology,
    Timeslices,
    balance_residuals,
    build_model,
    discount_factor,
    emission_limit,
    read_technologies_csv,
    salvage_fraction,
    write_technologies_csv,
)
from gridplan.lpsolve import solve


def toy(techs, demand, years=(2020,), region="R", **params):
    """One region; each entry of ``demand`` is a one-hour timeslice (MWh = MW)."""
    demand = np.asarray(demand, float)
    ts = Timeslices((0,), [1.0], hours=demand.size)
    sets = ModelSets(tuple(years), ts, (region,))
    params.setdefault("reserve_margin", 0.0)
    return build_model(sets, techs, SystemParams(demand={region: demand}, **params))


def solved(model):
    sol = solve(model.lp)
    assert sol.optimal, sol.message
    return sol


def gen(model, sol, tech, year=2020):
    return model.values(sol.x, model.builder.gen[tech, year])


def cap(model, sol, tech, family="cap_total"):
    return model.values(sol.x, getattr(model.builder, family)[tech])


CHEAP = Technology("cheap", "R", "thermal", fixed_om=0.1, var_om=1.0, max_total_mw=5.0)
BACKUP = Technology("backup", "R", "thermal", fixed_om=0.2, var_om=10.0)


class TestTimeslices:
    def test_duration_sums_to_year(self):
        w = np.array([100.0, 150.0, 115.0])
        ts = Timeslices((3, 40, 200), w)
        assert ts.n == 72
        assert ts.duration.sum() == pytest.approx(8760.0, abs=1e-6)
        assert ts.keys[:2] == [(3, 0), (3, 1)]

    def test_invalid(self):
        with pytest.raises(ModelError):
            Timeslices((1, 1), [1.0, 1.0])
        with pytest.raises(ModelError):
            Timeslices((1,), [0.0])

    def test_sets_sorted_and_unique(self):
        ts = Timeslices((0,), [1.0])
        s = ModelSets((2022, 2020, 2021), ts, ("RS", "BA"))
        assert s.years == (2020, 2021, 2022) and s.regions == ("BA", "RS")
        with pytest.raises(ModelError):
            ModelSets((2020, 2020), ts, ("R",))


class TestTechnologyParams:
    @pytest.mark.parametrize("kw", [dict(kind="nuclear"), dict(life=0), dict(capex=-1.0), dict(cf=1.5)])
    def test_validation(self, kw):
        base = dict(name="t", region="R", kind="thermal")
        with pytest.raises(ModelError):
            Technology(**{**base, **kw})

    def test_residual_retirement(self):
        t = Technology("c", "R", "thermal", residual_mw=100.0, retire_year=2030)
        assert t.residual(2029) == 100.0 and t.residual(2030) == 0.0

    def test_credits(self):
        assert Technology("w", "R", "wind").credit(0.5) == 0.0
        assert Technology("h", "R", "hydro_storage").credit(0.5) == 1.0
        assert Technology("r", "R", "hydro_ror").credit(0.5) == 0.5

    def test_system_params_validation(self):
        with pytest.raises(ModelError):
            SystemParams(demand={}, reserve_margin=-0.1)
        with pytest.raises(ModelError):
            SystemParams(demand={}, discount_rate=1.0)
        with pytest.raises(ModelError):
            SystemParams(demand={}, losses={"R": 1.0})

    def test_csv_round_trip(self, tmp_path):
        techs = [Technology("a", "R", "wind", capex=1.5, cf="R_wind_30-40", land_bin="R/30-40"),
                 Technology("b", "R", "thermal", residual_mw=3.0, retire_year=2031, emission_factor=0.9,
                            fuel="coal", firm_credit=0.8)]
        write_technologies_csv(techs, tmp_path / "t.csv")
        assert read_technologies_csv(tmp_path / "t.csv") == techs


class TestDemandBalance:
    def test_single_tech_binding(self):
        m = toy([Technology("g", "R", "thermal", var_om=1.0)], [10.0])
        sol = solved(m)
        assert gen(m, sol, "g")[0] == pytest.approx(10.0, abs=1e-9)

    def test_losses(self):
        m = toy([Technology("g", "R", "thermal", var_om=1.0)], [9.0], losses={"R": 0.1})
        sol = solved(m)
        assert gen(m, sol, "g")[0] == pytest.approx(10.0, abs=1e-9)

    def test_imports_cover_demand_when_cheaper(self):
        # firm capacity exists for the reserve row, but imports undercut its running cost
        t = Technology("g", "R", "thermal", var_om=20.0, residual_mw=10.0, max_new_mw=0.0)
        b = Border("R-X", "R", "X", 100.0, {2020: 5.0}, {2020: 8.0})
        m = toy([t], [7.0, 4.0], borders=(b,))
        sol = solved(m)
        imp = m.values(sol.x, m.builder.imp["R-X", 2020])
        np.testing.assert_allclose(imp, [7.0, 4.0], atol=1e-9)
        np.testing.assert_allclose(gen(m, sol, "g"), 0.0, atol=1e-9)
        assert sol.objective == pytest.approx(5.0 * 11.0)

    def test_merit_order_toy(self):
        # cheap unit capped at half the peak; backup covers the rest
        m = toy([CHEAP, BACKUP], [10.0, 8.0])
        sol = solved(m)
        np.testing.assert_allclose(gen(m, sol, "cheap"), [5.0, 5.0], atol=1e-9)
        np.testing.assert_allclose(gen(m, sol, "backup"), [5.0, 3.0], atol=1e-9)
        hand = 1.0 * 10 + 10.0 * 8 + 0.1 * 5 + 0.2 * 5
        assert sol.objective == pytest.approx(hand, rel=1e-6)

    def test_missing_demand(self):
        ts = Timeslices((0,), [1.0], hours=1)
        with pytest.raises(ModelError, match="no demand"):
            build_model(ModelSets((2020,), ts, ("R", "S")), [], SystemParams(demand={"R": np.ones(1)}))

    def test_unknown_region(self):
        with pytest.raises(ModelError, match="unknown region"):
            toy([Technology("g", "Q", "thermal")], [1.0])


class TestCapacityActivity:
    def test_cf_product(self):
        half = Technology("half", "R", "thermal", cf=0.5, residual_mw=1.0, max_new_mw=0.0)
        m = toy([half, BACKUP], [10.0])
        sol = solved(m)
        assert gen(m, sol, "half")[0] == pytest.approx(0.5, abs=1e-9)

    def test_vintage_window(self):
        t = Technology("w", "R", "thermal", life=10)
        m = toy([t], [1.0], years=range(2020, 2036))
        A = m.lp.A.tocsr()
        col = m.col("cap_new", "w", 2021)
        inside = [y for y in range(2020, 2036) if A[m.row("cap_acc", "w", y), col] != 0]
        assert inside == list(range(2021, 2031))

    def test_series_cf(self):
        series = np.array([0.2, 0.7, 0.0])
        t = Technology("wind", "R", "wind", cf="R_wind_30-40")
        m = toy([t, BACKUP], [1.0, 1.0, 1.0], cf_series={"R_wind_30-40": series})
        A = m.lp.A.tocsr()
        capcol = m.col("cap_total", "wind", 2020)
        coefs = [A[m.row("activity", "wind", 2020, 0, h), capcol] for h in range(3)]
        np.testing.assert_allclose(coefs, -series)

    def test_missing_series(self):
        with pytest.raises(ModelError, match="missing CF"):
            toy([Technology("wind", "R", "wind", cf="nope")], [1.0])


class TestReserveMargin:
    def test_margin_binds(self):
        m = toy([CHEAP, BACKUP], [10.0, 8.0], reserve_margin=0.2)
        sol = solved(m)
        total = cap(m, sol, "cheap")[0] + cap(m, sol, "backup")[0]
        assert total == pytest.approx(12.0, abs=1e-9)
        hand = 90.0 + 0.1 * 5 + 0.2 * 7
        assert sol.objective == pytest.approx(hand, rel=1e-6)

    def test_zero_margin_is_peak(self):
        m = toy([Technology("g", "R", "thermal", fixed_om=1.0)], [4.0, 6.0], reserve_margin=0.0)
        sol = solved(m)
        assert cap(m, sol, "g")[0] == pytest.approx(6.0, abs=1e-9)

    def test_wind_without_credit_does_not_relax(self):
        firm = Technology("g", "R", "thermal", fixed_om=1.0, var_om=5.0)
        wind = Technology("wind", "R", "wind", fixed_om=0.01, cf=1.0)
        a = solved(m_a := toy([firm], [10.0], reserve_margin=0.2))
        b = solved(m_b := toy([firm, wind], [10.0], reserve_margin=0.2))
        assert cap(m_a, a, "g")[0] == pytest.approx(12.0)
        assert cap(m_b, b, "g")[0] == pytest.approx(12.0)
        assert gen(m_b, b, "wind")[0] == pytest.approx(10.0)


class TestEmissions:
    def test_accounting(self):
        coal = Technology("coal", "R", "thermal", var_om=1.0, emission_factor=0.9)
        m = toy([coal], [100.0])
        sol = solved(m)
        assert m.values(sol.x, m.builder.emis["R"])[0] == pytest.approx(90.0)

    def test_limit_trajectory(self):
        assert emission_limit(2030, 100.0) == pytest.approx(45.0)
        assert emission_limit(2050, 100.0) == 0.0
        assert emission_limit(2040, 100.0) == pytest.approx(22.5)
        assert emission_limit(2029, 100.0) is None

    def test_limit_requires_baseline(self):
        with pytest.raises(ModelError, match="baseline"):
            toy([BACKUP], [1.0], emissions=EmissionPolicy(None, active=True))

    def test_limit_binds(self):
        coal = Technology("coal", "R", "thermal", var_om=1.0, emission_factor=1.0)
        clean = Technology("clean", "R", "thermal", var_om=3.0)
        pol = EmissionPolicy(10.0, {2030: 0.45, 2050: 0.0}, active=True)
        m = toy([coal, clean], [10.0], years=(2030, 2050), emissions=pol)
        sol = solved(m)
        np.testing.assert_allclose(m.values(sol.x, m.builder.emis["R"]), [4.5, 0.0], atol=1e-9)

    def test_zero_factor_block_has_no_effect(self):
        techs = [CHEAP, BACKUP]
        off = solved(toy(techs, [10.0, 8.0]))
        on = solved(toy(techs, [10.0, 8.0], years=(2020,), emissions=EmissionPolicy(5.0, {2020: 0.0}, True)))
        assert on.objective == pytest.approx(off.objective, rel=1e-12)


class TestLandBudget:
    def wind(self, name="wind", **kw):
        return Technology(name, "R", "wind", fixed_om=0.01, land_bin="R/30-40", **kw)

    def test_budget_limits_capacity(self):
        m = toy([self.wind(), BACKUP], [1000.0], land_budgets={"R/30-40": 58.8})
        sol = solved(m)
        assert cap(m, sol, "wind")[0] == pytest.approx(100.0, rel=1e-9)

    def test_shared_bin(self):
        solar = Technology("solar", "R", "solar", fixed_om=0.02, land_bin="R/30-40")
        m = toy([self.wind(cf=0.5), solar, BACKUP], [1000.0], land_budgets={"R/30-40": 58.8})
        sol = solved(m)
        assert cap(m, sol, "wind")[0] + cap(m, sol, "solar")[0] == pytest.approx(100.0, rel=1e-9)

    def test_zero_budget(self):
        m = toy([self.wind(), BACKUP], [10.0], land_budgets={"R/30-40": 0.0})
        sol = solved(m)
        assert cap(m, sol, "wind")[0] == pytest.approx(0.0, abs=1e-9)

    def test_exhausted_bin_blocks_later_builds(self):
        m = toy([self.wind(), BACKUP], [1000.0], years=(2020, 2021, 2022), land_budgets={"R/30-40": 58.8})
        sol = solved(m)
        new = cap(m, sol, "wind", "cap_new")
        assert new[0] == pytest.approx(100.0) and np.allclose(new[1:], 0.0, atol=1e-9)

    def test_unknown_bin(self):
        with pytest.raises(ModelError, match="unknown land bin"):
            toy([self.wind()], [1.0])


class TestTrade:
    def border(self, low=60.0, high=90.0, capacity=100.0):
        return Border("R-X", "R", "X", capacity, {2020: low}, {2020: high})

    def test_flow_bound(self):
        m = toy([BACKUP], [1.0, 1.0], borders=(self.border(),))
        cols = m.final(m.builder.exp["R-X", 2020])
        np.testing.assert_allclose(m.lp.ub[cols], 100.0)

    def test_exports_saturate(self):
        t = Technology("g", "R", "thermal", var_om=1.0)
        m = toy([t], [3.0, 5.0], borders=(self.border(),))
        sol = solved(m)
        np.testing.assert_allclose(m.values(sol.x, m.builder.exp["R-X", 2020]), 100.0, atol=1e-9)
        assert sol.objective == pytest.approx(1.0 * 208 - 60.0 * 200)

    def test_variant_changes_only_prices(self):
        a = toy([BACKUP], [1.0], borders=(self.border(),), trade_variant="low").lp
        b = toy([BACKUP], [1.0], borders=(self.border(),), trade_variant="high").lp
        assert (a.A != b.A).nnz == 0
        assert a.senses == b.senses and a.col_names == b.col_names and a.row_names == b.row_names
        for f in ("b", "lb", "ub"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
        assert not np.array_equal(a.c, b.c)

    def test_internal_link(self):
        ts = Timeslices((0,), [1.0], hours=1)
        cheap = Technology("a", "A", "thermal", var_om=1.0)
        dear = Technology("b", "B", "thermal", var_om=9.0, residual_mw=10.0, max_new_mw=0.0)
        p = SystemParams(demand={"A": np.array([2.0]), "B": np.array([5.0])}, reserve_margin=0.0,
                         borders=(Border("A-B", "A", "B", 4.0),))
        m = build_model(ModelSets((2020,), ts, ("A", "B")), [cheap, dear], p)
        sol = solved(m)
        assert m.values(sol.x, m.builder.link["A-B", 2020])[0] == pytest.approx(4.0)
        assert sol.objective == pytest.approx(1.0 * 6 + 9.0 * 1)


class TestObjective:
    def test_discount(self):
        assert discount_factor(2020) == 1.0
        assert discount_factor(2030) == pytest.approx(1.05 ** -10)
        assert abs(discount_factor(2030) - 0.61391) <= 1e-4

    def test_salvage_fraction(self):
        assert salvage_fraction(2045, 20) == pytest.approx(15 / 20)
        assert salvage_fraction(2020, 30) == 0.0
        assert salvage_fraction(2050, 1) == pytest.approx(1.0)

    def test_one_year_hand_sum(self):
        t = Technology("g", "R", "thermal", capex=100.0, fixed_om=10.0, var_om=2.0)
        m = toy([t], [3.0, 4.0], years=(2030,), reserve_margin=0.2, salvage="none")
        sol = solved(m)
        hand = 1.05 ** -10 * (100.0 * 4.8 + 10.0 * 4.8 + 2.0 * 7.0)
        assert sol.objective == pytest.approx(hand, rel=1e-9)

    def test_salvage_credit(self):
        # remaining life counted as build year + life - horizon end
        t = Technology("g", "R", "thermal", capex=100.0, life=2)
        m = toy([t], [1.0], years=(2020, 2021), salvage="linear")
        c = m.lp.c
        assert c[m.col("cap_new", "g", 2020)] == pytest.approx(100.0 * (1 - 0.5 * 1.05 ** -1))
        assert c[m.col("cap_new", "g", 2021)] == pytest.approx(0.0, abs=1e-12)
        none = toy([t], [1.0], years=(2020, 2021), salvage="none").lp.c
        assert none[m.col("cap_new", "g", 2021)] == pytest.approx(100.0 / 1.05)


class TestAssembly:
    def test_empty_system(self):
        m = toy([], [0.0, 0.0])
        sol = solved(m)
        assert sol.objective == 0.0

    @pytest.mark.parametrize("n_years,hours", [(1, 2), (2, 3)])
    def test_dimensions(self, n_years, hours):
        m = toy([CHEAP, BACKUP], np.ones(hours), years=range(2020, 2020 + n_years))
        T, Y, S, R = 2, n_years, hours, 1
        assert m.lp.n_cols == 2 * T * Y + T * Y * S + R * Y
        assert m.lp.n_rows == R * Y * S + T * Y + T * Y * S + R * Y + R * Y

    def test_missing_block(self):
        ts = Timeslices((0,), [1.0], hours=1)
        b = ModelBuilder(ModelSets((2020,), ts, ("R",)), [], SystemParams(demand={"R": np.ones(1)}))
        b.add_demand_balance()
        with pytest.raises(ModelError, match="missing blocks"):
            b.assemble()

    def test_duplicate_block(self):
        ts = Timeslices((0,), [1.0], hours=1)
        b = ModelBuilder(ModelSets((2020,), ts, ("R",)), [], SystemParams(demand={"R": np.ones(1)}))
        b.add_reserve_margin()
        with pytest.raises(ModelError, match="twice"):
            b.add_reserve_margin()

    def test_ordering_is_lexicographic(self):
        m = toy([CHEAP, BACKUP], [1.0, 1.0], years=(2020, 2021))
        fams = [k[0] for k in m.col_keys]
        assert fams == sorted(fams, key=["cap_new", "cap_total", "gen", "emis"].index)
        cap_new = [k[1] for k in m.col_keys if k[0] == "cap_new"]
        assert cap_new == sorted(cap_new)
        assert BLOCKS[-1] == "objective" and len(BLOCKS) == 7

    def test_full_scale_assembles(self):
        rng = np.random.default_rng(0)
        ts = Timeslices(tuple(range(0, 360, 24)), np.full(15, 8760 / 360))
        regions = ("BA", "ME", "RS")
        techs = []
        for r in regions:
            techs += [Technology(f"{r}_coal", r, "thermal", capex=1.0, var_om=30.0, emission_factor=1.0),
                      Technology(f"{r}_gas", r, "thermal", capex=1.0, var_om=60.0),
                      Technology(f"{r}_wind", r, "wind", capex=1.5, cf=f"{r}_w", land_bin=f"{r}/b")]
        p = SystemParams(demand={r: rng.uniform(100, 200, ts.n) for r in regions},
                         cf_series={f"{r}_w": rng.uniform(0, 1, ts.n) for r in regions},
                         land_budgets={f"{r}/b": 500.0 for r in regions})
        t0 = time.perf_counter()
        m = build_model(ModelSets(range(2020, 2051), ts, regions), techs, p)
        assert time.perf_counter() - t0 < 30
        assert len(m.family_rows("balance")) == 3 * 360 * 31
        assert m.lp.n_cols == 9 * 31 * (2 + 360) + 3 * 31


def _random_system(seed):
    rng = np.random.default_rng(seed)
    hours = int(rng.integers(1, 4))
    techs = [Technology(f"t{i}", "R", "thermal" if i == 0 else str(rng.choice(["thermal", "wind"])),
                        capex=float(rng.uniform(0, 5)), fixed_om=float(rng.uniform(0, 1)),
                        var_om=float(rng.uniform(0, 10)), life=int(rng.integers(1, 4)),
                        residual_mw=float(rng.uniform(0, 3)), cf=float(rng.uniform(0.2, 1)),
                        emission_factor=float(rng.uniform(0, 1)))
             for i in range(int(rng.integers(1, 4)))]
    border = Border("R-X", "R", "X", float(rng.uniform(0, 5)), {2020: float(rng.uniform(1, 20))},
                    {2020: float(rng.uniform(1, 20))})
    params = dict(demand={"R": rng.uniform(1, 10, hours)}, borders=(border,), losses={"R": float(rng.uniform(0, .2))},
                  reserve_margin=0.2)
    return techs, params, hours


def _model(techs, params, hours, years=(2020, 2021, 2022)):
    ts = Timeslices((0,), [1.0], hours=hours)
    return build_model(ModelSets(years, ts, ("R",)), techs, SystemParams(**params))


class TestProperties:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_balances_and_vintages(self, seed):
        techs, params, hours = _random_system(seed)
        m = _model(techs, params, hours)
        sol = solved(m)
        assert balance_residuals(m, sol).max() <= 1e-6
        for t in techs:
            new, total = cap(m, sol, t.name, "cap_new"), cap(m, sol, t.name)
            for i, y in enumerate(m.builder.sets.years):
                live = sum(new[j] for j, v in enumerate(m.builder.sets.years) if y - t.life < v <= y)
                assert total[i] == pytest.approx(t.residual(y) + live, abs=1e-7)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.permutations(range(3)))
    def test_permutation_invariance(self, seed, perm):
        techs, params, hours = _random_system(seed)
        techs = (techs * 3)[:3]
        techs = [dataclasses.replace(t, name=f"t{i}") for i, t in enumerate(techs)]
        a = _model(techs, params, hours)
        b = _model([techs[i] for i in perm], params, hours)
        assert a.lp.col_names == b.lp.col_names and a.lp.row_names == b.lp.row_names
        np.testing.assert_array_equal(a.lp.c, b.lp.c)
        assert (a.lp.A != b.lp.A).nnz == 0
        assert solved(a).objective == solved(b).objective

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 100.0))
    def test_cost_scaling(self, seed, k):
        techs, params, hours = _random_system(seed)
        scaled = [dataclasses.replace(t, capex=t.capex * k, fixed_om=t.fixed_om * k, var_om=t.var_om * k)
                  for t in techs]
        b0 = params["borders"][0]
        sb = dataclasses.replace(b0, price_low={y: p * k for y, p in b0.price_low.items()},
                                 price_high={y: p * k for y, p in b0.price_high.items()})
        a = _model(techs, params, hours)
        b = _model(scaled, {**params, "borders": (sb,)}, hours)
        sa, sb_ = solved(a), solved(b)
        assert sb_.objective == pytest.approx(k * sa.objective, rel=1e-7, abs=1e-7)
        # the unscaled optimum stays optimal for the scaled costs
        assert float(b.lp.c @ sa.x) == pytest.approx(sb_.objective, rel=1e-7, abs=1e-7)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_zero_emission_factors_ignore_limits(self, seed):
        techs, params, hours = _random_system(seed)
        clean = [dataclasses.replace(t, emission_factor=0.0) for t in techs]
        off = solved(_model(clean, params, hours, years=(2030, 2040, 2050)))
        pol = EmissionPolicy(1.0, active=True)
        on = solved(_model(clean, {**params, "emissions": pol}, hours, years=(2030, 2040, 2050)))
        assert on.objective == pytest.approx(off.objective, rel=1e-9, abs=1e-9)
        assert math.isfinite(on.objective)

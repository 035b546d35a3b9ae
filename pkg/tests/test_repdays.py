import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster.hierarchy import fcluster, linkage

from gridplan import repdays
from gridplan.repdays import (
    DayFeatureMatrix,
    HourlyProfile,
    ProfileError,
    RepresentativeDaySet,
    SeriesKind,
    build_day_features,
    cluster_days,
    duration_curve_error,
    pick_representatives,
    rescale_to_annual_means,
)
from gridplan.scaling import RescaleError
from gridplan.synthetic import basin_profiles, profile_suite


def _profile(values, kind=SeriesKind.DEMAND, sid="s"):
    return HourlyProfile(sid, "R", kind, np.asarray(values, dtype=float))


def _random_profiles(seed, n=8760):
    rng = np.random.default_rng(seed)
    return [
        _profile(rng.uniform(100, 500, n), SeriesKind.DEMAND, "d"),
        _profile(rng.beta(2, 5, n), SeriesKind.WIND_CF, "w"),
        _profile(rng.beta(1, 3, n), SeriesKind.SOLAR_CF, "pv"),
    ]


def _partitions(items, k):
    """All set partitions of ``items`` into exactly ``k`` non-empty blocks."""
    if k == 1:
        yield [list(items)]
        return
    if len(items) == k:
        yield [[x] for x in items]
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest, k - 1):
        yield [[first], *part]
    for part in _partitions(rest, k):
        for i in range(len(part)):
            yield part[:i] + [[first, *part[i]]] + part[i + 1:]


def _sse(rows, blocks):
    return sum(((rows[b] - rows[b].mean(axis=0)) ** 2).sum() for b in blocks)


class TestProfiles:
    def test_rejects_bad_length(self):
        with pytest.raises(ProfileError):
            _profile(np.ones(100))

    def test_rejects_cf_above_one(self):
        with pytest.raises(ProfileError):
            _profile(np.full(8760, 1.2), SeriesKind.WIND_CF)

    def test_kind_inference(self):
        assert repdays.infer_kind("BA_demand") is SeriesKind.DEMAND
        assert repdays.infer_kind("ME_wind_cf") is SeriesKind.WIND_CF
        assert repdays.infer_kind("RS_solar_cf") is SeriesKind.SOLAR_CF
        with pytest.raises(ProfileError):
            repdays.infer_kind("mystery")


class TestBuildDayFeatures:
    def test_constant_series_normalizes_to_one(self):
        m = build_day_features([_profile(np.full(8760, 5.0))])
        assert np.all(m.rows == 1.0)

    def test_shape_three_series(self):
        m = build_day_features(_random_profiles(0))
        assert m.rows.shape == (365, 72)
        assert m.rows.min() >= 0.0 and m.rows.max() <= 1.0

    def test_peak_maps_to_one(self):
        vals = np.full(8760, 50.0)
        h = 4000
        vals[h] = 200.0
        m = build_day_features([_profile(vals)])
        assert m.rows[h // 24, h % 24] == 1.0
        assert m.norms["s"] == 200.0

    def test_mismatched_lengths(self):
        with pytest.raises(ProfileError):
            build_day_features([_profile(np.ones(8760)), _profile(np.ones(8784), sid="t")])

    def test_all_zero_series_named_in_error(self):
        with pytest.raises(ProfileError, match="quiet"):
            build_day_features([_profile(np.zeros(8760), sid="quiet")])

    def test_leap_year(self):
        m = build_day_features([_profile(np.linspace(1, 2, 8784))])
        assert m.n_days == 366


class TestClusterDays:
    def test_k_equals_n_gives_singletons(self):
        m = build_day_features(_random_profiles(1))
        labels = cluster_days(m, 365)
        assert sorted(labels) == list(range(365))

    def test_duplicated_patterns_match_exhaustive_oracle(self):
        rng = np.random.default_rng(3)
        patterns = rng.uniform(size=(3, 24))
        order = [0, 1, 2, 0, 1, 2]
        rows = patterns[order]
        best = min(_partitions(list(range(6)), 3), key=lambda b: _sse(rows, b))
        oracle = sorted(sorted(b) for b in best)
        labels = cluster_days(rows, 3)
        got = sorted(sorted(np.flatnonzero(labels == c).tolist()) for c in range(3))
        assert got == oracle == [[0, 3], [1, 4], [2, 5]]

    def test_matches_scipy_ward_partition(self):
        rows = build_day_features(_random_profiles(4)).rows
        for k in (2, 7, 15, 40):
            ours = cluster_days(rows, k)
            ref = fcluster(linkage(rows, method="ward"), k, criterion="maxclust")
            part = lambda lab: sorted(tuple(np.flatnonzero(lab == c)) for c in np.unique(lab))
            assert part(ours) == part(ref)

    def test_fifteen_clusters_over_year(self):
        m = build_day_features(basin_profiles())
        labels = cluster_days(m, 15)
        sizes = np.bincount(labels)
        assert sizes.size == 15 and sizes.min() >= 1 and sizes.sum() == 365

    def test_labels_ordered_by_first_member(self):
        labels = cluster_days(build_day_features(_random_profiles(5)), 10)
        firsts = [int(np.flatnonzero(labels == c)[0]) for c in range(10)]
        assert firsts == sorted(firsts)

    def test_tie_break_lowest_pair(self):
        # four identical days: every merge cost is 0, lowest pairs merge first
        rows = np.zeros((4, 24))
        assert cluster_days(rows, 3).tolist() == [0, 0, 1, 2]
        assert cluster_days(rows, 2).tolist() == [0, 0, 0, 1]

    @pytest.mark.parametrize("k", [0, 366])
    def test_k_out_of_range(self, k):
        with pytest.raises(ValueError):
            cluster_days(np.zeros((365, 24)), k)

    def test_invariant_to_day_order(self):
        profiles = _random_profiles(6)
        rng = np.random.default_rng(0)
        perm = rng.permutation(365)
        shuffled = [
            _profile(p.daily()[perm].ravel(), p.kind, p.series_id) for p in profiles
        ]
        a = cluster_days(build_day_features(profiles), 12)
        b = cluster_days(build_day_features(shuffled), 12)
        groups_a = sorted(tuple(sorted(np.flatnonzero(a == c))) for c in range(12))
        groups_b = sorted(tuple(sorted(perm[np.flatnonzero(b == c)])) for c in range(12))
        assert groups_a == groups_b


class TestPickRepresentatives:
    def test_singleton(self):
        m = DayFeatureMatrix(np.arange(12.0).reshape(3, 4) / 12, ("s",), {"s": 1.0})
        rs = pick_representatives(m, [0, 1, 2])
        assert rs.day_indices == (0, 1, 2)
        assert rs.weights.tolist() == [1.0, 1.0, 1.0]

    def test_three_member_cluster_brute_force(self):
        rows = np.array([[0.0, 0.0], [0.9, 0.1], [0.4, 0.6], [1.0, 1.0]])
        m = DayFeatureMatrix(rows, ("s",), {"s": 1.0})
        members = [0, 1, 2]
        mean = rows[members].mean(axis=0)
        expected = min(members, key=lambda d: np.linalg.norm(rows[d] - mean))
        rs = pick_representatives(m, [0, 0, 0, 1])
        assert rs.day_indices == (expected, 3)
        assert rs.weights.tolist() == [3.0, 1.0]

    def test_equidistant_tie_picks_lowest_day(self):
        rows = np.array([[0.0], [1.0]])
        rs = pick_representatives(DayFeatureMatrix(rows, ("s",), {"s": 1.0}), [0, 0])
        assert rs.day_indices == (0,)

    def test_weights_sum_fifteen_clusters(self):
        profiles = basin_profiles()
        m = build_day_features(profiles)
        rs = pick_representatives(m, cluster_days(m, 15), profiles)
        assert rs.k == 15
        assert rs.weights.sum() == 365


class TestRescale:
    @staticmethod
    def _two_day_set(day_means, weights, kind=SeriesKind.WIND_CF):
        series = {"s": np.array([[m] * 24 for m in day_means], dtype=float)}
        return RepresentativeDaySet((0, 1), np.array(weights, dtype=float), series, {"s": kind})

    def test_identity_when_means_match(self):
        rs = self._two_day_set([0.5, 0.3], [200, 165])
        target = (200 * 0.5 + 165 * 0.3) / 365
        perfect = _profile(np.full(8760, target), SeriesKind.WIND_CF)
        out = rescale_to_annual_means(rs, [perfect])
        assert out.scale_factors["s"] == 1.0

    def test_two_day_factor(self):
        rs = self._two_day_set([0.5, 0.3], [200, 165])
        out = rescale_to_annual_means(rs, [_profile(np.full(8760, 0.45), SeriesKind.WIND_CF)])
        expected = 0.45 / ((200 * 0.5 + 165 * 0.3) / 365)
        assert out.scale_factors["s"] == pytest.approx(expected, rel=1e-12)
        # independent recomputation of the weighted mean after scaling
        v = out.series["s"]
        recomputed = (200 * v[0].mean() + 165 * v[1].mean()) / 365
        assert recomputed == pytest.approx(0.45, abs=1e-12)

    def test_clipping_preserves_mean(self):
        rs = self._two_day_set([0.9, 0.1], [100, 265])
        out = rescale_to_annual_means(rs, [_profile(np.full(8760, 0.5), SeriesKind.WIND_CF)])
        assert out.series["s"].max() <= 1.0
        assert out.weighted_mean("s") == pytest.approx(0.5, abs=1e-6)
        assert "s" in out.clip_report

    def test_zero_weighted_mean_fails(self):
        rs = self._two_day_set([0.0, 0.0], [200, 165])
        with pytest.raises(RescaleError):
            rescale_to_annual_means(rs, [_profile(np.full(8760, 0.2), SeriesKind.WIND_CF)])

    def test_fifteen_day_set_means(self):
        profiles = basin_profiles()
        rs = repdays.represent(profiles, 15)
        for p in profiles:
            assert rs.weighted_mean(p.series_id) == pytest.approx(p.values.mean(), abs=1e-9)


class TestDurationCurveError:
    def test_lossless_at_full_resolution(self):
        profiles = _random_profiles(8)
        rs = repdays.represent(profiles, 365)
        for e in duration_curve_error(profiles, rs).values():
            assert e.rmse == 0.0 and e.max_abs == 0.0

    def test_more_days_reduce_error(self):
        profiles = profile_suite(seed=7)
        e5 = duration_curve_error(profiles, repdays.represent(profiles, 5))
        e15 = duration_curve_error(profiles, repdays.represent(profiles, 15))
        for sid in e5:
            assert e15[sid].rmse <= e5[sid].rmse

    def test_fig6_style_report_is_finite(self):
        profiles = basin_profiles()
        errs = duration_curve_error(profiles, repdays.represent(profiles, 15))
        assert set(errs) == {"demand", "wind_cf", "solar_cf"}
        assert all(np.isfinite(e.rmse) and e.rmse >= 0 for e in errs.values())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), k=st.integers(1, 60))
def test_weights_and_means_properties(seed, k):
    profiles = _random_profiles(seed)
    rs = repdays.represent(profiles, k)
    assert rs.weights.sum() == pytest.approx(365, abs=1e-9)
    assert np.all(rs.weights == np.rint(rs.weights)) and rs.weights.min() >= 1
    assert len(set(rs.day_indices)) == rs.k == k
    for p in profiles:
        tol = 1e-6 if p.series_id in rs.clip_report else 1e-9
        assert rs.weighted_mean(p.series_id) == pytest.approx(p.values.mean(), abs=tol)
        if p.kind.is_cf:
            assert rs.series[p.series_id].max() <= 1.0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_clustering_is_deterministic(seed):
    m = build_day_features(_random_profiles(seed))
    assert np.array_equal(cluster_days(m, 9), cluster_days(m, 9))


def test_csv_round_trip(tmp_path):
    profiles = basin_profiles()
    rs = repdays.represent(profiles, 4)
    path = tmp_path / "rep.csv"
    repdays.write_repdays_csv(rs, path)
    back = repdays.read_repdays_csv(path)
    assert back.day_indices == rs.day_indices
    assert np.array_equal(back.weights, rs.weights)
    for sid in rs.series:
        assert np.allclose(back.series[sid], rs.series[sid], rtol=1e-11)
    header = path.read_text().splitlines()[0]
    assert header == "rep_day,weight,hour,demand,wind_cf,solar_cf"


def test_extract_series_matches_mean():
    profiles = basin_profiles()
    rs = repdays.represent(profiles, 6)
    extra = _profile(np.clip(profiles[1].values * 1.4, 0, 1), SeriesKind.WIND_CF, "wind_hi")
    vals = repdays.extract_series(rs, extra)
    w = np.repeat(rs.weights[:, None], 24, axis=1)
    assert (vals * w).sum() / w.sum() == pytest.approx(extra.values.mean(), abs=1e-9)

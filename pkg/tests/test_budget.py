import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_trace
from tracekit import (
    DataError,
    GroupBy,
    Metric,
    TimeUnit,
    gini_allocation,
    intervention_split,
    prevalence_metrics,
    regroup_counts,
    temporal_profile,
)
from tracekit.events import MS_PER_DAY

MS_PER_HOUR = 3_600_000


class TestPrevalence:
    def test_per_behavior_sums(self):
        trace = make_trace(
            [0, 100, 200], behaviors=["A", "A", "B"], durations=[10, 20, 5]
        )
        report = prevalence_metrics(trace)
        assert report.totals["A"].total_duration_ms == 30
        assert report.totals["A"].frequency == 2
        assert report.totals["B"].total_duration_ms == 5
        assert report.totals["B"].frequency == 1
        assert report.unique_behaviors == 2
        assert report.total_duration_ms == 35

    def test_window_excluding_everything(self):
        trace = make_trace([0, 100], durations=[1, 1])
        report = prevalence_metrics(trace, window=(500, 600))
        assert report.unique_behaviors == 0
        assert report.total_duration_ms == 0
        assert report.gini == 0.0

    def test_category_rollup(self):
        trace = make_trace(
            [0, 100, 200],
            behaviors=["A", "A", "B"],
            categories=["X", "X", "X"],
            durations=[10, 20, 5],
        )
        report = prevalence_metrics(trace, by=GroupBy.CATEGORY)
        assert report.totals["X"].total_duration_ms == 35
        assert report.totals["X"].frequency == 3
        assert report.unique_behaviors == 1


class TestGini:
    def test_perfect_equality(self):
        assert gini_allocation([10, 10, 10, 10]) == 0.0

    def test_all_in_one(self):
        assert gini_allocation([1, 0, 0, 0]) == pytest.approx(0.75)

    def test_hand_computed_pair(self):
        assert gini_allocation([3, 1]) == pytest.approx(0.25)

    def test_all_zero_is_an_error(self):
        with pytest.raises(DataError, match="no allocation"):
            gini_allocation([0.0, 0.0])

    @given(st.lists(st.floats(0, 1e9), min_size=1, max_size=30).filter(lambda v: sum(v) > 0))
    def test_bounds_and_permutation_invariance(self, values):
        g = gini_allocation(values)
        n = len(values)
        assert -1e-12 <= g <= 1 - 1 / n + 1e-12
        assert gini_allocation(list(reversed(values))) == pytest.approx(g, abs=1e-9)

    @given(
        st.lists(st.floats(0.01, 1e6), min_size=2, max_size=20),
        st.floats(0.01, 100),
    )
    def test_scale_invariance(self, values, c):
        assert gini_allocation([c * v for v in values]) == pytest.approx(
            gini_allocation(values), abs=1e-9
        )

    def test_zero_iff_equal(self):
        assert gini_allocation([7, 7, 7]) == 0.0
        assert gini_allocation([7, 8, 7]) > 0


class TestRegroupCounts:
    def test_single_day_bucket(self):
        trace = make_trace([0, 1000, 2000], behaviors=["a", "b", "c"])
        series = regroup_counts(trace, TimeUnit.DAY)
        assert len(series.points) == 1
        assert series.points[0][1] == 3

    def test_interior_gap_filled_with_zero(self):
        trace = make_trace([0, 1000, 2 * MS_PER_DAY], behaviors=["a", "b", "c"])
        series = regroup_counts(trace, TimeUnit.DAY)
        assert [c for _, c in series.points] == [2, 0, 1]

    def test_hour_counts_roll_up_to_day(self):
        ts = [0, MS_PER_HOUR, 5 * MS_PER_HOUR, MS_PER_DAY + MS_PER_HOUR]
        trace = make_trace(ts, behaviors=["a", "b", "c", "d"])
        hours = regroup_counts(trace, TimeUnit.HOUR)
        days = regroup_counts(trace, TimeUnit.DAY)
        assert hours.total() == days.total() == 4
        day_from_hours = {}
        for bucket_ts, count in hours.points:
            day_from_hours[bucket_ts // MS_PER_DAY] = (
                day_from_hours.get(bucket_ts // MS_PER_DAY, 0) + count
            )
        assert [day_from_hours.get(ts // MS_PER_DAY, 0) for ts, _ in days.points] == [
            c for _, c in days.points
        ]

    def test_local_offset_moves_bucket_boundary(self):
        # 23:30 UTC with +60 min offset is already the next local day.
        trace = make_trace([int(23.5 * MS_PER_HOUR)], tz_offset_min=60)
        series = regroup_counts(trace, TimeUnit.DAY)
        assert series.points[0][0] == MS_PER_DAY - MS_PER_HOUR

    @given(
        st.lists(st.integers(0, 10 * MS_PER_DAY), min_size=1, max_size=40),
        st.sampled_from(list(TimeUnit)),
    )
    @settings(max_examples=60)
    def test_totals_unit_invariant(self, ts_list, unit):
        behaviors = [f"b{i}" for i in range(len(ts_list))]
        trace = make_trace(ts_list, behaviors=behaviors)
        assert regroup_counts(trace, unit).total() == len(trace.behavior_events)


class TestInterventionSplit:
    def test_uniform_rates_recovered(self):
        t0 = 20 * MS_PER_DAY
        pre_ts = [t0 - 10 * MS_PER_DAY + k * (MS_PER_DAY // 10) for k in range(100)]
        post_ts = [t0 + k * (MS_PER_DAY // 20) for k in range(1, 201)]
        behaviors = [f"b{i}" for i in range(300)]
        trace = make_trace(pre_ts + post_ts, behaviors=behaviors)
        split = intervention_split(trace, t0)
        assert split.pre == pytest.approx(10.0)
        assert split.post == pytest.approx(20.0)
        assert split.delta == pytest.approx(10.0)

    def test_trace_entirely_before_t0(self):
        trace = make_trace([0, 100])
        with pytest.raises(DataError, match="intervention outside observation"):
            intervention_split(trace, 10**9)

    def test_balance_window_noop_when_data_fits(self):
        t0 = 5 * MS_PER_DAY
        ts = [t0 - MS_PER_DAY + 1000, t0 - 1000, t0 + 1000, t0 + MS_PER_DAY - 1000]
        trace = make_trace(ts, behaviors=["a", "b", "c", "d"])
        plain = intervention_split(trace, t0)
        balanced = intervention_split(trace, t0, balance_window_ms=MS_PER_DAY)
        assert plain == balanced

    def test_duration_truncated_at_boundary(self):
        t0 = 1000
        trace = make_trace([0, 2000], durations=[5000, 100])
        split = intervention_split(trace, t0, metric=Metric.DURATION)
        # Pre side spans 1 ms-day fraction; only the first 1000 ms count.
        assert split.pre == pytest.approx(1000 / (1000 / MS_PER_DAY))

    @given(
        st.lists(st.integers(1, 1000), min_size=1, max_size=10),
        st.lists(st.integers(1, 1000), min_size=1, max_size=10),
    )
    @settings(max_examples=50)
    def test_delta_antisymmetric_under_time_reversal(self, pre_offsets, post_offsets):
        t0 = 10**7
        pre_ts = sorted(t0 - o for o in set(pre_offsets))
        post_ts = sorted(t0 + o for o in set(post_offsets))
        names = [f"b{i}" for i in range(len(pre_ts) + len(post_ts))]
        trace = make_trace(pre_ts + post_ts, behaviors=names)
        mirrored = make_trace(
            sorted(2 * t0 - t for t in pre_ts + post_ts), behaviors=names
        )
        forward = intervention_split(trace, t0)
        backward = intervention_split(mirrored, t0)
        assert backward.delta == pytest.approx(-forward.delta)


class TestTemporalProfile:
    def test_concentrated_at_one_hour(self):
        ts = [9 * MS_PER_HOUR + k for k in range(5)]
        trace = make_trace(ts, behaviors=[f"b{k}" for k in range(5)])
        profile = temporal_profile(trace, (0, MS_PER_DAY))
        assert profile.shares[9] == 1.0
        assert sum(profile.shares) == pytest.approx(1.0)

    def test_symmetric_halves(self):
        trace = make_trace([0, 12 * MS_PER_HOUR], behaviors=["a", "b"])
        profile = temporal_profile(trace, (0, MS_PER_DAY))
        assert profile.shares[0] == 0.5
        assert profile.shares[12] == 0.5

    def test_empty_window_is_an_error(self):
        with pytest.raises(DataError, match="empty profile"):
            temporal_profile(make_trace([0]), (1000, 2000))

    def test_concatenated_windows_mix_by_count(self):
        ts_a = [1 * MS_PER_HOUR, 2 * MS_PER_HOUR]
        ts_b = [MS_PER_DAY + 5 * MS_PER_HOUR]
        trace = make_trace(ts_a + ts_b, behaviors=["a", "b", "c"])
        pa = temporal_profile(trace, (0, MS_PER_DAY))
        pb = temporal_profile(trace, (MS_PER_DAY, 2 * MS_PER_DAY))
        combined = temporal_profile(trace, (0, 2 * MS_PER_DAY))
        na, nb = pa.n_events, pb.n_events
        for h in range(24):
            expected = (pa.shares[h] * na + pb.shares[h] * nb) / (na + nb)
            assert combined.shares[h] == pytest.approx(expected)

    @given(st.lists(st.integers(0, MS_PER_DAY - 1), min_size=1, max_size=30), st.integers(1, 5))
    @settings(max_examples=50)
    def test_whole_day_shift_invariance(self, ts_list, k_days):
        behaviors = [f"b{i}" for i in range(len(ts_list))]
        trace = make_trace(ts_list, behaviors=behaviors)
        shifted = trace.shift(k_days * MS_PER_DAY)
        p1 = temporal_profile(trace, (0, MS_PER_DAY))
        p2 = temporal_profile(shifted, (k_days * MS_PER_DAY, (k_days + 1) * MS_PER_DAY))
        assert p1.shares == p2.shares

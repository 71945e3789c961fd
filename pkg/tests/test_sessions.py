import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_trace
from tracekit import (
    DataError,
    Event,
    EventKind,
    FixedThreshold,
    IndividualMedian,
    OrphanPolicy,
    ScreenBounded,
    UserTrace,
    fit_powerlaw_exponent,
    individual_threshold,
    sessionize_fixed,
    sessionize_individual,
    sessionize_screen,
)


def memberships(session_set):
    """Event-index groups, for comparing partitions across policies/scales."""
    return [
        list(range(s.first_event, s.first_event + s.n_events)) for s in session_set
    ]


def brute_force_split(ts_list, t_ms):
    """Oracle: enumerate boundary positions directly from the gap rule."""
    if not ts_list:
        return []
    boundaries = [i for i in range(1, len(ts_list)) if ts_list[i] - ts_list[i - 1] > t_ms]
    groups = []
    start = 0
    for b in boundaries + [len(ts_list)]:
        groups.append(list(range(start, b)))
        start = b
    return groups


def exhaustive_split(ts_list, t_ms):
    """Stronger oracle: test every contiguous partition against the session
    definition and return the unique valid one."""
    n = len(ts_list)
    valid = []
    for mask in range(2 ** max(0, n - 1)):
        groups = []
        start = 0
        for i in range(1, n):
            if mask >> (i - 1) & 1:
                groups.append(list(range(start, i)))
                start = i
        groups.append(list(range(start, n)))
        ok = True
        for g in groups:
            for a, b in zip(g, g[1:]):
                if ts_list[b] - ts_list[a] > t_ms:
                    ok = False
        for g1, g2 in zip(groups, groups[1:]):
            if ts_list[g2[0]] - ts_list[g1[-1]] <= t_ms:
                ok = False
        if ok:
            valid.append(groups)
    assert len(valid) == 1
    return valid[0]


class TestFixed:
    def test_breaks_only_above_threshold(self):
        ss = sessionize_fixed(make_trace([0, 10, 50, 300, 310]), 100)
        assert memberships(ss) == [[0, 1, 2], [3, 4]]

    def test_boundary_is_strict(self):
        ss = sessionize_fixed(make_trace([0, 10, 50, 300, 310]), 250)
        assert memberships(ss) == [[0, 1, 2, 3, 4]]

    def test_single_event(self):
        ss = sessionize_fixed(make_trace([7]), 10)
        assert memberships(ss) == [[0]]

    def test_empty_trace(self):
        ss = sessionize_fixed(UserTrace.build("u", []), 10)
        assert len(ss) == 0

    def test_end_ts_includes_duration(self):
        trace = make_trace([0, 10], durations=[3, 9])
        ss = sessionize_fixed(trace, 100)
        assert ss.sessions[0].start_ts == 0
        assert ss.sessions[0].end_ts == 19

    def test_session_indexes_are_ordinal(self):
        ss = sessionize_fixed(make_trace([0, 1000, 2000]), 10)
        assert [s.index for s in ss] == [0, 1, 2]


class TestIndividualThreshold:
    policy = IndividualMedian(min_gaps=1, fallback_ms=60_000, clamp_min_ms=1)

    def test_even_count_median_rounds_half_up(self):
        trace = make_trace([0, 5, 25, 1025, 1055])  # gaps 5, 20, 1000, 30
        assert individual_threshold(trace, self.policy) == 25

    def test_constant_gaps(self):
        trace = make_trace([0, 10, 20, 30])
        assert individual_threshold(trace, self.policy) == 10

    def test_fallback_below_min_gaps(self):
        trace = make_trace([0, 5])
        policy = IndividualMedian(min_gaps=2, fallback_ms=60_000, clamp_min_ms=1)
        assert individual_threshold(trace, policy) == 60_000

    def test_clamp_floors_bursty_medians(self):
        trace = make_trace([0, 0, 0, 10_000], behaviors=["a", "b", "c", "d"])
        policy = IndividualMedian(min_gaps=1, fallback_ms=60_000, clamp_min_ms=1000)
        assert individual_threshold(trace, policy) == 1000

    def test_sessionize_individual_breaks_above_median(self):
        trace = make_trace([0, 5, 25, 1025, 1055])
        ss = sessionize_individual(trace, self.policy)
        assert ss.threshold_ms == 25
        assert memberships(ss) == [[0, 1, 2], [3], [4]]

    def test_equal_gaps_single_session(self):
        ss = sessionize_individual(make_trace([0, 10, 20, 30]), self.policy)
        assert memberships(ss) == [[0, 1, 2, 3]]

    def test_scale_by_three_preserves_membership(self):
        ts = [0, 5, 25, 1025, 1055]
        base = sessionize_individual(make_trace(ts), self.policy)
        scaled = sessionize_individual(make_trace([3 * t for t in ts]), self.policy)
        assert memberships(base) == memberships(scaled)


class TestScreen:
    def build(self, extra=()):
        events = [
            Event("u", 0, kind=EventKind.SCREEN_ON),
            Event("u", 10, "a"),
            Event("u", 20, "b"),
            Event("u", 30, kind=EventKind.SCREEN_OFF),
            Event("u", 40, "c"),
            *extra,
        ]
        return UserTrace.build("u", events)

    def test_drop_orphans(self):
        ss = sessionize_screen(self.build(), ScreenBounded(OrphanPolicy.DROP))
        assert [(s.start_ts, s.n_events) for s in ss] == [(10, 2)]

    def test_own_session_orphans(self):
        ss = sessionize_screen(self.build(), ScreenBounded(OrphanPolicy.OWN_SESSION))
        assert [(s.start_ts, s.n_events) for s in ss] == [(10, 2), (40, 1)]

    def test_unmatched_screen_on_extends_to_trace_end(self):
        events = [
            Event("u", 0, kind=EventKind.SCREEN_ON),
            Event("u", 5, "a"),
            Event("u", 9, "b"),
        ]
        ss = sessionize_screen(UserTrace.build("u", events))
        assert [(s.start_ts, s.n_events) for s in ss] == [(5, 2)]

    def test_no_screen_events_is_an_error(self):
        with pytest.raises(DataError, match="screen data unavailable"):
            sessionize_screen(make_trace([0, 10]))

    def test_interval_without_behaviors_yields_no_session(self):
        events = [
            Event("u", 0, kind=EventKind.SCREEN_ON),
            Event("u", 5, kind=EventKind.SCREEN_OFF),
            Event("u", 6, kind=EventKind.SCREEN_ON),
            Event("u", 7, "a"),
            Event("u", 9, kind=EventKind.SCREEN_OFF),
        ]
        ss = sessionize_screen(UserTrace.build("u", events))
        assert [(s.start_ts, s.n_events) for s in ss] == [(7, 1)]


class TestPowerLaw:
    def test_closed_form_alpha_two(self):
        gaps = [1000 * math.e] * 20
        fit = fit_powerlaw_exponent(gaps, 1000)
        assert fit.alpha == pytest.approx(2.0, abs=1e-12)
        assert fit.n_tail == 20

    def test_degenerate_tail(self):
        with pytest.raises(DataError, match="degenerate tail"):
            fit_powerlaw_exponent([1000] * 20, 1000)

    def test_insufficient_tail(self):
        with pytest.raises(DataError, match="insufficient tail"):
            fit_powerlaw_exponent([2000] * 9, 1000)

    def test_below_xmin_excluded(self):
        gaps = [10] * 50 + [1000 * math.e] * 20
        fit = fit_powerlaw_exponent(gaps, 1000)
        assert fit.n_tail == 20
        assert fit.alpha == pytest.approx(2.0, abs=1e-12)


gap_lists = st.lists(st.integers(1, 50), min_size=0, max_size=11)


def trace_from_gaps(gaps, start=0):
    ts = [start]
    for g in gaps:
        ts.append(ts[-1] + g)
    return make_trace(ts)


@given(gap_lists, st.integers(1, 60))
def test_partition_property(gaps, t_ms):
    trace = trace_from_gaps(gaps)
    ss = sessionize_fixed(trace, t_ms)
    flat = [i for group in memberships(ss) for i in group]
    assert flat == list(range(len(trace.behavior_events)))


@given(gap_lists, st.integers(1, 60), st.integers(0, 30))
def test_threshold_monotonicity(gaps, t1, extra):
    t2 = t1 + extra
    trace = trace_from_gaps(gaps)
    fine = memberships(sessionize_fixed(trace, t1))
    coarse = memberships(sessionize_fixed(trace, t2))
    fine_starts = {g[0] for g in fine}
    coarse_starts = {g[0] for g in coarse}
    assert coarse_starts <= fine_starts
    assert len(coarse) <= len(fine)


@given(gap_lists, st.integers(1, 60))
def test_matches_brute_force(gaps, t_ms):
    trace = trace_from_gaps(gaps)
    ts = [e.ts for e in trace.behavior_events]
    assert memberships(sessionize_fixed(trace, t_ms)) == brute_force_split(ts, t_ms)


@given(st.lists(st.integers(1, 20), min_size=1, max_size=7), st.integers(1, 25))
@settings(max_examples=60)
def test_matches_exhaustive_partition_oracle(gaps, t_ms):
    trace = trace_from_gaps(gaps)
    ts = [e.ts for e in trace.behavior_events]
    assert memberships(sessionize_fixed(trace, t_ms)) == exhaustive_split(ts, t_ms)


# Odd gap counts keep the median an observed (integer) gap, which is the
# regime where scaling timestamps scales the threshold exactly; an even count
# can round a half-integer median and flip a boundary that sits right on it.
odd_gap_lists = st.lists(st.integers(1, 10**5), min_size=1, max_size=11).filter(
    lambda g: len(g) % 2 == 1
)


@given(odd_gap_lists, st.sampled_from([2, 3, 10]))
def test_scale_equivariance(gaps, k):
    policy = IndividualMedian(min_gaps=1, fallback_ms=60_000, clamp_min_ms=1)
    base_trace = trace_from_gaps(gaps)
    scaled_trace = trace_from_gaps([k * g for g in gaps])
    base = sessionize_individual(base_trace, policy)
    scaled = sessionize_individual(scaled_trace, policy)
    assert scaled.threshold_ms == k * base.threshold_ms
    assert memberships(base) == memberships(scaled)

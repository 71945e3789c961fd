import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_trace
from tracekit import (
    DataError,
    Taxonomy,
    assortativity_split,
    count_transitions,
    mean_user_rates,
    pool_matrices,
    sessionize_fixed,
    transition_rates,
)

TAXONOMY = Taxonomy.from_pairs([(c, c) for c in "ABCD"])


def categorized_trace(categories, gap=10):
    ts = [i * gap for i in range(len(categories))]
    return make_trace(ts, behaviors=list(categories), categories=list(categories))


def matrix_for(categories, threshold=1000):
    trace = categorized_trace(categories)
    sessions = sessionize_fixed(trace, threshold)
    return count_transitions(sessions, trace, TAXONOMY)


class TestCountTransitions:
    def test_pairs_within_one_session(self):
        m = matrix_for("AAB")
        idx = {c: i for i, c in enumerate(m.categories)}
        assert m.counts[idx["A"], idx["A"]] == 1
        assert m.counts[idx["A"], idx["B"]] == 1
        assert m.n_transitions == 2

    def test_singleton_sessions_contribute_nothing(self):
        trace = categorized_trace("AB", gap=10_000)
        sessions = sessionize_fixed(trace, 100)
        m = count_transitions(sessions, trace, TAXONOMY)
        assert m.n_transitions == 0
        assert not m.counts.any()

    def test_pairs_never_cross_session_boundaries(self):
        # Two sessions [A,B] and [B,A]: one A->B and one B->A, no B->B.
        trace = categorized_trace("ABBA", gap=10)
        events = trace.behavior_events
        shifted = make_trace(
            [0, 10, 10_000, 10_010],
            behaviors=[e.behavior_id for e in events],
            categories=[e.category_id for e in events],
        )
        sessions = sessionize_fixed(shifted, 100)
        m = count_transitions(sessions, shifted, TAXONOMY)
        idx = {c: i for i, c in enumerate(m.categories)}
        assert m.counts[idx["A"], idx["B"]] == 1
        assert m.counts[idx["B"], idx["A"]] == 1
        assert m.n_transitions == 2

    def test_uncategorized_event_is_an_error(self):
        trace = make_trace([0, 10], behaviors=["a", "b"])
        sessions = sessionize_fixed(trace, 100)
        with pytest.raises(DataError, match="uncategorized"):
            count_transitions(sessions, trace, TAXONOMY)

    def test_conservation(self):
        trace = categorized_trace("AABBA", gap=10)
        sessions = sessionize_fixed(trace, 100)
        m = count_transitions(sessions, trace, TAXONOMY)
        assert m.counts.sum() == sum(s.n_events - 1 for s in sessions)


class TestRates:
    def test_row_normalization(self):
        m = matrix_for("AAB")  # row A = [1, 1]
        r = transition_rates(m)
        idx = {c: i for i, c in enumerate(r.categories)}
        assert r.rates[idx["A"], idx["A"]] == 0.5
        assert r.rates[idx["A"], idx["B"]] == 0.5

    def test_zero_rows_stay_zero(self):
        m = matrix_for("AAB")
        r = transition_rates(m)
        idx = {c: i for i, c in enumerate(r.categories)}
        assert r.row_support[idx["C"]] == 0
        assert not r.rates[idx["C"]].any()

    def test_diagonal_counts_give_identity_rates(self):
        m = matrix_for("AAAAAA")
        r = transition_rates(m)
        idx = {c: i for i, c in enumerate(r.categories)}
        assert r.rates[idx["A"], idx["A"]] == 1.0


class TestAssortativity:
    def test_complement_split(self):
        r = transition_rates(matrix_for("AAB"))
        report = assortativity_split(r)
        assert report.assortative["A"] == pytest.approx(0.7, abs=0.3)
        assert report.assortative["A"] + report.disassortative_mass["A"] == 1.0

    def test_diag_only_share_is_one(self):
        report = assortativity_split(transition_rates(matrix_for("AAAA")))
        assert report.overall_assortative_share == 1.0

    def test_share_counts_weighting(self):
        # AAB: diag count 1 of 2 transitions.
        report = assortativity_split(transition_rates(matrix_for("AAB")))
        assert report.overall_assortative_share == pytest.approx(0.5)


category_strings = st.text(alphabet="ABCD", min_size=1, max_size=40)


@given(category_strings, st.integers(1, 50))
@settings(max_examples=80)
def test_conservation_and_stochasticity(categories, threshold):
    trace = categorized_trace(categories, gap=17)
    sessions = sessionize_fixed(trace, threshold)
    m = count_transitions(sessions, trace, TAXONOMY)
    assert m.counts.sum() == sum(s.n_events - 1 for s in sessions)
    r = transition_rates(m)
    for i in range(len(r.categories)):
        row_sum = r.rates[i].sum()
        if r.row_support[i] > 0:
            assert abs(row_sum - 1.0) <= 1e-9
        else:
            assert row_sum == 0.0


@given(category_strings)
@settings(max_examples=40)
def test_share_invariant_under_category_relabeling(categories):
    m = matrix_for(categories)
    share = assortativity_split(transition_rates(m)).overall_assortative_share
    relabeled = categories.translate(str.maketrans("ABCD", "DCBA"))
    m2 = matrix_for(relabeled)
    share2 = assortativity_split(transition_rates(m2)).overall_assortative_share
    assert share == pytest.approx(share2, abs=1e-12)


def test_pooled_vs_per_user_mean():
    m1 = matrix_for("AAAA")  # user 1: all assortative on A
    m2 = matrix_for("ABAB")  # user 2: all disassortative
    pooled = assortativity_split(transition_rates(pool_matrices([m1, m2])))
    mean = mean_user_rates([transition_rates(m1), transition_rates(m2)])
    idx = {c: i for i, c in enumerate(mean.categories)}
    # Pooled weights by counts (3 vs 3 transitions); A row mean averages the
    # two users' A rows: (1.0 + 0.0) / 2.
    assert pooled.overall_assortative_share == pytest.approx(0.5)
    assert mean.rates[idx["A"], idx["A"]] == pytest.approx(0.5)
    assert mean.row_support[idx["A"]] == 2


def test_matrix_csv_and_edges():
    m = matrix_for("AAB")
    text = m.to_csv()
    assert text.splitlines()[0] == "," + ",".join(m.categories)
    edges = m.to_edge_list()
    assert {"from": "A", "to": "B", "count": 1, "rate": 0.5} in edges

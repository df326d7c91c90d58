import itertools

import numpy as np
import pytest
from conftest import make_batch
from hypothesis import given, settings
from hypothesis import strategies as st

from wcisurv.pairing import PairMode, UndefinedMetricError, build_pairs, concordance_index


def brute_force_ci(time, event, risks):
    """Independent O(n^2) enumeration straight from the definition."""
    num, den = 0.0, 0
    for i, j in itertools.permutations(range(len(time)), 2):
        if event[i] == 1 and time[j] > time[i]:
            den += 1
            if risks[i] > risks[j]:
                num += 1.0
            elif risks[i] == risks[j]:
                num += 0.5
    return num / den


survival_data = st.integers(2, 50).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(1, 10).map(float), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
        st.lists(st.integers(-3, 3).map(float), min_size=n, max_size=n),
    )
)


def test_loss_mode_example():
    batch = make_batch([2, 3, 3], [1, 0, 1])
    assert build_pairs(batch, PairMode.LOSS).as_dict() == {0: [1, 2], 2: [1]}


def test_metric_mode_example():
    idx = build_pairs(make_batch([2, 3, 3], [1, 0, 1]), PairMode.METRIC)
    assert idx.as_dict() == {0: [1, 2], 2: []}
    assert idx.n_events == 2 and idx.n_pairs_of(0) == 2


def test_all_censored_gives_empty_index():
    for mode in PairMode:
        idx = build_pairs(make_batch([1, 2, 3], [0, 0, 0]), mode)
        assert idx.n_events == 0 and idx.n_pairs == 0


def test_loss_mode_drops_events_without_partners():
    idx = build_pairs(make_batch([1, 5], [0, 1]), PairMode.LOSS)
    assert idx.n_events == 0 and idx.n_dropped == 1


def test_ci_example():
    batch = make_batch([1, 2, 3], [1, 1, 0])
    assert concordance_index(batch, [0.9, 0.5, 0.7]) == 2 / 3


def test_ci_perfect_ranking():
    time = np.arange(1.0, 11.0)
    assert concordance_index(make_batch(time, np.ones(10)), -time) == 1.0


def test_ci_all_ties():
    ds = make_batch([1, 2, 3, 4], [1, 1, 0, 1])
    assert concordance_index(ds, np.zeros(4)) == 0.5


def test_ci_undefined():
    with pytest.raises(UndefinedMetricError, match="undefined CI"):
        concordance_index(make_batch([1, 2], [0, 0]), [0.1, 0.2])


def test_ci_length_mismatch():
    with pytest.raises(ValueError):
        concordance_index(make_batch([1, 2], [1, 0]), [0.1])


@settings(max_examples=200, deadline=None)
@given(survival_data)
def test_ci_matches_brute_force(data):
    time, event, risks = data
    ds = make_batch(time, event)
    try:
        expected = brute_force_ci(time, event, risks)
    except ZeroDivisionError:
        with pytest.raises(UndefinedMetricError):
            concordance_index(ds, risks)
        return
    assert concordance_index(ds, risks) == expected


@settings(max_examples=100, deadline=None)
@given(survival_data)
def test_ci_invariant_under_monotone_transform(data):
    time, event, risks = data
    ds = make_batch(time, event)
    if not build_pairs(ds, PairMode.METRIC).n_pairs:
        return
    r = np.asarray(risks)
    assert concordance_index(ds, np.exp(r) + 3.0) == concordance_index(ds, r)
    assert concordance_index(ds, r**3) == concordance_index(ds, r)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10_000))
def test_ci_complement(n, seed):
    rng = np.random.default_rng(seed)
    ds = make_batch(rng.integers(1, 6, n).astype(float), rng.integers(0, 2, n))
    if not build_pairs(ds, PairMode.METRIC).n_pairs:
        return
    r = rng.permutation(n).astype(float)  # no risk ties
    assert concordance_index(ds, -r) == pytest.approx(1.0 - concordance_index(ds, r), abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(survival_data)
def test_loss_mode_has_at_least_metric_pairs(data):
    time, event, _ = data
    ds = make_batch(time, event)
    loss = build_pairs(ds, PairMode.LOSS)
    metric = build_pairs(ds, PairMode.METRIC)
    assert loss.n_pairs >= metric.n_pairs
    n = len(time)
    assert metric.n_pairs <= n * (n - 1) // 2
    for i in loss.event_indices:
        assert all(time[j] >= time[i] and j != i for j in loss.pairs_per_event[i])
    for i in metric.event_indices:
        assert all(time[j] > time[i] for j in metric.pairs_per_event[i])

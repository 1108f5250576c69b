import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gplag import baselines as B
from gplag.data import from_series

from oracles import ari_pairs, dtw_bruteforce, nmi_entropy, set_partitions


def shifted_pair(shift=2.0, n=60):
    t = np.arange(float(n))
    f = lambda x: np.sin(x / 5) + 0.3 * np.cos(x / 2.3)
    # series 2 leads: y2(t) = y1(t + shift)
    return from_series([t, t], [f(t), f(t + shift)])


def test_tlcc_recovers_shift():
    scan = B.tlcc(shifted_pair(), [0, 1, 2, 3, 4])
    assert scan.best_lag == 2.0
    assert scan.best_corr >= 0.999
    assert scan.best_corr == np.max(scan.correlations)


def test_tlcc_anticorrelated():
    t = np.arange(30.0)
    d = from_series([t, t], [np.sin(t / 3), -np.sin(t / 3)])
    scan = B.tlcc(d, [0.0])
    assert scan.correlations[0] == pytest.approx(-1.0)


def test_tlcc_white_noise_runs(rng):
    t = np.arange(50.0)
    d = from_series([t, t], [rng.normal(size=50), rng.normal(size=50)])
    scan = B.tlcc(d, np.arange(-3, 4))
    assert abs(scan.best_corr) < 0.6


def test_tlcc_insufficient_overlap_and_errors():
    t = np.arange(5.0)
    d = from_series([t, t], [t, t ** 2])
    scan = B.tlcc(d, [0.0, 100.0])
    assert scan.correlations[1] == -np.inf
    with pytest.raises(ValueError):
        B.tlcc(d, [])


def test_tlcc_ties_take_smallest_lag():
    t = np.arange(6.0)
    d = from_series([t, t], [t, t])
    # a linear ramp correlates perfectly at every overlapping lag
    scan = B.tlcc(d, [2.0, 1.0, 0.0])
    assert scan.best_lag == 0.0


@pytest.mark.parametrize("shift", [-3.0, 0.0, 1.0, 4.0])
def test_tlcc_sinusoid_grid_shift(shift):
    scan = B.tlcc(shifted_pair(shift, n=80), np.arange(-5.0, 6.0))
    assert scan.best_lag == shift


def test_dtw_examples():
    x = np.array([0.3, 1.0, -2.0])
    r = B.dtw(x, x)
    assert r.distance == 0.0 and r.path == [(0, 0), (1, 1), (2, 2)]
    assert B.dtw([0, 1], [0, 0, 1]).distance == 0.0
    assert B.dtw([0.0], [1.5]).distance == 2.25
    with pytest.raises(ValueError):
        B.dtw([], [1.0])


def test_dtw_matches_bruteforce_small(rng):
    for _ in range(30):
        x = rng.normal(size=rng.integers(1, 6))
        y = rng.normal(size=rng.integers(1, 6))
        best, paths = dtw_bruteforce(x, y)
        r = B.dtw(x, y)
        assert r.distance == best
        assert r.path in paths


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8),
       st.lists(st.floats(-10, 10), min_size=1, max_size=8))
def test_dtw_symmetric_and_path_shape(x, y):
    a, b = B.dtw(x, y), B.dtw(y, x)
    assert a.distance == pytest.approx(b.distance, rel=1e-12, abs=1e-12)
    assert a.path[0] == (0, 0) and a.path[-1] == (len(x) - 1, len(y) - 1)
    steps = np.diff(np.array(a.path), axis=0)
    assert all(tuple(s) in {(1, 1), (1, 0), (0, 1)} for s in steps)


def test_dtw_detects_offset(rng):
    x = rng.normal(size=10)
    assert B.dtw(x, x + 0.5).distance > 0
    assert B.dtw(x + 3, x + 3).distance == 0


def test_soft_dtw_limit_and_bound(rng):
    for _ in range(5):
        x, y = rng.normal(size=10), rng.normal(size=10)
        d = B.dtw(x, y).distance
        assert B.soft_dtw(x, y, 1e-6) == pytest.approx(d, abs=1e-3)
        for g in (0.1, 1.0, 5.0):
            assert B.soft_dtw(x, y, g) <= d + 1e-12


def test_soft_dtw_divergence_zero_and_errors(rng):
    x = rng.normal(size=12)
    assert abs(B.soft_dtw_divergence(x, x, 0.7)) <= 1e-10
    with pytest.raises(ValueError):
        B.soft_dtw(x, x, 0.0)
    with pytest.raises(ValueError):
        B.soft_dtw_divergence(x, x, -1.0)


def kmeans_exhaustive(values, k):
    best, best_labels = np.inf, None
    for labels in set_partitions(len(values)):
        if max(labels) + 1 != k:
            continue
        lab = np.array(labels)
        sse = sum(((values[lab == c] - values[lab == c].mean()) ** 2).sum() for c in range(k))
        if sse < best:
            best, best_labels = sse, lab
    return best, best_labels


def test_kmeans_example():
    v = np.array([0, 0.1, 5, 5.1, 10, 10.1])
    labels = B.kmeans(v, 3, seed=1)
    np.testing.assert_array_equal(labels, [0, 0, 1, 1, 2, 2])
    _, oracle = kmeans_exhaustive(v, 3)
    assert B.ari(labels, oracle) == 1.0


def test_kmeans_matches_exhaustive(rng):
    for _ in range(10):
        v = rng.normal(size=6) * 3
        for k in (2, 3):
            best, _ = kmeans_exhaustive(v, k)
            lab = B.kmeans(v, k, seed=0)
            sse = sum(((v[lab == c] - v[lab == c].mean()) ** 2).sum() for c in range(k))
            assert sse == pytest.approx(best, rel=1e-12, abs=1e-12)


def test_kmeans_edge_cases():
    v = np.array([3.0, 1.0, 2.0])
    np.testing.assert_array_equal(B.kmeans(v, 3), [2, 0, 1])
    with pytest.raises(ValueError):
        B.kmeans([1.0, 1.0, 2.0], 3)
    a = B.kmeans(np.arange(20.0) ** 1.5, 4, seed=3)
    b = B.kmeans(np.arange(20.0) ** 1.5, 4, seed=3)
    assert np.array_equal(a, b)


def test_ari_nmi_examples():
    assert B.ari([1, 1, 2, 2], [5, 5, 7, 7]) == 1.0
    assert B.nmi([1, 1, 2, 2], [5, 5, 7, 7]) == pytest.approx(1.0)
    assert B.ari([1, 1, 1], [2, 2, 2]) == 1.0
    assert B.nmi([1, 1, 1], [2, 2, 2]) == 1.0
    assert B.ari([1, 1, 2, 2], [1, 2, 1, 2]) <= 0
    assert B.ari([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(ari_pairs([1, 1, 2, 2], [1, 2, 1, 2]))
    with pytest.raises(ValueError):
        B.ari([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        B.nmi([1, 2], [1])


def test_ari_nmi_exhaustive_small():
    for n in range(1, 6):
        parts = list(set_partitions(n))
        for a, b in itertools.product(parts, parts):
            assert B.ari(a, b) == pytest.approx(ari_pairs(a, b), abs=1e-12)
            assert B.nmi(a, b) == pytest.approx(nmi_entropy(a, b), abs=1e-12)
            same = a == b
            assert (B.ari(a, b) == pytest.approx(1.0)) == same or n == 1
            assert -1 <= B.ari(a, b) <= 1 and 0 <= B.nmi(a, b) <= 1


def test_ari_relabel_invariance(rng):
    truth = rng.integers(0, 3, 20)
    labels = rng.integers(0, 3, 20)
    perm = np.array([2, 0, 1])
    assert B.ari(perm[labels], truth) == pytest.approx(B.ari(labels, truth), abs=1e-15)

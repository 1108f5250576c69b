import numpy as np
import pytest

from gplag import kernels as K
from gplag import simulate as S
from gplag.data import TimeSeriesSet
from gplag.kernels import MultiParams, PairwiseParams


def test_regular_design():
    d = S.gen_time_design(5, 2, style="regular", range=(0, 4))
    np.testing.assert_array_equal(d.times[0], [0, 1, 2, 3, 4])


def test_jitter_bound_and_lag_shift():
    d = S.gen_time_design(100, 2, lags=[0, 2], seed=3)
    base = np.linspace(-50, 50, 100)
    assert np.all(np.abs(d.times[0] - base) <= 0.25)
    np.testing.assert_array_equal(d.times[1], d.times[0] + 2)
    assert np.all(np.diff(d.times[0]) > 0)


def test_design_errors():
    with pytest.raises(ValueError):
        S.gen_time_design(10, range=(1, 1))
    with pytest.raises(ValueError):
        S.gen_time_design(1)
    with pytest.raises(ValueError):
        S.gen_time_design(5, style="random")


def test_design_deterministic():
    a = S.gen_time_design(20, 3, lags=[0, 1, 2], seed=9)
    b = S.gen_time_design(20, 3, lags=[0, 1, 2], seed=9)
    for x, y in zip(a.times, b.times):
        assert np.array_equal(x, y)


def test_degenerate_variance():
    d = S.gen_time_design(10, 2, seed=1)
    data = S.sample_gplag("lexp", PairwiseParams(1e-20, 0.3, 1.0, 0.0, 0.0), d, seed=1)
    assert np.all(np.abs(data.y) <= 1e-8)


def test_sample_is_bit_reproducible():
    d = S.gen_time_design(30, 2, lags=[0, 2], seed=4)
    p = PairwiseParams(4, 0.3, 1, 2, 0.1)
    a = S.sample_gplag("lmat", p, d, seed=5)
    b = S.sample_gplag("lmat", p, d, seed=5)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.t, b.t)


def test_monte_carlo_covariance():
    design = S.gen_time_design(2, 2, style="explicit", times=[[0.0, 0.7], [0.2, 1.5]])
    p = PairwiseParams(2.0, 0.5, 0.8, 0.4, 0.3)
    empty = TimeSeriesSet(*S.design_points(design), np.zeros(4), 2)
    C = K.covariance_matrix("lrbf", p, empty)
    draws = np.array([S.sample_gplag("lrbf", p, design, seed=[7, r]).y for r in range(10000)])
    emp = np.cov(draws.T, bias=True)
    # SE of a sample covariance: sqrt((C_ii C_jj + C_ij^2) / N)
    se = np.sqrt((np.outer(np.diag(C), np.diag(C)) + C ** 2) / len(draws))
    assert np.all(np.abs(emp - C) <= 5 * se)
    assert np.all(np.abs(draws.mean(axis=0)) <= 5 * np.sqrt(np.diag(C) / len(draws)))


def test_marginal_variance_multi():
    design = S.gen_time_design(3, 3, lags=[0, 1, 2], seed=1)
    p = MultiParams(1.5, 0.3, 0.5, [[0, 1, 1], [1, 0, 1], [1, 1, 0]], [0, 1, 2])
    y = np.array([S.sample_gplag("lexp", p, design, seed=[3, r]).y for r in range(4000)])
    var = y.var(axis=0)
    target = p.sigma2 + p.tau2
    assert np.all(np.abs(var - target) <= 5 * target * np.sqrt(2 / len(y)))


def test_lag_fidelity():
    # near-identical series: cross-correlation peaks at the designed lag
    p = PairwiseParams(1.0, 0.5, 1e-6, 3.0, 1e-4)
    t = np.arange(0.0, 400.0)
    design = S.gen_time_design(0, 2, style="explicit", times=[t, t])
    d = S.sample_gplag("lrbf", p, design, seed=2)
    y1, y2 = d.values(1), d.values(2)
    lags = np.arange(-6, 7)
    corr = [np.corrcoef(y1[max(0, k):len(t) + min(0, k)], y2[max(0, -k):len(t) - max(0, k)])[0, 1]
            for k in lags]
    # y2(t) ~ y1(t + 3): y1 index i + 3 pairs with y2 index i
    assert lags[int(np.argmax(corr))] == 3


def test_arctan_examples():
    t, v = S.gen_arctan(1.0, 0.0, n=5, range=(-1, 1))
    assert v[-1] == pytest.approx(1.0, rel=1e-15)
    t, v = S.gen_arctan(0.01, 0.0)
    assert np.max(np.abs(v - t)) <= 2e-4
    t, v = S.gen_arctan(10.0, 0.0, n=5)
    assert v[2] == 0.0
    for k in (0.01, 1.0, 10.0):
        for s in (0.0, 0.5, 1.0):
            assert np.all(np.diff(S.gen_arctan(k, s)[1]) > 0)
    with pytest.raises(ValueError):
        S.gen_arctan(0.0, 0.0)


def test_linear_t_noise():
    d = S.gen_linear_t_noise(noise_scale=0.0)
    t = np.arange(101.0)
    np.testing.assert_array_equal(d.values(1), 2 * t + 3)
    np.testing.assert_array_equal(d.values(2), 2 * (t - 20) + 3)
    with pytest.raises(ValueError):
        S.gen_linear_t_noise(df=2.0)


def test_student_t_variance():
    rng = np.random.default_rng(0)
    x = 5.0 * S.student_t(rng, 5.0, 10000)
    assert np.var(x) == pytest.approx(25 * 5 / 3, rel=0.05)

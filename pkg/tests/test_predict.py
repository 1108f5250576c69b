import math

import numpy as np
import pytest

from gplag import inference as I
from gplag import kernels as K
from gplag.data import TimeSeriesSet, center_series, from_series
from gplag.exceptions import ValidationError
from gplag.kernels import PairwiseParams
from gplag.predict import PredictionResult, blup_predict, mse, query_points


def test_noiseless_interpolation(rng):
    t = np.sort(rng.uniform(0, 10, 8))
    d = from_series([t, t + 0.4], [np.sin(t), np.cos(t)])
    p = PairwiseParams(1.0, 0.5, 0.6, 0.4, 0.0)
    pred = blup_predict(p, "lrbf", d, query_points(d))
    np.testing.assert_allclose(pred.mean, d.y, atol=1e-6)
    assert np.all(pred.variance <= 1e-8 * p.sigma2)


def test_far_query_reverts_to_prior():
    d = center_series(from_series([[0.0, 1.0], [0.0, 1.0]], [[3.0, 5.0], [1.0, 2.0]]))
    p = PairwiseParams(2.0, 1.0, 0.5, 0.0, 0.3)
    pred = blup_predict(p, "lrbf", d, [(100.0, 1), (-100.0, 2)])
    np.testing.assert_allclose(pred.mean, d.offsets, rtol=1e-8)
    np.testing.assert_allclose(pred.variance, p.sigma2 + p.tau2, rtol=1e-8)


def test_single_training_point_by_hand():
    y0, t0 = 1.7, 0.3
    d = TimeSeriesSet([t0], [1], [y0], 2)
    a, b, s = 0.8, 0.6, 1.2
    p = PairwiseParams(2.5, b, a, s, 0.0)
    pred = blup_predict(p, "lrbf", d, [(t0, 2)])
    q = a * a + 1
    assert pred.mean[0] == pytest.approx(y0 / math.sqrt(q) * math.exp(-b * s * s / q), rel=1e-12)


def test_variance_bounded_by_prior(rng):
    t = np.sort(rng.uniform(0, 10, 10))
    d = from_series([t, t], [rng.normal(size=10), rng.normal(size=10)])
    p = PairwiseParams(1.5, 0.3, 1.0, 0.5, 0.2)
    q = [(x, l) for x in np.linspace(-5, 15, 41) for l in (1, 2)]
    for fam in ("lexp", "lrbf", "rational_quadratic"):
        pred = blup_predict(p, fam, d, q)
        assert np.all(pred.variance <= p.sigma2 + p.tau2 + 1e-8)
        assert np.all(pred.variance >= 0)


def test_leave_one_out_matches_direct_conditional(rng):
    t = np.sort(rng.uniform(0, 10, 7))
    d = from_series([t, t + 0.2], [rng.normal(size=7), rng.normal(size=7)])
    p = PairwiseParams(1.2, 0.4, 0.7, 0.2, 0.25)
    C = K.covariance_matrix("lexp", p, d)
    for i in range(d.n):
        keep = np.delete(np.arange(d.n), i)
        pred = blup_predict(p, "lexp", d.subset(keep), [(d.t[i], d.series[i])])
        c = C[np.ix_(keep, [i])][:, 0]
        Ckk = C[np.ix_(keep, keep)]
        mean = c @ np.linalg.solve(Ckk, d.y[keep])
        var = C[i, i] - c @ np.linalg.solve(Ckk, c)
        dens = -0.5 * math.log(2 * math.pi * var) - 0.5 * (d.y[i] - mean) ** 2 / var
        got = (-0.5 * math.log(2 * math.pi * pred.variance[0])
               - 0.5 * (d.y[i] - pred.mean[0]) ** 2 / pred.variance[0])
        assert got == pytest.approx(dens, abs=1e-8)


def test_query_validation():
    d = from_series([[0.0, 1.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValidationError):
        blup_predict(PairwiseParams(1, 1, 1, 0, 0.1), "lexp", d, [(0.0, 3)])


def test_accepts_fit_result(rng):
    t = np.arange(10.0)
    d = center_series(from_series([t, t + 1], [np.sin(t), np.sin(t + 2)]))
    fit = I.fit_mle(d, "lrbf", I.FitConfig(s_bounds=(0, 3), multistart_count=2))
    a = blup_predict(fit, "lrbf", d, [(2.5, 1)])
    b = blup_predict(fit.params, "lrbf", d, [(2.5, 1)])
    assert a.mean[0] == b.mean[0]


def test_mse_examples():
    truth = from_series([[0.0, 1.0, 2.0], [0.0, 1.0]], [[1.0, 2.0, 3.0], [0.0, 0.0]])
    q = query_points(truth)
    exact = PredictionResult(q, truth.y.copy(), np.zeros(truth.n))
    assert mse(exact, truth) == 0.0
    shifted = PredictionResult(q, truth.y + 0.5, np.zeros(truth.n))
    assert mse(shifted, truth) == pytest.approx(0.25)
    small = from_series([[0.0, 1.0, 2.0], [5.0, 6.0]], [[0.0, 0.0, 0.0], [0.0, 0.0]]).subset([0, 1, 2])
    pred = PredictionResult(query_points(small), np.array([1.0, -1.0, 2.0]), np.zeros(3))
    assert mse(pred, small) == pytest.approx(2.0)
    with pytest.raises(ValidationError):
        mse(PredictionResult(q[:2], np.zeros(2), np.zeros(2)), truth)


def test_mse_uses_original_scale():
    raw = from_series([[0.0, 1.0], [0.0, 1.0]], [[10.0, 12.0], [1.0, 3.0]])
    c = center_series(raw)
    pred = PredictionResult(query_points(c), raw.y.copy(), np.zeros(4))
    assert mse(pred, c) == pytest.approx(0.0)

"""Gaussian-conditional (BLUP) prediction at new (time, series) points."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from . import kernels
from .exceptions import ValidationError
from .inference import cholesky_jitter

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictionResult:
    query: list
    mean: np.ndarray
    variance: np.ndarray
    clamped: int = 0

    def rows(self):
        for (t, l), m, v in zip(self.query, self.mean, self.variance):
            yield t, l, float(m), float(v)


def query_points(data):
    return [(float(t), int(l)) for t, l in zip(data.t, data.series)]


def blup_predict(fit, family, train, query):
    """Predictive mean and variance of noisy observations at ``query``.

    ``fit`` is a FitResult or a parameter object.  Means are returned on the
    original scale: the per-series offsets stored in ``train`` are added back.
    Variances include ``tau2``; round-off negatives are clamped to zero and
    counted in ``clamped``.
    """
    params = getattr(fit, "params", fit)
    L = params.num_series
    query = [(float(t), int(l)) for t, l in query]
    tq = np.array([q[0] for q in query], dtype=float)
    cq = np.array([q[1] for q in query], dtype=np.int64)
    if len(cq) and (cq.min() < 1 or cq.max() > L):
        raise ValidationError(f"query series ids must lie in 1..{L}")
    K = kernels.covariance_matrix(family, params, train, include_noise=True)
    Lc, _ = cholesky_jitter(K, params.sigma2)
    Ks = kernels.cross_covariance(family, params, train.t, train.series, tq, cq)
    alpha = la.cho_solve((Lc, True), train.y, check_finite=False)
    mean = Ks.T @ alpha + train.offsets[cq - 1]
    V = la.solve_triangular(Lc, Ks, lower=True, check_finite=False)
    prior = params.sigma2 * kernels.profile(family, np.zeros(len(tq)), np.zeros(len(tq)), params.b)
    var = prior + params.tau2 - np.einsum("ij,ij->j", V, V)
    neg = var < 0
    clamped = int(neg.sum())
    if clamped:
        log.debug("clamped %d negative predictive variances (min %.3g)", clamped, var.min())
        var = np.where(neg, 0.0, var)
    return PredictionResult(query, mean, var, clamped)


def mse(pred, truth):
    """Mean squared error of ``pred.mean`` against ``truth`` on the original scale."""
    q = np.array([p[0] for p in pred.query], dtype=float)
    c = np.array([p[1] for p in pred.query], dtype=np.int64)
    if len(q) != truth.n or not (np.allclose(q, truth.t, rtol=0, atol=1e-12)
                                 and np.array_equal(c, truth.series)):
        raise ValidationError("prediction query does not align with the truth points")
    y = truth.y + truth.offsets[truth.series - 1]
    return float(np.mean((np.asarray(pred.mean) - y) ** 2))

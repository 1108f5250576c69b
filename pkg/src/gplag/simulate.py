"""Synthetic data: GPlag draws on jittered grids and the non-GP generators.

All randomness goes through ``numpy.random.Generator`` (PCG64) seeded
explicitly; nothing reads global RNG state.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import TimeSeriesSet, from_series
from .inference import cholesky_jitter

JITTERED = "jittered_grid"
REGULAR = "regular"
EXPLICIT = "explicit"
JITTER_HALF_WIDTH = 0.25


@dataclass(frozen=True)
class TimeDesign:
    times: tuple
    style: str
    lags: tuple

    @property
    def num_series(self):
        return len(self.times)


def rng_for(seed, replicate=None):
    return np.random.default_rng(seed if replicate is None else [seed, replicate])


def gen_time_design(n_per_series, num_series=2, style=JITTERED, lags=None, range=(-50.0, 50.0),
                    seed=0, times=None):
    """Sampling times for every series.

    Base points are ``linspace(range)``; ``jittered_grid`` adds iid
    Unif(-1/4, 1/4) noise shared by all series, and series ``l`` is then
    shifted by ``lags[l-1]`` (so series-2 times equal series-1 times plus the
    lag).  ``explicit`` takes ``times`` verbatim, one array per series.
    """
    if style == EXPLICIT:
        if times is None:
            raise ValueError("explicit designs need times")
        ts = tuple(np.sort(np.asarray(t, dtype=float)) for t in times)
        return TimeDesign(ts, style, tuple([0.0] * len(ts)))
    lo, hi = range
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError(f"invalid range {range}")
    if n_per_series < 2:
        raise ValueError("need at least 2 points per series")
    lags = np.zeros(num_series) if lags is None else np.asarray(lags, dtype=float)
    if len(lags) != num_series:
        raise ValueError("one lag per series is required")
    base = np.linspace(lo, hi, n_per_series)
    if style == JITTERED:
        base = base + rng_for(seed).uniform(-JITTER_HALF_WIDTH, JITTER_HALF_WIDTH, n_per_series)
        base.sort()
    elif style != REGULAR:
        raise ValueError(f"unknown design style {style!r}")
    return TimeDesign(tuple(base + d for d in lags), style, tuple(float(d) for d in lags))


def design_points(design):
    t = np.concatenate(design.times)
    c = np.concatenate([np.full(len(x), i + 1) for i, x in enumerate(design.times)])
    return t, c


def sample_gplag(family, params, design, seed=0):
    """Exact zero-mean draw ``Y = L z + tau z'`` with ``L L^T = Sigma``."""
    t, c = design_points(design)
    L = design.num_series
    empty = TimeSeriesSet(t, c, np.zeros(len(t)), L)
    K = kernels.covariance_matrix(family, params, empty, include_noise=False)
    Lc, _ = cholesky_jitter(K, params.sigma2)
    rng = rng_for(seed)
    z = rng.standard_normal(len(t))
    noise = rng.standard_normal(len(t))
    y = Lc @ z + np.sqrt(params.tau2) * noise
    return empty.with_values(y)


def gen_arctan(k, s, n=50, range=(-2.0, 2.0)):
    """``arctan(k (t + s)) / arctan(k)`` on a regular grid; returns ``(t, values)``."""
    if not k > 0:
        raise ValueError("k must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    t = np.linspace(range[0], range[1], n)
    return t, np.arctan(k * (t + s)) / np.arctan(k)


def student_t(rng, df, size):
    """Student-t draws composed as ``z / sqrt(chi2_df / df)``."""
    z = rng.standard_normal(size)
    return z / np.sqrt(rng.chisquare(df, size) / df)


def gen_linear_t_noise(n=101, slope=2.0, intercept=3.0, noise_scale=5.0, lag=20.0, df=5.0,
                       seed=0):
    """Two linear series with Student-t noise on ``t = 0..n-1``.

    Series 1 is ``slope*t + intercept + noise``; series 2 uses ``t - lag``
    in its mean, so it trails series 1 (its kernel lag is ``-lag``).
    """
    if not df > 2:
        raise ValueError("df must exceed 2")
    rng = rng_for(seed)
    t = np.arange(n, dtype=float)
    y1 = slope * t + intercept + noise_scale * student_t(rng, df, n)
    y2 = slope * (t - lag) + intercept + noise_scale * student_t(rng, df, n)
    return from_series([t, t], [y1, y2])

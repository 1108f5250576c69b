"""Posterior sampling for two-series GPlag parameters.

The target is the full posterior over ``(a, b, s, sigma2, tau2)`` with
independent inverse-gamma priors on the positive parameters and a Gaussian
prior on the lag.  Sampling uses random-walk Metropolis on
``(log a, log b, s, log sigma2, log tau2)`` (Jacobian included) with the
proposal adapted during burn-in and frozen afterwards.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .exceptions import NumericalError, SamplerError, ValidationError
from .inference import FitConfig, initialize, log_marginal_likelihood, tlcc_init
from .kernels import PairwiseParams

PARAM_NAMES = ("a", "b", "s", "sigma2", "tau2")
_POSITIVE = (True, True, False, True, True)
TARGET_ACCEPTANCE = 0.234


@dataclass(frozen=True)
class PriorSpec:
    """Inverse-gamma (shape, scale) pairs and the Gaussian lag prior (mean, variance)."""

    ig_a: tuple = (2.0, 1.0)
    ig_b: tuple = (2.0, 1.0)
    ig_sigma2: tuple = (2.0, 1.0)
    ig_tau2: tuple = (2.0, 1.0)
    s_prior: tuple = (0.0, 1.0)

    def __post_init__(self):
        for name in ("ig_a", "ig_b", "ig_sigma2", "ig_tau2"):
            shape, scale = getattr(self, name)
            if not (shape > 0 and scale > 0):
                raise ValidationError(f"{name} shape and scale must be > 0")
        if not self.s_prior[1] > 0:
            raise ValidationError("s prior variance must be > 0")


def default_priors(data, s_bounds=(-4.0, 4.0)):
    """IG(2, 1) on a, b, tau2; IG(2, var y) on sigma2; s ~ N(TLCC lag, (width/4)^2)."""
    var = float(np.var(data.y)) or 1.0
    lo, hi = s_bounds
    return PriorSpec(ig_sigma2=(2.0, var), s_prior=(tlcc_init(data, s_bounds), ((hi - lo) / 4) ** 2))


def ig_logpdf(x, shape, scale):
    if x <= 0:
        return -math.inf
    return shape * math.log(scale) - gammaln(shape) - (shape + 1) * math.log(x) - scale / x


def normal_logpdf(x, mean, var):
    return -0.5 * math.log(2 * math.pi * var) - 0.5 * (x - mean) ** 2 / var


def log_prior(params, priors):
    return (ig_logpdf(params.a, *priors.ig_a) + ig_logpdf(params.b, *priors.ig_b)
            + normal_logpdf(params.s, *priors.s_prior)
            + ig_logpdf(params.sigma2, *priors.ig_sigma2) + ig_logpdf(params.tau2, *priors.ig_tau2))


def log_posterior(params, priors, family, data):
    """Normalized log prior plus log likelihood; ``-inf`` outside the support.

    ``data=None`` (or an empty set) gives the prior alone.
    """
    if min(params.a, params.b, params.sigma2, params.tau2) <= 0:
        return -math.inf
    lp = log_prior(params, priors)
    if data is None or data.n == 0:
        return lp
    try:
        return lp + log_marginal_likelihood(family, params, data)
    except NumericalError:
        return -math.inf


@dataclass(frozen=True)
class PosteriorSamples:
    draws: np.ndarray
    acceptance_rate: float
    seed: int
    names: tuple = PARAM_NAMES
    proposal_scale: float = field(default=None, repr=False)

    def column(self, name):
        return self.draws[:, self.names.index(name)]


def _to_params(z):
    v = [math.exp(x) if pos else x for x, pos in zip(z, _POSITIVE)]
    return PairwiseParams(sigma2=v[3], b=v[1], a=v[0], s=v[2], tau2=v[4])


def _to_z(params):
    v = (params.a, params.b, params.s, params.sigma2, params.tau2)
    return np.array([math.log(x) if pos else x for x, pos in zip(v, _POSITIVE)])


def sample_posterior(data, family, priors, num_draws=2000, burn_in=1000, seed=0, start=None,
                     fixed=None):
    """Adaptive random-walk Metropolis draws from the posterior.

    ``fixed`` maps parameter names to values held constant.  ``start``
    defaults to the MLE initializer (or the prior centre without data).
    During burn-in the proposal covariance is re-estimated from the chain
    and its scale steered toward 23.4% acceptance; both are then frozen.
    """
    if num_draws < 100:
        raise ValidationError("num_draws must be at least 100")
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(PARAM_NAMES)
    if unknown:
        raise ValidationError(f"unknown fixed parameters {sorted(unknown)}")
    rng = np.random.default_rng(seed)
    has_data = data is not None and data.n > 0
    if start is None:
        if has_data:
            start = initialize(data, family, FitConfig(s_bounds=_s_box(priors)))
        else:
            start = PairwiseParams(
                sigma2=_ig_centre(priors.ig_sigma2), b=_ig_centre(priors.ig_b),
                a=_ig_centre(priors.ig_a), s=priors.s_prior[0], tau2=_ig_centre(priors.ig_tau2))
    z = _to_z(start)
    for name, value in fixed.items():
        i = PARAM_NAMES.index(name)
        z[i] = math.log(value) if _POSITIVE[i] else value
    free = np.array([name not in fixed for name in PARAM_NAMES])
    d = int(free.sum())
    jac_mask = np.array(_POSITIVE) & free

    def target(zz):
        lp = log_posterior(_to_params(zz), priors, family, data if has_data else None)
        return lp + float(zz[jac_mask].sum())

    cur = target(z)
    if not np.isfinite(cur):
        raise SamplerError("posterior is not finite at the starting point")
    cov = np.eye(d) * 0.1
    log_scale = math.log(2.38 / math.sqrt(d))
    chol = np.linalg.cholesky(cov)
    burn = []
    out = np.empty((num_draws, len(PARAM_NAMES)))
    accepted = 0
    total = burn_in + num_draws
    for it in range(total):
        step = math.exp(log_scale) * (chol @ rng.standard_normal(d))
        prop = z.copy()
        prop[free] += step
        new = target(prop)
        ok = math.log(rng.uniform()) < new - cur
        if ok:
            z, cur = prop, new
        if it < burn_in:
            burn.append(z[free].copy())
            # Robbins-Monro step on the log scale, decaying over burn-in
            log_scale += (float(ok) - TARGET_ACCEPTANCE) / math.sqrt(it + 1)
            if (it + 1) % 100 == 0 and it + 1 >= 200:
                emp = np.cov(np.array(burn[len(burn) // 2:]).T).reshape(d, d)
                emp += 1e-8 * np.eye(d)
                try:
                    chol = np.linalg.cholesky(emp)
                except np.linalg.LinAlgError:
                    pass
        else:
            accepted += ok
            out[it - burn_in] = _natural(z)
    rate = accepted / num_draws
    if rate < 0.01:
        raise SamplerError(f"acceptance rate {rate:.4f} below 0.01 after adaptation")
    return PosteriorSamples(out, rate, seed, PARAM_NAMES, math.exp(log_scale))


def _natural(z):
    return np.array([math.exp(x) if pos else x for x, pos in zip(z, _POSITIVE)])


def _ig_centre(prior):
    shape, scale = prior
    return scale / (shape - 1) if shape > 1 else scale / (shape + 1)


def _s_box(priors):
    mu, var = priors.s_prior
    half = 2.0 * math.sqrt(var)
    return (mu - half, mu + half)


def summarize(samples):
    """Mean, median and 2.5% / 97.5% quantiles (linear interpolation) per parameter."""
    draws = samples.draws if hasattr(samples, "draws") else np.asarray(samples)
    names = getattr(samples, "names", PARAM_NAMES)
    if len(draws) < 100:
        raise ValidationError("at least 100 draws are required")
    out = {}
    for j, name in enumerate(names):
        col = draws[:, j]
        q = np.quantile(col, [0.025, 0.5, 0.975])
        out[name] = {"mean": float(col.mean()), "median": float(q[1]),
                     "q2.5": float(q[0]), "q97.5": float(q[2])}
    return out

"""Exact Gaussian likelihood and constrained maximum-likelihood fitting.

Parameters are optimized in a transformed vector

    theta = (log sigma2, log b, log a_lk for l < k, s_2..s_L, log tau2)

so that every positive parameter is unconstrained apart from a small floor;
lags keep a box ``s_bounds``.  For two series the vector is simply
``(log sigma2, log b, log a, s, log tau2)``.  With a single series the
dissimilarity and lag blocks are empty, giving an ordinary stationary GP.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize

from . import kernels
from .baselines import tlcc
from .exceptions import NumericalError, OptimizationError, ValidationError
from .kernels import MultiParams, PairwiseParams, as_family

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
_LOG_UPPER = math.log(1e8)


class InitializationWarning(UserWarning):
    """Single-series GP fit failed and moment-based defaults were used."""


@dataclass(frozen=True)
class FitConfig:
    s_bounds: tuple = (-4.0, 4.0)
    positive_floor: float = 1e-6
    max_iter: int = 500
    grad_tol: float = 1e-6
    multistart_count: int = 5
    penalty_schedule: tuple = (10.0, 10.0, 4)  # (initial weight, growth factor, rounds)
    seed: int = 0
    replicate: int = 0

    def __post_init__(self):
        lo, hi = self.s_bounds
        if not lo < hi:
            raise ValidationError(f"s_bounds must satisfy lo < hi, got {self.s_bounds}")
        if not self.positive_floor > 0:
            raise ValidationError("positive_floor must be > 0")
        if self.multistart_count < 1:
            raise ValidationError("multistart_count must be >= 1")


@dataclass
class FitResult:
    params: object
    loglik: float
    iterations: int
    converged: bool
    constraint_report: list = field(default_factory=list)
    start_used: int = 0
    history: list = field(default_factory=list, repr=False)
    starts: list = field(default_factory=list, repr=False)

    def estimates(self):
        return self.params.as_dict()

    def to_json(self):
        est = self.estimates()
        return {
            "estimates": {k: (float(v) if np.isscalar(v) else v) for k, v in est.items()},
            "loglik": float(self.loglik),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "start_used": int(self.start_used),
            "constraint_report": list(self.constraint_report),
        }


# ---------------------------------------------------------------------------
# factorization and likelihood


def cholesky_jitter(K, scale):
    """Lower Cholesky factor of ``K``, adding ``1e-8*scale``..``1e-2*scale`` on failure.

    Returns ``(L, jitter)``.
    """
    try:
        return la.cholesky(K, lower=True, check_finite=False), 0.0
    except la.LinAlgError:
        pass
    if not np.all(np.isfinite(K)):
        raise NumericalError("covariance matrix has non-finite entries")
    jit = 1e-8 * scale
    last = None
    while jit <= 1e-2 * scale * (1 + 1e-12):
        try:
            Kj = K.copy()
            Kj[np.diag_indices_from(Kj)] += jit
            return la.cholesky(Kj, lower=True, check_finite=False), jit
        except la.LinAlgError as exc:
            last = exc
            jit *= 10.0
    raise NumericalError(f"Cholesky failed after jitter {jit / 10:.1e}: {last}")


def _loglik_from_factor(Lc, y):
    alpha = la.cho_solve((Lc, True), y, check_finite=False)
    logdet = 2.0 * np.log(np.diag(Lc)).sum()
    return -0.5 * len(y) * LOG_2PI - 0.5 * logdet - 0.5 * y @ alpha, alpha


def log_marginal_likelihood(family, params, data):
    """Gaussian log density of ``data.y`` under the zero-mean GP with ``Sigma + tau2 I``."""
    if data.n == 0:
        return 0.0
    K = kernels.covariance_matrix(family, params, data, include_noise=True)
    Lc, _ = cholesky_jitter(K, params.sigma2)
    return float(_loglik_from_factor(Lc, data.y)[0])


# ---------------------------------------------------------------------------
# transformed parameter vector


class Layout:
    """Maps theta vectors to parameter objects for ``L`` series."""

    def __init__(self, L, pairwise=None):
        self.L = L
        self.pairwise = (L == 2) if pairwise is None else pairwise
        self.pairs = [(l, k) for l in range(L) for k in range(l + 1, L)]
        self.na = len(self.pairs)
        self.i_a = slice(2, 2 + self.na)
        self.i_s = slice(2 + self.na, 2 + self.na + L - 1)
        self.size = 3 + self.na + L - 1

    def names(self):
        a = ["log_a" if self.pairwise else f"log_a{l + 1}{k + 1}" for l, k in self.pairs]
        s = ["s" if self.pairwise else f"s{l}" for l in range(2, self.L + 1)]
        return ["log_sigma2", "log_b", *a, *s, "log_tau2"]

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        sigma2, b, tau2 = math.exp(theta[0]), math.exp(theta[1]), math.exp(theta[-1])
        A = np.zeros((self.L, self.L))
        for (l, k), v in zip(self.pairs, theta[self.i_a]):
            A[l, k] = A[k, l] = math.exp(v)
        S = np.concatenate([[0.0], theta[self.i_s]])
        if self.pairwise:
            return PairwiseParams(sigma2, b, A[0, 1], float(S[1]), tau2)
        return MultiParams(sigma2, b, tau2, A, S)

    def pack(self, params):
        p = params.to_multi()
        if p.num_series != self.L:
            raise ValidationError(f"expected {self.L} series, params have {p.num_series}")
        with np.errstate(divide="raise"):
            try:
                a = [math.log(p.A[l, k]) for l, k in self.pairs]
                return np.array([math.log(p.sigma2), math.log(p.b), *a, *p.S[1:],
                                 math.log(p.tau2)])
            except (ValueError, FloatingPointError):
                raise ValidationError("positive parameters must be > 0 in log space") from None


def _layout_for(params):
    return Layout(params.num_series, pairwise=isinstance(params, PairwiseParams))


def loglik_and_grad(family, theta, data, layout):
    """Log likelihood and its analytic gradient with respect to theta."""
    params = layout.unpack(theta)
    geo, kv, parts = kernels.condensed_partials(family, params, data)
    K = geo.full(kv)
    K[np.diag_indices_from(K)] += params.tau2
    Lc, _ = cholesky_jitter(K, params.sigma2)
    ll, alpha = _loglik_from_factor(Lc, data.y)
    Kinv, info = la.lapack.dpotri(Lc, lower=1)
    if info != 0:
        raise NumericalError(f"inverse from Cholesky factor failed (info={info})")
    # potri fills the lower triangle; read it transposed as the upper one
    i, j = geo.iu
    w = geo.weight * (alpha[i] * alpha[j] - Kinv[j, i])
    grad = np.empty(layout.size)
    for idx, P in enumerate(parts):
        grad[idx] = 0.5 * (w @ P)
    grad[-1] = 0.5 * params.tau2 * (alpha @ alpha - np.trace(Kinv))
    return float(ll), grad


def _loglik_theta(family, theta, data, layout):
    ll = log_marginal_likelihood(family, layout.unpack(theta), data)
    if not np.isfinite(ll):
        raise NumericalError(f"non-finite log likelihood at theta={np.asarray(theta).tolist()}")
    return ll


def nll_gradient(family, params, data, step=1e-5, scheme="central"):
    """Finite-difference gradient of the negative log likelihood in theta.

    Central differences with step ``step * max(1, |theta_k|)``;
    ``scheme="forward"`` gives one-sided differences.
    """
    layout = _layout_for(params)
    theta = layout.pack(params)
    g = np.empty_like(theta)
    f0 = None if scheme == "central" else _loglik_theta(family, theta, data, layout)
    for k in range(len(theta)):
        h = step * max(1.0, abs(theta[k]))
        up = theta.copy()
        up[k] += h
        if scheme == "central":
            dn = theta.copy()
            dn[k] -= h
            g[k] = (_loglik_theta(family, up, data, layout) - _loglik_theta(family, dn, data, layout)) / (2 * h)
        else:
            g[k] = (_loglik_theta(family, up, data, layout) - f0) / h
    return -g


# ---------------------------------------------------------------------------
# optimizer driver


def _projected_grad_norm(x, g, bounds):
    pg = np.array(g, dtype=float)
    for k, (lo, hi) in enumerate(bounds):
        if x[k] <= lo and pg[k] > 0 or x[k] >= hi and pg[k] < 0:
            pg[k] = 0.0
    return float(np.max(np.abs(pg))) if len(pg) else 0.0


def _run_lbfgsb(objective, theta0, bounds, config, restarts=3):
    """Minimize ``objective(theta) -> (f, grad)``; returns (result, history of -f).

    L-BFGS-B's ``ftol`` test looks at a single step, so when it fires with
    the projected gradient still above ``grad_tol`` the run is resumed from
    its end point; the fit stops once the gradient test passes or three
    consecutive runs change the objective by at most 1e-10 (relative).
    """
    history = []

    def callback(intermediate_result):
        history.append(-float(intermediate_result.fun))

    options = {"maxiter": config.max_iter, "gtol": config.grad_tol, "ftol": 1e-10, "maxls": 40}
    res = minimize(objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
                   callback=callback, options=options)
    nit, stalls = res.nit, 0
    while (_projected_grad_norm(res.x, res.jac, bounds) > config.grad_tol and stalls < restarts - 1
           and nit < config.max_iter and np.isfinite(res.fun)):
        more = minimize(objective, res.x, jac=True, method="L-BFGS-B", bounds=bounds,
                        callback=callback, options={**options, "maxiter": config.max_iter - nit})
        nit += more.nit
        gain = res.fun - more.fun
        if more.fun <= res.fun:
            res = more
        stalls = stalls + 1 if gain <= 1e-10 * max(1.0, abs(res.fun)) else 0
    res.nit = nit
    res.success = bool(res.success) or _projected_grad_norm(res.x, res.jac, bounds) <= config.grad_tol
    return res, history


def _bounds(layout, config, positive_upper=_LOG_UPPER):
    lo = math.log(config.positive_floor)
    b = [(lo, positive_upper)] * (2 + layout.na)
    b += [tuple(config.s_bounds)] * (layout.L - 1)
    b += [(lo, positive_upper)]
    return b


def _clip_theta(theta, bounds):
    return np.array([min(max(v, lo), hi) for v, (lo, hi) in zip(theta, bounds)])


def _active_bounds(theta, bounds, names, tol=1e-8):
    report = []
    for v, (lo, hi), name in zip(theta, bounds, names):
        if abs(v - lo) <= tol * max(1.0, abs(lo)):
            report.append(f"{name} at lower bound {lo:.6g}")
        elif abs(v - hi) <= tol * max(1.0, abs(hi)):
            report.append(f"{name} at upper bound {hi:.6g}")
    return report


def _optimize_starts(family, data, layout, starts, config, penalty=None):
    """Run L-BFGS-B from each start; return the best (res, history, index) and diagnostics."""
    bounds = _bounds(layout, config)

    def objective(theta):
        try:
            ll, g = loglik_and_grad(family, theta, data, layout)
        except NumericalError:
            return np.inf, np.zeros_like(theta)
        f, grad = -ll, -g
        if penalty is not None:
            pf, pg = penalty(theta)
            f, grad = f + pf, grad + pg
        return f, grad

    best, diagnostics = None, []
    for i, theta0 in enumerate(starts):
        theta0 = _clip_theta(theta0, bounds)
        try:
            f0, _ = objective(theta0)
            if not np.isfinite(f0):
                raise NumericalError("objective not finite at start")
            res, hist = _run_lbfgsb(objective, theta0, bounds, config)
            if not np.isfinite(res.fun):
                raise NumericalError("objective not finite at optimum")
        except (NumericalError, ValueError, np.linalg.LinAlgError) as exc:
            diagnostics.append({"start": i, "theta0": theta0.tolist(), "error": str(exc)})
            continue
        diagnostics.append({"start": i, "theta0": theta0.tolist(), "fun": float(res.fun),
                            "nit": int(res.nit), "message": str(res.message)})
        if best is None or res.fun < best[0].fun:
            best = (res, [-f0, *hist], i)
    if best is None:
        raise OptimizationError("all optimizer starts failed", diagnostics)
    return best, diagnostics, bounds


# ---------------------------------------------------------------------------
# single-series GP (used for initialization and as a prediction baseline)


def fit_single_series(data, family, config=FitConfig()):
    """Stationary GP fit of (sigma2, b, tau2) to a one-series dataset."""
    fam = as_family(family)
    if data.num_series != 1:
        raise ValidationError("fit_single_series expects exactly one series")
    layout = Layout(1)
    var = float(np.var(data.y)) or 1.0
    dt = np.diff(np.unique(data.t))
    med = float(np.median(dt)) if len(dt) else 1.0
    span = float(np.ptp(data.t)) or 1.0
    starts = []
    for b0 in (1.0 / med, 1.0 / med ** 2, 10.0 / span, 100.0 / span ** 2):
        starts.append(np.log([var, b0, 0.1 * var]))
    (res, hist, i), diag, bounds = _optimize_starts(fam, data, layout, starts, config)
    params = layout.unpack(res.x)
    return FitResult(params, -float(res.fun), int(res.nit), bool(res.success),
                     _active_bounds(res.x, bounds, layout.names()), i, hist, diag)


def _fallback_stationary(y, t):
    var = float(np.var(y)) or 1.0
    dt = np.diff(np.unique(t))
    med = float(np.median(dt)) if len(dt) else 1.0
    return var, 1.0 / med ** 2, 0.1 * var


def _stationary_init(data, family, config):
    one = data.select_series([1])
    try:
        fit = fit_single_series(one, family, config)
        p = fit.params
        return p.sigma2, p.b, max(p.tau2, config.positive_floor)
    except (OptimizationError, NumericalError) as exc:
        warnings.warn(f"single-series GP fit failed ({exc}); using moment defaults",
                      InitializationWarning, stacklevel=3)
        sigma2, b, tau2 = _fallback_stationary(one.y, one.t)
        return sigma2, b, max(tau2, config.positive_floor)


def default_lag_grid(data, s_bounds, l=2):
    """Lag candidates in ``s_bounds`` spaced by the median sampling step, anchored at 0.

    Nearest-time pairing cannot resolve lags finer than the sampling step
    (neighbouring candidates pair the same points), so a finer grid only
    adds ties.
    """
    lo, hi = s_bounds
    dts = np.concatenate([np.diff(np.unique(data.times(k))) for k in (1, l)])
    step = float(np.median(dts)) if len(dts) else (hi - lo) / 40
    step = max(step, (hi - lo) / 400)
    k = np.arange(math.ceil(lo / step - 1e-9), math.floor(hi / step + 1e-9) + 1)
    grid = k * step
    return np.unique(np.concatenate([grid[(grid >= lo) & (grid <= hi)], [lo, hi]]))


def tlcc_init(data, s_bounds, l=2):
    """TLCC lag between series 1 and ``l`` clamped to ``s_bounds`` (midpoint if undefined)."""
    pair = data.select_series([1, l])
    scan = tlcc(pair, default_lag_grid(data, s_bounds, l))
    if not np.isfinite(scan.best_corr):
        return 0.5 * (s_bounds[0] + s_bounds[1])
    return float(np.clip(scan.best_lag, *s_bounds))


def initialize(data, family, config=FitConfig()):
    """Starting point for a two-series fit.

    ``sigma2, b, tau2`` come from a single-series GP fit to series 1, ``s``
    from TLCC and ``a`` is set to 1.
    """
    if data.num_series != 2:
        raise ValidationError("initialize expects exactly two series")
    sigma2, b, tau2 = _stationary_init(data, family, config)
    return PairwiseParams(sigma2, b, 1.0, tlcc_init(data, config.s_bounds), tau2)


def _start_lags(s0, config):
    lo, hi = config.s_bounds
    m = config.multistart_count - 1
    grid = [lo + (hi - lo) * (i + 0.5) / m for i in range(m)] if m > 0 else []
    return [s0, *grid]


# ---------------------------------------------------------------------------
# two-series fit


def fit_mle_pairwise(data, family, config=FitConfig()):
    """Maximum-likelihood fit of (sigma2, b, a, s, tau2) for two series.

    Multistart over the lag: the TLCC start plus ``multistart_count - 1``
    equispaced interior values of ``s_bounds``; the best start wins.
    """
    fam = as_family(family)
    data.check()
    if data.num_series != 2:
        raise ValidationError("fit_mle_pairwise expects exactly two series")
    if data.n < 6:
        raise ValidationError("at least 6 observations are required")
    init = initialize(data, fam, config)
    layout = Layout(2)
    base = layout.pack(init)
    starts = []
    for s in _start_lags(init.s, config):
        th = base.copy()
        th[layout.i_s] = s
        starts.append(th)
    (res, hist, i), diag, bounds = _optimize_starts(fam, data, layout, starts, config)
    params = layout.unpack(res.x)
    return FitResult(params, -float(res.fun), int(res.nit), bool(res.success),
                     _active_bounds(res.x, bounds, layout.names()), i, hist, diag)


# ---------------------------------------------------------------------------
# L-series fit


def _triangles(L):
    return [(l, m, k) for l in range(L) for k in range(l + 1, L) for m in range(L) if m not in (l, k)]


def triangle_violation(A):
    """Largest ``a_lk - a_lm - a_mk`` over all triples (<= 0 when feasible)."""
    L = A.shape[0]
    tri = _triangles(L)
    if not tri:
        return 0.0
    return max(A[l, k] - A[l, m] - A[m, k] for l, m, k in tri)


def metric_closure(A):
    """Shortest-path closure: the largest metric that is elementwise <= A."""
    D = np.array(A, dtype=float)
    L = D.shape[0]
    for m in range(L):
        D = np.minimum(D, D[:, [m]] + D[[m], :])
    return D


def _triangle_penalty(layout, weight):
    tri = _triangles(layout.L)
    index = {pair: i for i, pair in enumerate(layout.pairs)}

    def idx(l, k):
        return index[(min(l, k), max(l, k))]

    def penalty(theta):
        a = np.exp(theta[layout.i_a])
        f = 0.0
        ga = np.zeros(layout.na)
        for l, m, k in tri:
            i_lk, i_lm, i_mk = idx(l, k), idx(l, m), idx(m, k)
            gap = a[i_lk] - a[i_lm] - a[i_mk]
            if gap > 0:
                f += weight * gap * gap
                ga[i_lk] += 2 * weight * gap
                ga[i_lm] -= 2 * weight * gap
                ga[i_mk] -= 2 * weight * gap
        g = np.zeros(layout.size)
        g[layout.i_a] = ga * a
        return f, g

    return penalty


def fit_mle_multi(data, family, config=FitConfig()):
    """Maximum-likelihood fit for L >= 3 series under the metric constraints on A.

    Triangle inequalities are handled by an exterior quadratic penalty whose
    weight grows per ``config.penalty_schedule``.  Any residual violation
    above 1e-8 is removed by the shortest-path closure of A, which is then
    reported in ``constraint_report``.
    """
    fam = as_family(family)
    data.check()
    L = data.num_series
    if L < 3:
        raise ValidationError("fit_mle_multi expects at least three series")
    if np.any(data.counts() < 6):
        raise ValidationError("every series needs at least 6 observations")
    layout = Layout(L, pairwise=False)
    sigma2, b, tau2 = _stationary_init(data, fam, config)
    s0 = [tlcc_init(data, config.s_bounds, l) for l in range(2, L + 1)]
    base = np.concatenate([[math.log(sigma2), math.log(b)], np.zeros(layout.na), s0,
                           [math.log(tau2)]])
    rng = np.random.default_rng([config.seed, config.replicate])
    starts = [base]
    for _ in range(config.multistart_count - 1):
        th = base.copy()
        th[layout.i_s] = rng.uniform(*config.s_bounds, size=L - 1)
        starts.append(th)

    w0, growth, rounds = config.penalty_schedule
    (res, hist, i), diag, bounds = _optimize_starts(fam, data, layout, starts, config,
                                                    penalty=_triangle_penalty(layout, w0))
    iterations = int(res.nit)
    history = list(hist)
    theta = res.x
    weight = w0
    for _ in range(int(rounds) - 1):
        A = layout.unpack(theta).A
        if triangle_violation(A) <= 1e-8:
            break
        weight *= growth
        (res, hist, _), more, _ = _optimize_starts(fam, data, layout, [theta], config,
                                                   penalty=_triangle_penalty(layout, weight))
        theta = res.x
        iterations += int(res.nit)
        history.extend(hist)
        diag.extend(more)

    params = layout.unpack(theta)
    report = _active_bounds(theta, bounds, layout.names())
    viol = triangle_violation(params.A)
    if viol > 1e-8:
        A = metric_closure(params.A)
        report.append(f"triangle inequality violated by {viol:.3g} after penalty; "
                      "A replaced by its metric closure")
        params = replace(params, A=A)
    loglik = log_marginal_likelihood(fam, params, data)
    bad = kernels.validate_params(params, tol=1e-8)
    if bad or not np.isfinite(loglik):
        raise OptimizationError(f"infeasible final point: {[v.detail for v in bad]}",
                                diag + [{"constraint_report": report}])
    return FitResult(params, float(loglik), iterations, bool(res.success), report, i,
                     history, diag)


def fit_mle(data, family, config=FitConfig()):
    """Dispatch to the pairwise or multi-series fit by the number of series."""
    if data.num_series == 2:
        return fit_mle_pairwise(data, family, config)
    return fit_mle_multi(data, family, config)

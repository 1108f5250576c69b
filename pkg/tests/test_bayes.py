import math

import numpy as np
import pytest

from gplag import bayes as B
from gplag import inference as I
from gplag import simulate
from gplag.data import TimeSeriesSet, center_series
from gplag.exceptions import SamplerError, ValidationError
from gplag.kernels import PairwiseParams

P = PairwiseParams(4.0, 0.3, 1.0, 2.0, 0.1)


def lexp_data(seed=1, n=100):
    design = simulate.gen_time_design(n, 2, lags=[0, 2], seed=seed)
    return center_series(simulate.sample_gplag("lexp", P, design, seed=[seed, 1]))


def batch_means_se(x, batches=50):
    m = len(x) // batches
    means = x[: m * batches].reshape(batches, m).mean(axis=1)
    return means.std(ddof=1) / math.sqrt(batches)


def test_ig_density_example():
    assert B.ig_logpdf(1.0, 2.0, 1.0) == pytest.approx(-1.0, abs=1e-15)
    assert B.ig_logpdf(0.0, 2.0, 1.0) == -math.inf


def test_normal_mode():
    assert B.normal_logpdf(0.7, 0.7, 2.5) == pytest.approx(-0.5 * math.log(2 * math.pi * 2.5))


def test_posterior_is_prior_plus_likelihood():
    d = lexp_data(n=20)
    pri = B.PriorSpec(ig_sigma2=(3.0, 2.0), s_prior=(1.0, 4.0))
    lp = B.log_posterior(P, pri, "lexp", d)
    ll = I.log_marginal_likelihood("lexp", P, d)
    prior = (B.ig_logpdf(P.a, 2, 1) + B.ig_logpdf(P.b, 2, 1) + B.normal_logpdf(P.s, 1.0, 4.0)
             + B.ig_logpdf(P.sigma2, 3, 2) + B.ig_logpdf(P.tau2, 2, 1))
    assert lp - ll == pytest.approx(prior, rel=1e-14)
    assert lp == B.log_prior(P, pri) + ll


def test_nonpositive_parameters_give_minus_inf():
    d = lexp_data(n=10)
    for bad in (PairwiseParams(4, 0.3, 0.0, 2, 0.1), PairwiseParams(4, 0.3, 1, 2, -1.0)):
        assert B.log_posterior(bad, B.PriorSpec(), "lexp", d) == -math.inf


def test_posterior_permutation_invariance():
    d = lexp_data(n=15)
    rng = np.random.default_rng(0)
    perm = rng.permutation(d.n)
    d2 = TimeSeriesSet(d.t[perm], d.series[perm], d.y[perm], 2)
    pri = B.PriorSpec()
    assert abs(B.log_posterior(P, pri, "lexp", d) - B.log_posterior(P, pri, "lexp", d2)) <= 1e-10


def test_prior_spec_validation():
    with pytest.raises(ValidationError):
        B.PriorSpec(ig_a=(0.0, 1.0))
    with pytest.raises(ValidationError):
        B.PriorSpec(s_prior=(0.0, 0.0))


def test_prior_only_moment():
    pri = B.PriorSpec(ig_sigma2=(4.0, 3.0))
    smp = B.sample_posterior(None, "lexp", pri, num_draws=40000, burn_in=2000, seed=11)
    x = smp.column("sigma2")
    assert abs(x.mean() - 3.0 / 3.0) <= 3 * batch_means_se(x)
    assert np.all(smp.draws[:, [0, 1, 3, 4]] > 0)
    assert 0 <= smp.acceptance_rate <= 1


def test_same_seed_same_draws():
    d = lexp_data(n=15)
    pri = B.default_priors(d, (0, 4))
    a = B.sample_posterior(d, "lexp", pri, 200, 200, seed=4)
    b = B.sample_posterior(d, "lexp", pri, 200, 200, seed=4)
    assert np.array_equal(a.draws, b.draws)
    c = B.sample_posterior(d, "lexp", pri, 200, 200, seed=5)
    assert not np.array_equal(a.draws, c.draws)


def test_sampler_preconditions():
    with pytest.raises(ValidationError):
        B.sample_posterior(None, "lexp", B.PriorSpec(), num_draws=50)
    with pytest.raises(ValidationError):
        B.sample_posterior(None, "lexp", B.PriorSpec(), fixed={"c": 1.0})


def test_sampler_failure_is_reported(monkeypatch):
    # a target that rejects every proposal
    calls = {"n": 0}

    def spiky(params, priors, family, data):
        calls["n"] += 1
        return 0.0 if calls["n"] == 1 else -math.inf

    monkeypatch.setattr(B, "log_posterior", spiky)
    with pytest.raises(SamplerError):
        B.sample_posterior(None, "lexp", B.PriorSpec(), num_draws=100, burn_in=10)


def test_two_point_posterior_matches_quadrature():
    d = TimeSeriesSet([0.0, 0.5], [1, 2], [0.8, 0.3], 2)
    pri = B.PriorSpec(ig_sigma2=(3.0, 2.0), s_prior=(0.5, 1.0))
    fixed = {"a": 0.5, "b": 1.0, "tau2": 0.2}
    smp = B.sample_posterior(d, "lrbf", pri, num_draws=60000, burn_in=3000, seed=2, fixed=fixed,
                             start=PairwiseParams(1.0, 1.0, 0.5, 0.5, 0.2))
    s_edges = np.linspace(-2.0, 3.0, 7)
    v_edges = np.linspace(0.05, 3.0, 7)
    # 50 x 50 quadrature nodes per coarse cell grid (midpoint rule)
    s_mid = np.linspace(-2.0, 3.0, 301)[:-1] + 5.0 / 600
    v_mid = np.linspace(0.05, 3.0, 301)[:-1] + 2.95 / 600
    dens = np.empty((300, 300))
    for i, s in enumerate(s_mid):
        for j, v in enumerate(v_mid):
            dens[i, j] = B.log_posterior(PairwiseParams(v, 1.0, 0.5, s, 0.2), pri, "lrbf", d)
    dens = np.exp(dens - dens.max())
    quad = dens.reshape(6, 50, 6, 50).sum(axis=(1, 3))
    quad /= quad.sum()
    s, v = smp.column("s"), smp.column("sigma2")
    inside = (s >= -2) & (s < 3) & (v >= 0.05) & (v < 3)
    hist = np.histogram2d(s[inside], v[inside], bins=[s_edges, v_edges])[0]
    hist /= hist.sum()
    tv = 0.5 * np.abs(hist - quad).sum()
    assert tv <= 0.05


def test_summarize_examples():
    const = np.full((200, 5), 3.0)
    for v in B.summarize(const).values():
        assert v == {"mean": 3.0, "median": 3.0, "q2.5": 3.0, "q97.5": 3.0}
    seq = np.tile(np.arange(1.0, 101.0)[:, None], (1, 5))
    assert B.summarize(seq)["a"]["median"] == 50.5
    rng = np.random.default_rng(3)
    z = rng.normal(size=(4000, 1))
    sym = np.hstack([5 + z, 5 - z, z, z, z])
    out = B.summarize(sym)["a"]
    assert abs(out["mean"] - out["median"]) <= 4 / math.sqrt(4000)
    with pytest.raises(ValidationError):
        B.summarize(np.zeros((50, 5)))


@pytest.mark.slow
def test_lexp_posterior_median_lag_and_dispersed_starts():
    d = lexp_data(seed=1)
    pri = B.default_priors(d, (0.0, 4.0))
    smp = B.sample_posterior(d, "lexp", pri, 2000, 1000, seed=3)
    s_med = B.summarize(smp)["s"]["median"]
    assert 1.7 <= s_med <= 2.3
    fit = I.fit_mle(d, "lexp", I.FitConfig(s_bounds=(0, 4)))
    intervals = []
    for scale in (0.1, 10.0):
        p = fit.params
        start = PairwiseParams(p.sigma2 * scale, p.b * scale, p.a * scale, p.s, p.tau2 * scale)
        out = B.summarize(B.sample_posterior(d, "lexp", pri, 2000, 1500, seed=7, start=start))["s"]
        intervals.append((out["q2.5"], out["q97.5"]))
    (lo1, hi1), (lo2, hi2) = intervals
    assert max(lo1, lo2) <= min(hi1, hi2)

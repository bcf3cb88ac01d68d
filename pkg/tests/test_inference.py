from dataclasses import replace

import numpy as np
import pytest

from cexpectile import (
    CovarianceEstimate, DataError, NumericalError, SolverConfig, SurvivalSample,
    bootstrap_covariance, confidence_intervals, fit_censored_expectile, km_weights,
    make_penalty, oracle_bias_term, plug_in_covariance, plug_in_estimate,
)
from cexpectile import simulation as sim
from cexpectile.loss import g

from conftest import random_sample


def _fit(s, tau=0.5):
    curve, w = km_weights(s)
    return curve, w, fit_censored_expectile(s, tau, w)


def s2_double_loop(sample, resid, w, tau, curve, floor):
    n, p = sample.n, sample.p
    out = np.zeros((p, p))
    prev = 1.0
    for s_, G in zip(curve.jump_times, curve.values):
        d_lambda = np.log(max(prev, floor)) - np.log(max(G, floor))
        prev = G
        k = np.zeros(p)
        at_risk = 0
        for i in range(n):
            if sample.y[i] >= s_:
                at_risk += 1
                k += w[i] * sample.x[i] * g(tau, resid[i])
        if at_risk == 0:
            continue
        k /= n
        out += np.outer(k, k) / (at_risk / n) * d_lambda
    return out


def test_s2_zero_uncensored(rng):
    s = random_sample(rng, n=50, p=3, censor=0.0)
    curve, w, fit = _fit(s, 0.3)
    pieces = plug_in_covariance(s, fit, curve, w)
    assert np.all(pieces.s2_hat == 0.0)


def test_ls_reduces_to_robust_covariance(rng):
    s = random_sample(rng, n=60, p=3, censor=0.0)
    curve, w, fit = _fit(s)
    pieces = plug_in_covariance(s, fit, curve, w)
    e, x, n = fit.residuals, s.x, s.n
    assert np.allclose(pieces.s1_hat, (x * e[:, None] ** 2).T @ x / n, rtol=1e-12)
    assert np.allclose(pieces.s3_hat, x.T @ x / n, rtol=1e-12)
    bread = np.linalg.inv(x.T @ x)
    hc0 = bread @ (x * e[:, None] ** 2).T @ x @ bread
    assert np.allclose(pieces.sigma_hat, hc0, rtol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_s2_double_loop(seed):
    rng = np.random.default_rng(seed)
    s = random_sample(rng, n=6, p=1, censor=0.5)
    if s.delta.all() or not s.delta.any():
        pytest.skip("draw without both events and censorings")
    curve, w, fit = _fit(s, 0.35)
    pieces = plug_in_covariance(s, fit, curve, w)
    ref = s2_double_loop(s, fit.residuals, w.w, 0.35, curve, w.floor)
    assert np.allclose(pieces.s2_hat, ref, rtol=1e-12, atol=1e-15)


def test_s2_double_loop_multivariate(rng):
    s = random_sample(rng, n=40, p=3, censor=0.4)
    curve, w, fit = _fit(s, 0.7)
    pieces = plug_in_covariance(s, fit, curve, w)
    ref = s2_double_loop(s, fit.residuals, w.w, 0.7, curve, w.floor)
    assert np.allclose(pieces.s2_hat, ref, rtol=1e-12, atol=1e-15)


def test_symmetric_psd(rng):
    for _ in range(20):
        s = random_sample(rng, n=int(rng.integers(30, 150)), p=int(rng.integers(1, 5)), censor=0.35)
        curve, w, fit = _fit(s, rng.uniform(0.1, 0.9))
        pieces = plug_in_covariance(s, fit, curve, w)
        for m in (pieces.s1_hat, pieces.s2_hat, pieces.s3_hat, pieces.sigma_hat):
            assert np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max()))
            assert np.linalg.eigvalsh(m).min() >= -1e-10
        assert np.linalg.eigvalsh(pieces.s3_hat).min() > 0
        est = plug_in_estimate(pieces)
        assert np.allclose(est.se, np.sqrt(np.diag(est.cov)), rtol=1e-15)


def test_restrict(rng):
    s = random_sample(rng, n=80, p=3)
    curve, w, fit = _fit(s)
    pieces = plug_in_covariance(s, fit, curve, w)
    sub = pieces.restrict([0, 2])
    assert np.array_equal(sub.s1_hat, pieces.s1_hat[np.ix_([0, 2], [0, 2])])
    assert sub.sigma_hat.shape == (2, 2)


def test_singular_curvature(rng):
    s = random_sample(rng, n=40, p=1)
    x = np.column_stack([s.x[:, 0], s.x[:, 0]])
    dup = SurvivalSample(s.y, s.delta, x)
    curve, w = km_weights(dup)
    fit = fit_censored_expectile(dup, 0.5, w, SolverConfig(ridge=1e-6))
    with pytest.raises(NumericalError, match="S3"):
        plug_in_covariance(dup, fit, curve, w)


def test_confidence_intervals():
    ci = confidence_intervals(np.zeros(1), np.ones(1), 0.95)
    assert ci[0] == pytest.approx([-1.959964, 1.959964], abs=1e-6)
    tiny = confidence_intervals(np.array([2.0]), np.ones(1), 1e-12)
    assert tiny[0] == pytest.approx([2.0, 2.0], abs=1e-11)
    est = CovarianceEstimate.from_cov("plugin", np.diag([0.0, 4.0]))
    ci = confidence_intervals(np.array([1.0, 1.0]), est, 0.9)
    assert ci[0].tolist() == [1.0, 1.0]
    assert ci[1] == pytest.approx([1 - 2 * 1.644854, 1 + 2 * 1.644854], abs=1e-5)
    with pytest.raises(ValueError):
        confidence_intervals(np.zeros(1), np.ones(1), 1.0)


def test_bootstrap_determinism_and_workers(rng):
    s = random_sample(rng, n=60, p=2, censor=0.25)
    a = bootstrap_covariance(s, 0.4, B=20, seed=3)
    b = bootstrap_covariance(s, 0.4, B=20, seed=3)
    c = bootstrap_covariance(s, 0.4, B=20, seed=3, n_jobs=2)
    assert np.array_equal(a.cov, b.cov)
    assert np.array_equal(a.cov, c.cov)
    assert a.meta["replicates"] == 20 and a.method == "bootstrap"
    assert not np.array_equal(a.cov, bootstrap_covariance(s, 0.4, B=20, seed=4).cov)


def test_bootstrap_degenerate_inputs():
    one = SurvivalSample(np.array([1.0]), np.array([1]), np.ones((1, 1)))
    with pytest.raises(DataError):
        bootstrap_covariance(one, 0.5, B=2)
    two = SurvivalSample(np.array([1.0, 2.0]), np.array([1, 1]), np.ones((2, 1)))
    with pytest.raises(ValueError):
        bootstrap_covariance(two, 0.5, B=1)


def test_bootstrap_agrees_with_plug_in():
    model, tmpl = sim.two_covariate_design(500)
    tmpl = replace(tmpl, c1=sim.calibrate_c1(model, tmpl, 0.25, draws=20000), seed=1)
    s, _ = sim.generate_dataset(tmpl, model)
    tau = sim.centering_tau("gumbel")
    curve, w = km_weights(s)
    fit = fit_censored_expectile(s, tau, w)
    plug = plug_in_estimate(plug_in_covariance(s, fit, curve, w))
    boot = bootstrap_covariance(s, tau, B=200, seed=0, init=fit.beta)
    assert np.all(np.abs(boot.se / plug.se - 1) <= 0.30)


def test_oracle_bias_scaling():
    n = 10_000
    model, tmpl = sim.sparse_design(n, p=8)
    tmpl = replace(tmpl, c1=sim.calibrate_c1(model, tmpl, 0.25, draws=20000), seed=2)
    s, _ = sim.generate_dataset(tmpl, model)
    tau = sim.centering_tau("gumbel")
    _, w = km_weights(s)
    pilot = fit_censored_expectile(s, tau, w)
    active = model.active_set
    zero = oracle_bias_term(make_penalty(s, pilot.beta, lam=0.0), s, w, pilot, active)
    assert np.all(zero == 0.0)
    root = oracle_bias_term(make_penalty(s, pilot.beta, lam=np.sqrt(n)), s, w, pilot, active)
    slow = oracle_bias_term(make_penalty(s, pilot.beta, lam=n ** 0.4), s, w, pilot, active)
    assert np.linalg.norm(root) > 0
    assert np.linalg.norm(slow) / np.linalg.norm(root) == pytest.approx(10 ** -0.4, rel=1e-12)
    with pytest.raises(ValueError):
        oracle_bias_term(make_penalty(s, pilot.beta), s, w, pilot, [])

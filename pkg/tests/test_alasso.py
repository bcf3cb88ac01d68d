from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from cexpectile import (
    PenaltySpec, SurvivalSample, adaptive_weights, default_lambda, fit_censored_alasso,
    fit_censored_expectile, gradient, kkt_report, km_weights, make_penalty, two_stage_fit,
)
from cexpectile import simulation as sim
from cexpectile.alasso import kkt_tolerance_penalized, penalized_objective

from conftest import random_sample


def test_adaptive_weight_examples():
    assert adaptive_weights([2.0, 0.5], 2).tolist() == [0.25, 4.0]
    assert adaptive_weights([0.0, 1e-13, 1.0], 1).tolist() == [np.inf, np.inf, 1.0]
    assert adaptive_weights(np.ones(4), 3.7).tolist() == [1.0] * 4
    with pytest.raises(ValueError):
        adaptive_weights([1.0], 0)


def test_default_lambda():
    assert default_lambda(1) == 1.0
    assert default_lambda(1024) == pytest.approx(16.0, rel=1e-12)
    assert default_lambda(400) == pytest.approx(10.986, abs=5e-4)


def test_penalty_validation():
    with pytest.raises(ValueError):
        PenaltySpec(-1.0, 2.0, np.ones(2))
    with pytest.raises(ValueError):
        PenaltySpec(1.0, 0.0, np.ones(2))
    with pytest.raises(ValueError):
        PenaltySpec(1.0, 2.0, np.array([1.0, 0.0]))


def test_lambda_zero_matches_unpenalized(rng):
    for _ in range(5):
        s = random_sample(rng, n=80, p=4, censor=0.3)
        _, w = km_weights(s)
        pilot = fit_censored_expectile(s, 0.4, w)
        fit = fit_censored_alasso(s, 0.4, w, make_penalty(s, pilot.beta, lam=0.0))
        assert np.allclose(fit.beta, pilot.beta, rtol=1e-8, atol=1e-8)
        assert fit.kkt_max_violation == pytest.approx(
            np.max(np.abs(gradient(fit.beta, s, w, 0.4))), abs=1e-10)


def test_dominant_lambda_gives_exact_zeros(rng):
    s = random_sample(rng, n=80, p=4, intercept=True)
    _, w = km_weights(s)
    pilot = fit_censored_expectile(s, 0.6, w)
    fit = fit_censored_alasso(s, 0.6, w, make_penalty(s, pilot.beta, lam=1e12))
    assert np.all(fit.beta[1:] == 0.0)
    assert fit.active_set == (0,)
    # the intercept is unpenalized, so it is the weighted 0.6-expectile of log y
    icpt = fit_censored_expectile(s.select_columns([0]), 0.6, w).beta[0]
    assert fit.beta[0] == pytest.approx(icpt, rel=1e-10)
    assert fit.converged
    assert kkt_report(fit, s, 0.6, w) <= kkt_tolerance_penalized(1e12)


def test_penalized_intercept_can_vanish(rng):
    s = random_sample(rng, n=60, p=2, intercept=True)
    _, w = km_weights(s)
    pen = PenaltySpec(1e12, 2.0, np.ones(3), penalize_intercept=True)
    assert np.all(fit_censored_alasso(s, 0.5, w, pen).beta == 0.0)


@pytest.mark.parametrize("seed", range(6))
def test_golden_section_p1(seed):
    rng = np.random.default_rng(100 + seed)
    s = random_sample(rng, n=40, p=1, censor=0.3)
    _, w = km_weights(s)
    tau = rng.uniform(0.2, 0.8)
    pilot = fit_censored_expectile(s, tau, w)
    lam = rng.uniform(0.1, 3.0) * abs(pilot.beta[0]) ** 2 * np.max(np.abs(s.x.T @ w.w))
    pen = make_penalty(s, pilot.beta, lam=lam)
    fit = fit_censored_alasso(s, tau, w, pen)
    cpen = pen.coefficient_penalties(s)
    f = lambda b: penalized_objective(np.array([b]), s, w, tau, cpen)[0]  # noqa: E731
    b0 = pilot.beta[0]
    res = minimize_scalar(f, bracket=(b0 - 3 * abs(b0) - 1, 0.0, b0 + 3 * abs(b0) + 1) if b0 > 0
                          else (b0 - 3 * abs(b0) - 1, b0, 3 * abs(b0) + 1),
                          method="golden", tol=1e-12)
    assert fit.beta[0] == pytest.approx(res.x, abs=1e-6)
    assert fit.objective <= f(res.x) + 1e-9


def test_kkt_and_history(rng):
    for k in range(30):
        s = random_sample(rng, n=int(rng.integers(40, 150)), p=int(rng.integers(2, 8)),
                          censor=0.3, intercept=bool(k % 2))
        _, w = km_weights(s)
        tau = rng.uniform(0.1, 0.9)
        pilot = fit_censored_expectile(s, tau, w)
        pen = make_penalty(s, pilot.beta, lam=rng.uniform(0, 3) * default_lambda(s.n))
        fit = fit_censored_alasso(s, tau, w, pen)
        assert fit.converged
        assert fit.kkt_max_violation <= kkt_tolerance_penalized(pen.lam)
        assert abs(kkt_report(fit, s, tau, w) - fit.kkt_max_violation) <= 1e-10
        hist = np.array(fit.history)
        assert np.all(np.diff(hist) <= 1e-12 * np.abs(hist[:-1]))
        assert fit.active_set == tuple(np.flatnonzero(fit.beta))


def test_frozen_coefficient_stays_zero(rng):
    s = random_sample(rng, n=60, p=3)
    _, w = km_weights(s)
    pen = PenaltySpec(0.0, 2.0, np.array([1.0, np.inf, 1.0]))
    fit = fit_censored_alasso(s, 0.5, w, pen)
    assert fit.beta[1] == 0.0 and fit.converged
    sub = fit_censored_expectile(s.select_columns([0, 2]), 0.5, w)
    assert np.allclose(fit.beta[[0, 2]], sub.beta, rtol=1e-8)


def test_kkt_report_rejects_other_tau(rng):
    s = random_sample(rng)
    _, w = km_weights(s)
    fit = fit_censored_alasso(s, 0.5, w, PenaltySpec(1.0, 2.0, np.ones(2)))
    with pytest.raises(ValueError):
        kkt_report(fit, s, 0.6, w)


def test_two_stage_lambda_zero(rng):
    s = random_sample(rng, n=80, p=3, censor=0.2)
    _, w = km_weights(s)
    res = two_stage_fit(s, 0.5, w, lam=0.0)
    assert res.refit_columns == (0, 1, 2)
    assert np.allclose(res.refit.beta, res.pilot.beta, rtol=1e-8)
    assert np.allclose(res.penalized.beta, res.pilot.beta, rtol=1e-8)
    assert np.allclose(res.coefficients, res.pilot.beta, rtol=1e-8)


def test_two_stage_pure_noise():
    rng = np.random.default_rng(7)
    n = 200
    x = rng.normal(size=(n, 4))
    s = SurvivalSample(np.exp(rng.normal(size=n)), np.ones(n, int), x)
    res = two_stage_fit(s, 0.5, np.ones(n), lam=50.0)
    assert res.penalized.active_set == ()
    assert res.refit_skipped and res.refit is None
    assert np.all(res.coefficients == 0.0)


def _sparse_sample(n, seed, rate=0.25):
    model, tmpl = sim.sparse_design(n, p=20)
    c1 = sim.calibrate_c1(model, tmpl, rate, draws=20000)
    return model, replace(tmpl, c1=c1, seed=seed)


def test_selection_at_large_n():
    model, tmpl = _sparse_sample(2000, seed=11)
    tau = sim.centering_tau("gumbel")
    hits = 0
    for l in range(20):
        s, _ = sim.generate_dataset(tmpl, model, replication=l)
        _, w = km_weights(s)
        hits += two_stage_fit(s, tau, w).penalized.active_set == model.active_set
    assert hits >= 19


def test_error_decreases_with_n():
    tau = sim.centering_tau("gumbel")
    medians = []
    for n in (250, 500, 1000):
        model, tmpl = _sparse_sample(n, seed=5)
        errs = []
        for l in range(20):
            s, _ = sim.generate_dataset(tmpl, model, replication=l)
            _, w = km_weights(s)
            errs.append(np.linalg.norm(two_stage_fit(s, tau, w).penalized.beta - model.beta0))
        medians.append(np.median(errs))
    assert medians[0] > medians[1] > medians[2]

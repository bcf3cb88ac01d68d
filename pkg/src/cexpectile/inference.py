"""Sandwich (plug-in) and bootstrap covariance for the censored expectile estimator."""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import loss
from .exceptions import CensoredExpectileError, DataError, NumericalError
from .km import Convention, Side, km_weights
from .solver import _as_weights, fit_censored_expectile


@dataclass(frozen=True)
class AsymptoticPieces:
    """Empirical sandwich ingredients.

    ``sigma_hat = S3^{-1} (S1 + S2) S3^{-1} / n`` estimates the covariance
    of the estimator itself (not of ``sqrt(n)`` times it).
    """

    s1_hat: np.ndarray
    s2_hat: np.ndarray
    s3_hat: np.ndarray
    sigma_hat: np.ndarray
    n: int

    def restrict(self, cols):
        """Sandwich for the sub-vector indexed by ``cols`` (e.g. a selected set)."""
        cols = np.asarray(cols, dtype=int)
        ix = np.ix_(cols, cols)
        s1, s2, s3 = self.s1_hat[ix], self.s2_hat[ix], self.s3_hat[ix]
        return AsymptoticPieces(s1, s2, s3, _sandwich(s1, s2, s3, self.n), self.n)


@dataclass(frozen=True)
class CovarianceEstimate:
    method: str
    cov: np.ndarray
    se: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_cov(cls, method, cov, **meta):
        cov = 0.5 * (cov + cov.T)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        return cls(method, cov, se, meta)


def _sym(a):
    return 0.5 * (a + a.T)


def _sandwich(s1, s2, s3, n):
    try:
        inv = np.linalg.inv(s3)
    except np.linalg.LinAlgError:
        raise NumericalError(
            "curvature matrix S3 is singular; add a ridge or use more data"
        ) from None
    if not np.all(np.isfinite(inv)) or np.linalg.cond(s3) > 1e14:
        raise NumericalError("curvature matrix S3 is numerically singular; add a ridge or use more data")
    return _sym(inv @ (s1 + s2) @ inv) / n


def censoring_hazard_increments(curve, floor=None):
    """Jump times of the censoring curve and the matching increments of ``-log G``.

    With ``floor`` the survival values are clipped from below first, which
    keeps the increment finite when the curve drops to zero.
    """
    vals = curve.values
    prev = np.concatenate([[1.0], vals[:-1]])
    if floor is not None:
        vals = np.maximum(vals, floor)
        prev = np.maximum(prev, floor)
    with np.errstate(divide="ignore"):
        inc = np.log(prev) - np.log(vals)
    return curve.jump_times, inc


def s2_matrix(sample, residuals, weights, tau, curve, floor=None):
    """Martingale correction ``sum_s k(s) k(s)^T / y(s) * dLambda_C(s)``.

    ``k(s) = n^-1 sum_i w_i 1{Y_i >= s} x_i g_tau(e_i)`` and
    ``y(s) = n^-1 #{Y_i >= s}``.
    """
    n, p = sample.n, sample.p
    w = _as_weights(weights)
    times, inc = censoring_hazard_increments(curve, floor)
    out = np.zeros((p, p))
    if times.size == 0:
        return out
    order = np.argsort(sample.y, kind="stable")
    ys = sample.y[order]
    contrib = (w * loss.g(tau, residuals))[order, None] * sample.x[order]
    # tail[k] = sum over sorted rows k..n-1
    tail = np.vstack([np.cumsum(contrib[::-1], axis=0)[::-1], np.zeros((1, p))])
    start = np.searchsorted(ys, times, side="left")
    at_risk = (n - start) / n
    k = tail[start] / n
    use = (at_risk > 0) & np.any(k != 0, axis=1)
    if np.any(~np.isfinite(inc[use])):
        raise NumericalError("censoring hazard diverges at a time with nonzero k(s); pass a floor")
    kk = k[use] * np.sqrt(inc[use] / at_risk[use])[:, None]
    return _sym(kk.T @ kk)


def plug_in_covariance(sample, fit, curve, weights):
    """Empirical sandwich pieces at a fitted censored expectile estimate.

    ``S1 = n^-1 sum_i w_i^2 g^2(e_i) x_i x_i^T`` (``w_i^2 = delta_i / G^2``),
    ``S3 = n^-1 sum_i w_i h(e_i) x_i x_i^T`` and ``S2`` from :func:`s2_matrix`.
    """
    tau = fit.tau
    n = sample.n
    w = _as_weights(weights)
    floor = getattr(weights, "floor", None)
    e = fit.residuals
    x = sample.x
    gi = loss.g(tau, e)
    s1 = _sym((x * ((w * gi) ** 2)[:, None]).T @ x) / n
    s3 = _sym((x * (w * loss.h(tau, e))[:, None]).T @ x) / n
    s2 = s2_matrix(sample, e, w, tau, curve, floor)
    return AsymptoticPieces(s1, s2, s3, _sandwich(s1, s2, s3, n), n)


def plug_in_estimate(pieces):
    return CovarianceEstimate.from_cov("plugin", pieces.sigma_hat)


def _bootstrap_replicate(sample, tau, seed, b, config, init, convention, floor, eval_side):
    rng = np.random.default_rng([seed, b])
    idx = rng.integers(0, sample.n, sample.n)
    boot = sample.subset(idx)
    try:
        _, w = km_weights(boot, convention, floor, eval_side)
        fit = fit_censored_expectile(boot, tau, w, config, init=init)
    except CensoredExpectileError:
        return None
    return fit.beta if fit.converged else None


def bootstrap_covariance(sample, tau, B=200, seed=0, config=None,
                         convention=Convention.CENSORING, floor=0.01,
                         eval_side=Side.LEFT_LIMIT, init=None, n_jobs=1):
    """Nonparametric bootstrap covariance of the censored expectile estimator.

    Rows ``(y_i, delta_i, x_i)`` are resampled with replacement; the
    Kaplan-Meier weights and the fit are recomputed on every replicate.
    Replicate ``b`` draws from ``default_rng([seed, b])`` so the result does
    not depend on ``n_jobs``.  Failed replicates are dropped; more than 10%
    failures raise :class:`NumericalError`.
    """
    tau = loss.check_tau(tau)
    if B < 2:
        raise ValueError("bootstrap needs B >= 2 replicates")
    if sample.n < 2 or sample.n <= sample.p:
        raise DataError(f"bootstrap needs more observations than coefficients (n={sample.n}, p={sample.p})")
    if init is None:
        _, w = km_weights(sample, convention, floor, eval_side)
        init = fit_censored_expectile(sample, tau, w, config).beta
    args = (sample, tau, seed)
    tail = (config, init, convention, floor, eval_side)
    if n_jobs == 1:
        reps = [_bootstrap_replicate(*args, b, *tail) for b in range(B)]
    else:
        from joblib import Parallel, delayed

        reps = Parallel(n_jobs=n_jobs)(
            delayed(_bootstrap_replicate)(*args, b, *tail) for b in range(B)
        )
    ok = [r for r in reps if r is not None]
    dropped = B - len(ok)
    if dropped > 0.1 * B or len(ok) < 2:
        raise NumericalError(f"{dropped} of {B} bootstrap replicates failed to fit")
    betas = np.array(ok)
    cov = np.atleast_2d(np.cov(betas, rowvar=False, ddof=1))
    return CovarianceEstimate.from_cov("bootstrap", cov, replicates=B, dropped=dropped, seed=seed)


def confidence_intervals(beta, cov, level=0.95):
    """Normal-theory intervals ``beta_j -/+ z se_j``; returns an ``(p, 2)`` array."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    beta = np.asarray(getattr(beta, "beta", beta), dtype=float)
    se = cov.se if isinstance(cov, CovarianceEstimate) else np.asarray(cov, dtype=float)
    z = norm.ppf(0.5 * (1.0 + level))
    return np.column_stack([beta - z * se, beta + z * se])


def oracle_bias_term(penalty, sample, weights, pilot, active):
    """Asymptotic bias of ``sqrt(n) (beta_hat_A - beta0_A)`` implied by the penalty.

    ``-(l0 / E[h]) E[x_A x_A^T]^{-1} (omega_A * sgn(beta_A))`` with
    ``l0 = lam / sqrt(n)`` and every expectation replaced by its IPCW sample
    average at the pilot residuals.
    """
    active = np.asarray(active, dtype=int)
    if active.size == 0:
        raise ValueError("active set must be nonempty")
    n = sample.n
    w = _as_weights(weights)
    l0 = penalty.lam / np.sqrt(n)
    mean_h = float(np.dot(w, loss.h(pilot.tau, pilot.residuals))) / n
    xa = sample.x[:, active]
    exx = xa.T @ xa / n
    omega = penalty.adaptive_weights[active].copy()
    omega[~sample.penalized_mask(penalty.penalize_intercept)[active]] = 0.0
    v = omega * np.sign(pilot.beta[active])
    return -(l0 / mean_h) * np.linalg.solve(exx, v)

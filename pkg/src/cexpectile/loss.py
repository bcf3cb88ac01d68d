"""Asymmetric squared (expectile) loss and the IPCW-weighted objective.

Sign convention: ``g`` and ``h`` are the first and second derivatives of
``rho(x - t)`` with respect to the shift ``t`` at ``t = 0``.  Hence
``g(tau, x) = -d rho / dx``.  The β-gradient of the weighted objective is
``X^T (w * g(residuals))`` because the residual ``log y - X beta`` moves
by ``-X d beta``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError


def check_tau(tau):
    """Return ``tau`` as a float, rejecting values outside the open unit interval."""
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"expectile index must lie in (0, 1), got {tau}")
    return tau


def asymmetry(tau, x):
    """``|tau - 1{x < 0}|``, i.e. ``tau`` for ``x >= 0`` and ``1 - tau`` otherwise."""
    return np.where(np.asarray(x) >= 0, tau, 1.0 - tau)


def rho(tau, x):
    """Expectile loss ``|tau - 1{x<0}| x^2``."""
    x = np.asarray(x, dtype=float)
    out = asymmetry(tau, x) * x * x
    return out if out.ndim else float(out)


def g(tau, x):
    """Shift-derivative of the loss: ``-2 tau x`` for ``x >= 0``, ``-2 (1-tau) x`` otherwise."""
    x = np.asarray(x, dtype=float)
    out = -2.0 * asymmetry(tau, x) * x
    return out if out.ndim else float(out)


def h(tau, x):
    """Second shift-derivative: ``2 tau`` for ``x >= 0``, ``2 (1-tau)`` otherwise."""
    x = np.asarray(x, dtype=float)
    out = 2.0 * asymmetry(tau, x)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WeightedObjectiveState:
    residuals: np.ndarray
    case_weights: np.ndarray
    objective: float


def _check_dims(beta, sample, weights):
    beta = np.asarray(beta, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if beta.shape != (sample.p,):
        raise DimensionMismatchError("beta", sample.p, beta.size)
    if weights.shape != (sample.n,):
        raise DimensionMismatchError("weights", sample.n, weights.size)
    return beta, weights


def residuals(beta, sample):
    return sample.log_y - sample.x @ beta


def objective(beta, sample, weights, tau):
    """Weighted expectile objective ``sum_i w_i rho_tau(log y_i - x_i^T beta)``."""
    tau = check_tau(tau)
    beta, weights = _check_dims(beta, sample, weights)
    r = residuals(beta, sample)
    value = float(np.dot(weights, rho(tau, r)))
    return WeightedObjectiveState(residuals=r, case_weights=weights, objective=value)


def gradient(beta, sample, weights, tau):
    """Analytic gradient of :func:`objective` with respect to ``beta``."""
    tau = check_tau(tau)
    beta, weights = _check_dims(beta, sample, weights)
    r = residuals(beta, sample)
    return sample.x.T @ (weights * g(tau, r))

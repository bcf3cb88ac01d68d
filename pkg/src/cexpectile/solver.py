"""Censored expectile estimator by iteratively reweighted least squares.

The IPCW objective is convex and piecewise quadratic in ``beta``; on a
fixed residual sign pattern the IRLS update is an exact Newton step, so the
iteration terminates once the sign pattern stops changing.  A step-halving
line search keeps the objective monotone when a sign flip overshoots.
"""

from dataclasses import dataclass, field

import numpy as np

from . import loss
from .exceptions import NumericalError


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 200
    ridge: float = 0.0
    max_halvings: int = 40

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    residuals: np.ndarray
    objective: float
    iterations: int
    converged: bool
    tau: float
    history: tuple = field(default=(), repr=False)

    @property
    def gradient_tolerance(self):
        return kkt_tolerance(self.beta)


def kkt_tolerance(beta, lam=0.0):
    return 1e-6 * (1.0 + float(np.linalg.norm(beta)) + lam)


def _as_weights(weights):
    return np.asarray(getattr(weights, "w", weights), dtype=float)


def check_design(sample, w, ridge):
    """Raise if the positively weighted rows cannot identify ``beta``."""
    pos = w > 0
    if ridge > 0:
        return
    if pos.sum() < sample.p:
        raise NumericalError(
            f"only {int(pos.sum())} observations carry positive weight for "
            f"{sample.p} coefficients; the data are too heavily censored"
        )
    if np.linalg.matrix_rank(sample.x[pos]) < sample.p:
        raise NumericalError("weighted design is rank deficient; set ridge > 0")


def weighted_ls(x, z, a, ridge=0.0):
    """Solve ``min sum_i a_i (z_i - x_i^T b)^2 + ridge ||b||^2``."""
    xa = x * a[:, None]
    gram = xa.T @ x
    if ridge:
        gram[np.diag_indices_from(gram)] += ridge
    try:
        return np.linalg.solve(gram, xa.T @ z)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations are singular: {exc}") from None


def _objective(x, z, w, tau, beta, ridge):
    r = z - x @ beta
    val = float(np.dot(w, loss.rho(tau, r)))
    if ridge:
        val += ridge * float(beta @ beta)
    return val, r


def fit_censored_expectile(sample, tau, weights, config=None, init=None):
    """Minimise ``sum_i w_i rho_tau(log y_i - x_i^T beta)``.

    Parameters
    ----------
    sample : SurvivalSample
    tau : float
        Expectile index in (0, 1).
    weights : IpcwWeights or array
        Case weights, typically ``delta_i / G(Y_i)``.
    config : SolverConfig, optional
    init : array, optional
        Starting value.  Defaults to the weighted least-squares fit.

    Returns
    -------
    FitResult
        ``converged`` is False if ``max_iter`` was hit before the gradient
        criterion held; no exception is raised in that case.
    """
    tau = loss.check_tau(tau)
    config = config or SolverConfig()
    w = _as_weights(weights)
    if w.shape != (sample.n,):
        raise loss.DimensionMismatchError("weights", sample.n, w.size)
    check_design(sample, w, config.ridge)
    x, z = sample.x, sample.log_y
    ridge = config.ridge

    if init is None:
        beta = weighted_ls(x, z, w, ridge)
    else:
        beta = np.array(init, dtype=float)
        if beta.shape != (sample.p,):
            raise loss.DimensionMismatchError("init", sample.p, beta.size)
    obj, r = _objective(x, z, w, tau, beta, ridge)
    history = [obj]
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        a = w * loss.asymmetry(tau, r)
        target = weighted_ls(x, z, a, ridge)
        step = target - beta
        new_obj, new_r = _objective(x, z, w, tau, target, ridge)
        s = 1.0
        halvings = 0
        while new_obj > obj and halvings < config.max_halvings:
            s *= 0.5
            halvings += 1
            cand = beta + s * step
            new_obj, new_r = _objective(x, z, w, tau, cand, ridge)
        if new_obj > obj:
            break
        beta = beta + s * step if s < 1.0 else target
        r = new_r
        decrease = obj - new_obj
        obj = new_obj
        history.append(obj)
        grad = x.T @ (w * loss.g(tau, r)) + 2.0 * ridge * beta
        if np.max(np.abs(grad)) <= kkt_tolerance(beta):
            converged = True
            break
        if decrease <= config.tol * max(abs(obj), 1e-300) and s == 1.0:
            # no progress with a full Newton step: the sign pattern is settled
            break
    if not converged:
        grad = x.T @ (w * loss.g(tau, r)) + 2.0 * ridge * beta
        converged = bool(np.max(np.abs(grad)) <= kkt_tolerance(beta))
    return FitResult(
        beta=beta, residuals=r, objective=obj, iterations=it,
        converged=converged, tau=tau, history=tuple(history),
    )


def fit_path_over_tau(sample, taus, weights, config=None):
    """Warm-started fits over a sequence of expectile indices."""
    taus = list(taus)
    if not taus:
        raise ValueError("taus must be nonempty")
    out = []
    init = None
    for tau in taus:
        fit = fit_censored_expectile(sample, tau, weights, config, init=init)
        out.append(fit)
        init = fit.beta
    return out

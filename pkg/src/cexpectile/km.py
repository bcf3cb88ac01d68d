"""Kaplan-Meier estimate of the censoring survival function and IPCW weights."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import DataError, NumericalError


class Convention(str, Enum):
    """Which indicator is used as the exponent of each product-limit factor.

    ``CENSORING`` uses ``1 - delta_i`` so that the curve estimates the
    survival function of the censoring time.  ``PAPER_LITERAL`` uses
    ``delta_i``, which estimates the survival of the failure time instead.
    """

    CENSORING = "censoring"
    PAPER_LITERAL = "paper-literal"


class Side(str, Enum):
    RIGHT = "right"
    LEFT_LIMIT = "left"


@dataclass(frozen=True)
class KaplanMeierCurve:
    jump_times: np.ndarray
    values: np.ndarray
    convention: Convention = Convention.CENSORING
    max_followup: float = None

    def __call__(self, t, side=Side.RIGHT):
        return evaluate(self, t, side)

    @property
    def jump_sizes(self):
        """Drop ``G(s-) - G(s)`` at each jump time."""
        prev = np.concatenate([[1.0], self.values[:-1]])
        return prev - self.values


@dataclass(frozen=True)
class IpcwWeights:
    w: np.ndarray
    floor: float
    max_followup: float = None

    def __array__(self, dtype=None, copy=None):
        return self.w if dtype is None else self.w.astype(dtype)


def rank_order(y, delta):
    """Stable ordering used for ranks: by time, events before censorings, then input index."""
    y = np.asarray(y, dtype=float)
    delta = np.asarray(delta)
    return np.lexsort((np.arange(y.size), 1 - delta, y))


def fit_km(sample, convention=Convention.CENSORING, max_followup=None):
    """Product-limit estimator ``prod_{i: Y_i <= t} ((n - R_i) / (n - R_i + 1))^{e_i}``.

    ``R_i`` is the rank of ``Y_i`` (ties: events first, then by input order)
    and ``e_i`` is ``1 - delta_i`` or ``delta_i`` depending on ``convention``.
    Jumps after ``max_followup`` are discarded, so the curve is constant
    beyond it.
    """
    convention = Convention(convention)
    n = sample.n
    if n == 0:
        raise DataError("cannot fit a Kaplan-Meier curve to an empty sample")
    order = rank_order(sample.y, sample.delta)
    y_sorted = sample.y[order]
    d_sorted = sample.delta[order].astype(float)
    ranks = np.arange(1, n + 1)
    expo = 1.0 - d_sorted if convention is Convention.CENSORING else d_sorted
    factors = np.where(expo > 0, (n - ranks) / (n - ranks + 1.0), 1.0)
    jumping = expo > 0
    if max_followup is not None:
        jumping &= y_sorted <= max_followup
    t_jump = y_sorted[jumping]
    if t_jump.size == 0:
        return KaplanMeierCurve(np.empty(0), np.empty(0), convention, max_followup)
    cum = np.cumprod(factors[jumping])
    # several jumping observations may share a time; keep the last cumulative value
    last_of_group = np.append(t_jump[1:] != t_jump[:-1], True)
    times = t_jump[last_of_group]
    values = cum[last_of_group]
    times.setflags(write=False)
    values.setflags(write=False)
    return KaplanMeierCurve(times, values, convention, max_followup)


def evaluate(curve, t, side=Side.RIGHT):
    """Right-continuous value (``Side.RIGHT``) or left limit of the step function at ``t``."""
    side = Side(side)
    t = np.asarray(t, dtype=float)
    if curve.jump_times.size == 0:
        out = np.ones_like(t)
    else:
        how = "right" if side is Side.RIGHT else "left"
        idx = np.searchsorted(curve.jump_times, t, side=how) - 1
        out = np.where(idx >= 0, curve.values[np.maximum(idx, 0)], 1.0)
    return out if out.ndim else float(out)


def cumulative_hazard(curve, t):
    """``-log G(t)``; raises when the curve has reached zero."""
    surv = np.asarray(evaluate(curve, t, Side.RIGHT))
    if np.any(surv <= 0):
        raise NumericalError("cumulative hazard diverges: survival estimate is 0")
    out = -np.log(surv)
    out = out + 0.0  # turn -0.0 into 0.0
    return out if out.ndim else float(out)


def ipcw_weights(sample, curve, floor=0.01, eval_side=Side.LEFT_LIMIT):
    """IPCW case weights ``delta_i / max(G(Y_i), floor)``."""
    if not 0.0 < floor < 1.0:
        raise ValueError(f"floor must lie in (0, 1), got {floor}")
    surv = np.asarray(evaluate(curve, sample.y, eval_side), dtype=float)
    w = sample.delta / np.maximum(surv, floor)
    w.setflags(write=False)
    return IpcwWeights(w=w, floor=floor, max_followup=curve.max_followup)


def km_weights(sample, convention=Convention.CENSORING, floor=0.01,
               eval_side=Side.LEFT_LIMIT, max_followup=None):
    """Fit the censoring curve and return ``(curve, weights)`` in one call."""
    curve = fit_km(sample, convention, max_followup)
    return curve, ipcw_weights(sample, curve, floor, eval_side)

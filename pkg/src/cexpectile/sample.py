from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError


@dataclass(frozen=True)
class SurvivalSample:
    """Right-censored observations ``(y_i, delta_i, x_i)``.

    Parameters
    ----------
    y : (n,) array
        Follow-up times ``min(T_i, C_i)``, strictly positive.
    delta : (n,) array of {0, 1}
        Event indicators, 1 when the failure time was observed.
    x : (n, p) array
        Covariate matrix.  When ``intercept`` is True the first column is the
        all-ones intercept column.
    names : tuple of str, optional
        Column labels for ``x``.
    """

    y: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    intercept: bool = False
    names: tuple = None
    log_y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        delta = np.asarray(self.delta)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[1] < 1:
            raise DataError("covariate matrix must be 2-D with at least one column")
        if y.size != x.shape[0] or delta.size != y.size:
            raise DataError(
                f"inconsistent lengths: y={y.size}, delta={delta.size}, x rows={x.shape[0]}"
            )
        if not np.all(np.isfinite(y)) or np.any(y <= 0):
            bad = int(np.flatnonzero(~(y > 0))[0]) if np.any(~(y > 0)) else None
            raise DataError("follow-up times must be strictly positive and finite", row=bad)
        if not np.all(np.isin(delta, (0, 1))):
            raise DataError("event indicators must be 0 or 1")
        if not np.all(np.isfinite(x)):
            raise DataError("covariates must be finite")
        if self.intercept and not np.all(x[:, 0] == 1.0):
            raise DataError("intercept=True requires an all-ones first column")
        names = self.names
        if names is None:
            names = tuple(
                ("(intercept)" if self.intercept and j == 0 else f"x{j + int(not self.intercept)}")
                for j in range(x.shape[1])
            )
        elif len(names) != x.shape[1]:
            raise DataError(f"{len(names)} names given for {x.shape[1]} columns")
        y.setflags(write=False)
        x.setflags(write=False)
        delta = delta.astype(np.int8)
        delta.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "names", tuple(names))
        log_y = np.log(y)
        log_y.setflags(write=False)
        object.__setattr__(self, "log_y", log_y)

    @property
    def n(self):
        return self.y.size

    @property
    def p(self):
        return self.x.shape[1]

    @property
    def censoring_fraction(self):
        return 1.0 - float(np.mean(self.delta))

    @classmethod
    def from_arrays(cls, y, delta, x, intercept=False, names=None):
        """Build a sample, prepending an all-ones column when ``intercept`` is True."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if intercept:
            x = np.column_stack([np.ones(x.shape[0]), x])
            if names is not None:
                names = ("(intercept)",) + tuple(names)
        return cls(y=y, delta=delta, x=x, intercept=intercept, names=names)

    def subset(self, rows):
        """Sample restricted to ``rows`` (index array or boolean mask)."""
        return SurvivalSample(
            y=self.y[rows], delta=self.delta[rows], x=self.x[rows],
            intercept=self.intercept, names=self.names,
        )

    def select_columns(self, cols):
        cols = np.asarray(cols, dtype=int)
        keep_icpt = self.intercept and cols.size > 0 and cols[0] == 0
        return SurvivalSample(
            y=self.y, delta=self.delta, x=self.x[:, cols],
            intercept=bool(keep_icpt), names=tuple(self.names[c] for c in cols),
        )

    def penalized_mask(self, penalize_intercept=False):
        """Boolean mask of the columns subject to the L1 penalty."""
        mask = np.ones(self.p, dtype=bool)
        if self.intercept and not penalize_intercept:
            mask[0] = False
        return mask

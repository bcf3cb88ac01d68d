"""CSV ingestion of right-censored survival data."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .sample import SurvivalSample

MISSING = frozenset({"", "na", "nan", "null", "none", "."})


@dataclass(frozen=True)
class DatasetSchema:
    """Which columns of a CSV file hold the time, the status and the covariates.

    Parameters
    ----------
    time_column, status_column : str
    covariate_columns : tuple of str, optional
        Ordered covariate names.  ``None`` means every column other than the
        time and status columns, in file order.
    standardize : bool
        Centre each covariate and divide by its sample SD (``ddof=1``).
    event_codes : tuple of str, optional
        Raw status values that count as an event.  When given, every other
        non-missing status value is treated as censored; when omitted the
        status column must contain only 0 and 1.
    """

    time_column: str
    status_column: str
    covariate_columns: tuple = None
    standardize: bool = True
    event_codes: tuple = None


@dataclass(frozen=True)
class LoadedData:
    sample: SurvivalSample
    n_read: int
    n_dropped: int
    center: np.ndarray
    scale: np.ndarray

    @property
    def n_used(self):
        return self.sample.n


def _is_missing(cell):
    return cell.strip().lower() in MISSING


def _parse_float(cell, line, column):
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"non-numeric value {cell!r} in column {column!r} at line {line}",
                        row=line, column=column) from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value in column {column!r} at line {line}",
                        row=line, column=column)
    return v


def standardize_columns(x):
    """Return ``(z, center, scale)`` with ``z = (x - center) / scale`` column-wise."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise DataError("standardization needs at least two rows")
    center = x.mean(axis=0)
    scale = x.std(axis=0, ddof=1)
    const = np.flatnonzero(scale == 0)
    if const.size:
        raise DataError("cannot standardize a constant column", column=int(const[0]))
    return (x - center) / scale, center, scale


def read_csv(path, schema, intercept=False):
    """Load a survival dataset, dropping incomplete rows.

    Line numbers in error messages count the header as line 1.

    Returns
    -------
    LoadedData
        The sample plus the number of rows read and dropped and the
        centring/scaling constants (zeros and ones without standardization).
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        covs = schema.covariate_columns
        if covs is None:
            covs = tuple(h for h in header if h not in (schema.time_column, schema.status_column))
        covs = tuple(covs)
        if not covs:
            raise DataError("no covariate columns selected")
        wanted = (schema.time_column, schema.status_column) + covs
        for name in wanted:
            if name not in header:
                raise DataError(f"column {name!r} not found in {path}", column=name)
        idx = [header.index(name) for name in wanted]
        events = None if schema.event_codes is None else {str(c).strip() for c in schema.event_codes}

        ys, ds, xs = [], [], []
        n_read = n_dropped = 0
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            n_read += 1
            if len(row) != len(header):
                raise DataError(f"line {line} has {len(row)} fields, header has {len(header)}", row=line)
            cells = [row[i].strip() for i in idx]
            if any(_is_missing(c) for c in cells):
                n_dropped += 1
                continue
            t = _parse_float(cells[0], line, schema.time_column)
            if t <= 0:
                raise DataError(f"nonpositive time {cells[0]} at line {line}",
                                row=line, column=schema.time_column)
            if events is None:
                s = _parse_float(cells[1], line, schema.status_column)
                if s not in (0.0, 1.0):
                    raise DataError(f"status must be 0 or 1, got {cells[1]!r} at line {line}",
                                    row=line, column=schema.status_column)
                d = int(s)
            else:
                d = int(cells[1] in events)
            ys.append(t)
            ds.append(d)
            xs.append([_parse_float(c, line, name) for c, name in zip(cells[2:], covs)])

    if not ys:
        raise DataError(f"no complete rows in {path}")
    x = np.array(xs, dtype=float)
    if schema.standardize:
        x, center, scale = standardize_columns(x)
    else:
        center, scale = np.zeros(x.shape[1]), np.ones(x.shape[1])
    sample = SurvivalSample.from_arrays(np.array(ys), np.array(ds), x, intercept=intercept, names=covs)
    return LoadedData(sample, n_read, n_dropped, center, scale)

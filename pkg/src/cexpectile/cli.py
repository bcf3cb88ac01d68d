"""Command-line drivers: ``fit``, ``simulate`` and ``km``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

import argparse
import csv
import io as _stdio
import json
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import alasso, inference, simulation
from .exceptions import DataError, NumericalError
from .io import DatasetSchema, read_csv
from .km import Convention, fit_km, ipcw_weights
from .solver import fit_censored_expectile

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _num(v):
    """JSON-safe float: non-finite values become None."""
    if v is None:
        return None
    v = float(v)
    return v if np.isfinite(v) else None


def dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------- parser

def _add_data_args(p):
    p.add_argument("data", help="input CSV file")
    p.add_argument("--time", default="time", help="follow-up time column (default: time)")
    p.add_argument("--status", default="status", help="event indicator column (default: status)")
    p.add_argument("--covariates", default=None,
                   help="comma-separated covariate columns (default: all other columns)")
    p.add_argument("--event-codes", default=None,
                   help="comma-separated status values meaning 'event' (default: 0/1 coding)")
    p.add_argument("--km-convention", choices=[c.value for c in Convention],
                   default=Convention.CENSORING.value)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cexpectile",
        description="Censored (adaptive-LASSO) expectile regression for AFT models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a censored expectile model to a CSV dataset")
    _add_data_args(f)
    f.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)
    f.add_argument("--tau", type=float, default=0.5)
    f.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="penalty level (default n^0.4)")
    f.add_argument("--gamma", type=float, default=2.0)
    f.add_argument("--penalize", action=argparse.BooleanOptionalAction, default=True)
    f.add_argument("--intercept", action=argparse.BooleanOptionalAction, default=True)
    f.add_argument("--se", choices=["plugin", "bootstrap"], default="plugin")
    f.add_argument("--boot-reps", type=int, default=200)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--g-floor", type=float, default=0.01)
    f.add_argument("--level", type=float, default=0.95)
    f.add_argument("--out", default=None, help="write the JSON report here")
    f.add_argument("--threads", type=int, default=1)

    s = sub.add_parser("simulate", help="run a Monte Carlo study")
    s.add_argument("--design", choices=["sparse", "two-covariate"], default="sparse")
    s.add_argument("--n", type=int, nargs="+", default=[400])
    s.add_argument("--p", type=int, default=None, help="covariates (default 50; two-covariate uses 2)")
    s.add_argument("--error", choices=["gumbel", "shifted-uniform"], default="gumbel")
    s.add_argument("--censoring-rate", type=float, default=0.25)
    s.add_argument("--lambda-rule", default="n-0.4",
                   help="sqrt-n, n-0.4 or fixed:<value>")
    s.add_argument("--gamma", type=float, default=2.0)
    s.add_argument("--methods", default="expectile", help="comma-separated: expectile,ls")
    s.add_argument("--intercept-mode", choices=["with", "without"], default="without")
    s.add_argument("--penalize", action=argparse.BooleanOptionalAction, default=None,
                   help="default: on for the sparse design, off for two-covariate")
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output prefix; writes <out>.csv and <out>.json")
    s.add_argument("--threads", type=int, default=1)

    k = sub.add_parser("km", help="export the Kaplan-Meier censoring curve as CSV")
    _add_data_args(k)
    k.add_argument("--out", default=None, help="output CSV (default: stdout)")
    return parser


# ---------------------------------------------------------------- fit

def _schema(args, standardize):
    covs = None if args.covariates is None else tuple(c.strip() for c in args.covariates.split(","))
    codes = None if args.event_codes is None else tuple(args.event_codes.split(","))
    return DatasetSchema(args.time, args.status, covs, standardize, codes)


def run_fit(args):
    if not 0.0 < args.tau < 1.0:
        raise UsageError("--tau must lie in (0, 1)")
    if not 0.0 < args.level < 1.0:
        raise UsageError("--level must lie in (0, 1)")
    if not 0.0 < args.g_floor < 1.0:
        raise UsageError("--g-floor must lie in (0, 1)")
    if args.lam is not None and args.lam < 0:
        raise UsageError("--lambda must be nonnegative")
    if args.gamma <= 0:
        raise UsageError("--gamma must be positive")
    if args.boot_reps < 2:
        raise UsageError("--boot-reps must be at least 2")

    data = read_csv(args.data, _schema(args, args.standardize), intercept=args.intercept)
    sample = data.sample
    curve = fit_km(sample, args.km_convention)
    w = ipcw_weights(sample, curve, args.g_floor)
    pilot = fit_censored_expectile(sample, args.tau, w)
    lam = None
    kkt = None
    if args.penalize:
        two = alasso.two_stage_fit(sample, args.tau, w, gamma=args.gamma, lam=args.lam)
        lam = two.penalized.penalty.lam
        kkt = two.penalized.kkt_max_violation
        cols = list(two.refit_columns)
        refit = two.refit
    else:
        cols = list(range(sample.p))
        refit = pilot

    names = list(sample.names)
    selected = [names[j] for j in cols if not (sample.intercept and j == 0)]
    coefs, ses, cis = {}, {}, {}
    if cols:
        sub = sample.select_columns(cols)
        if args.se == "plugin":
            cov = inference.plug_in_estimate(inference.plug_in_covariance(sub, refit, curve, w))
        else:
            cov = inference.bootstrap_covariance(
                sub, args.tau, B=args.boot_reps, seed=args.seed,
                convention=args.km_convention, floor=args.g_floor,
                init=refit.beta, n_jobs=args.threads,
            )
        ci = inference.confidence_intervals(refit.beta, cov, args.level)
        for k, j in enumerate(cols):
            coefs[names[j]] = _num(refit.beta[k])
            ses[names[j]] = _num(cov.se[k])
            cis[names[j]] = [_num(ci[k, 0]), _num(ci[k, 1])]

    results = {
        "selected_variables": selected,
        "empty_selection": not selected,
        "coefficients": coefs,
        "standard_errors": ses,
        "confidence_intervals": cis,
        "pilot_coefficients": {nm: _num(b) for nm, b in zip(names, pilot.beta)},
        "se_method": args.se,
        "level": args.level,
        "tau": args.tau,
        "lambda": _num(lam),
        "gamma": args.gamma if args.penalize else None,
        "kkt_max_violation": _num(kkt),
        "n_used": data.n_used,
        "n_dropped": data.n_dropped,
        "censoring_fraction": sample.censoring_fraction,
    }
    report = {"schema_version": SCHEMA_VERSION, "command": "fit",
              "flags": _flags(args), "results": results}
    if args.out:
        write_atomic(args.out, dumps(report))
    sys.stdout.write(_fit_table(results))
    return EXIT_OK


def _fit_table(r):
    lines = [
        f"n used {r['n_used']}, dropped {r['n_dropped']}, censored {100 * r['censoring_fraction']:.1f}%",
        f"tau {r['tau']}" + ("" if r["lambda"] is None else f", lambda {r['lambda']:.4g}, gamma {r['gamma']}"),
    ]
    if r["empty_selection"]:
        lines.append("no covariate selected")
    pct = int(round(100 * r["level"]))
    lines.append(f"{'variable':<16}{'estimate':>12}{'se':>12}{f'{pct}% lower':>12}{f'{pct}% upper':>12}")
    for name, b in r["coefficients"].items():
        lo, hi = r["confidence_intervals"][name]
        lines.append(f"{name:<16}{b:>12.4f}{r['standard_errors'][name]:>12.4f}{lo:>12.4f}{hi:>12.4f}")
    return "\n".join(lines) + "\n"


def _flags(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out", "threads")}


# ---------------------------------------------------------------- simulate

METRICS = ("pct_true_zeros", "pct_false_zeros", "l2_error", "sd_active", "sd_within",
           "l2_sd", "excluded")


def _check_simulate(args):
    if any(n < 2 for n in args.n):
        raise UsageError("--n values must be at least 2")
    if args.design == "two-covariate":
        if args.p not in (None, 2):
            raise UsageError("the two-covariate design has exactly two covariates")
        args.p = 2
    elif args.p is None:
        args.p = 50
    if args.p < 1:
        raise UsageError("--p must be at least 1")
    if not 0.0 < args.censoring_rate < 1.0:
        raise UsageError("--censoring-rate must lie in (0, 1)")
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    if args.gamma <= 0:
        raise UsageError("--gamma must be positive")
    try:
        simulation.lambda_value(args.lambda_rule, 1)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    methods = tuple(m.strip() for m in args.methods.split(","))
    bad = [m for m in methods if m not in simulation.METHOD_TAU]
    if bad or not methods:
        raise UsageError(f"unknown method(s): {', '.join(bad)}")
    return methods


def run_simulate(args):
    methods = _check_simulate(args)
    penalize = (args.design == "sparse") if args.penalize is None else args.penalize
    reports = []
    for n in args.n:
        if args.design == "two-covariate":
            model, template = simulation.two_covariate_design(n)
            template = replace(template, error_dist=simulation.ErrorDist(args.error))
        else:
            model, template = simulation.sparse_design(n, args.p, simulation.ErrorDist(args.error))
        rep = simulation.run_study(
            model, template, methods=methods, penalized=penalize, M=args.reps,
            lambda_rule=args.lambda_rule, gamma=args.gamma,
            intercept_mode=args.intercept_mode, seed=args.seed,
            censoring_target=args.censoring_rate, n_jobs=args.threads,
        )
        reports.append(rep)

    rows = []
    for rep in reports:
        for m in methods:
            summ = rep[m]
            for metric in METRICS:
                rows.append([m, rep.n, rep.p, _fmt(args.censoring_rate), args.lambda_rule,
                             metric, _fmt(getattr(summ, metric)), rep.M, args.seed])
    header = ["method", "n", "p", "rate", "lambda_rule", "metric", "value", "reps", "seed"]
    payload = {
        "schema_version": SCHEMA_VERSION, "command": "simulate",
        "flags": _flags(args) | {"penalize": penalize},
        "results": {"studies": [_study_json(r) for r in reports]},
    }
    write_atomic(args.out + ".csv", _csv_text(header, rows))
    write_atomic(args.out + ".json", dumps(payload))
    sys.stdout.write(_csv_text(header, rows))
    return EXIT_OK


def _study_json(rep):
    d = rep.to_dict()
    for m in d["methods"].values():
        for k, v in m.items():
            if isinstance(v, float):
                m[k] = _num(v)
    d["c1"] = _num(d["c1"])
    d["lambda"] = _num(d["lambda"])
    return d


# ---------------------------------------------------------------- km

def km_rows(sample, curve):
    rows = [[0.0, 1.0]]
    rows += [[float(t), float(v)] for t, v in zip(curve.jump_times, curve.values)]
    last = float(curve.values[-1]) if curve.values.size else 1.0
    rows.append([float(sample.y.max()), last])
    return rows


def run_km(args):
    data = read_csv(args.data, _schema(args, False))
    curve = fit_km(data.sample, args.km_convention)
    text = _csv_text(["time", "survival"], [[_fmt(a), _fmt(b)] for a, b in km_rows(data.sample, curve)])
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- entry

COMMANDS = {"fit": run_fit, "simulate": run_simulate, "km": run_km}


def _error(kind, exc, code, **extra):
    payload = {"schema_version": SCHEMA_VERSION,
               "error": {"type": kind, "message": str(exc), **extra}}
    sys.stderr.write(dumps(payload))
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _error("usage", exc, EXIT_USAGE)
    except (DataError, FileNotFoundError, UnicodeDecodeError) as exc:
        return _error("data", exc, EXIT_DATA,
                      row=getattr(exc, "row", None), column=getattr(exc, "column", None))
    except NumericalError as exc:
        return _error("numerical", exc, EXIT_NUMERICAL)
    except ValueError as exc:
        return _error("usage", exc, EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())

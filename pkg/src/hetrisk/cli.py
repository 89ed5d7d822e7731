"""hetrisk command line: synth, build, optimize, backtest, verify.

Exit status: 0 when every output was written and every run-level check
passed, 1 when a check failed or a computation could not finish, 2 for
unreadable or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import audit_holdings, run_horserace, write_reports
from .config import backtest_config, parse_overrides, read_pairs
from .errors import (
    HetRiskError,
    HierarchyError,
    InvalidConfig,
    InvalidPanel,
    InvalidPrices,
    InvalidSpec,
)
from .factor_model import FactorModel
from .heterotic import build_heterotic_model
from .hierarchy import IndustryHierarchy
from .optimizer import optimize_bounded, optimize_unbounded
from .pc import QUANTILE_COLUMNS, build_pc_model, select_num_factors
from .prices import PricePanel, compute_returns
from .stats import ReturnsPanel, sample_covariance
from .synth import SynthSpec, generate_synthetic_panel

INPUT_ERRORS = (OSError, InvalidConfig, InvalidSpec, InvalidPrices, HierarchyError, InvalidPanel)
VERIFY_TOL = {"recompose": 1e-10, "inverse": 1e-8, "total_variance": 1e-10}


class CommandFailed(Exception):
    """A run-level check failed after the outputs were written."""


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        if flag < 1:
            raise InvalidConfig("--threads must be positive")
        return flag
    env = os.environ.get("HETRISK_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise InvalidConfig(f"HETRISK_THREADS={env!r} is not an integer") from None
        if value < 1:
            raise InvalidConfig("HETRISK_THREADS must be positive")
        return value
    return os.cpu_count() or 1


def _returns_panel(prices: PricePanel, lookback: int | None, end: str | None) -> ReturnsPanel:
    series = compute_returns(prices)
    stop = len(series.dates)
    if end is not None:
        if end not in series.dates:
            raise InvalidConfig(f"--end {end} is not a return date of the price file")
        stop = series.dates.index(end) + 1
    first = 0 if lookback is None else stop - lookback
    if first < 0:
        raise InvalidConfig(f"only {stop} return dates available, --lookback {lookback}")
    return ReturnsPanel(series.tickers, series.dates[first:stop], series.close_to_close[:, first:stop])


def cmd_synth(args) -> None:
    values = read_pairs(args.spec) if args.spec else {}
    values.update(parse_overrides(args.set or []))
    if args.seed is not None:
        values["seed"] = str(args.seed)
    spec = SynthSpec.from_mapping(values)
    data = generate_synthetic_panel(spec)
    for path in data.write(args.out):
        print(path)


def _spec_variance_rows(model: FactorModel, panel: ReturnsPanel) -> list[list]:
    variances = sample_covariance(panel.subset(model.tickers)).variances
    ratio = model.spec_risk ** 2 / variances
    q1, med, q3 = np.quantile(ratio, [0.25, 0.5, 0.75])
    return [[model.n_factors, ratio.min(), q1, med, ratio.mean(), q3, ratio.max()]]


def cmd_build(args) -> None:
    prices = PricePanel.from_csv(args.prices)
    panel = _returns_panel(prices, args.lookback, args.end)
    if args.kind == "pc":
        model = build_pc_model(panel, use_correlation=not args.covariance, k_override=args.k)
        header = list(QUANTILE_COLUMNS) + ["chosen"]
        if panel.n_obs >= 3:
            selection = select_num_factors(panel, use_correlation=not args.covariance)
            rows = [list(r) + [int(r[0] == model.meta["k"])] for r in selection.table()]
        else:
            rows = []
    else:
        if not args.hierarchy:
            raise InvalidConfig("--hierarchy is required for --kind heterotic")
        hierarchy = IndustryHierarchy.from_csv(args.hierarchy)
        model = build_heterotic_model(panel, hierarchy, market_factor=args.market_factor,
                                      drop_singletons=args.drop_singletons)
        header = list(QUANTILE_COLUMNS[:-1])
        rows = _spec_variance_rows(model, panel)
    meta = dict(model.meta, window=[panel.dates[0], panel.dates[-1]])
    model = FactorModel(model.tickers, model.spec_risk, model.fac_load, model.fac_cov,
                        model.cov_mat, model.inv_cov, meta)
    model.save(args.out)
    print(args.out)
    diag = args.diagnostics or str(Path(args.out).with_suffix("")) + "_diagnostics.csv"
    with open(diag, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    print(diag)


def _read_vector_csv(path, tickers) -> np.ndarray:
    values = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "ticker" or len(header) != 2:
            raise InvalidConfig(f"{path}: header must be ticker,<value>")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values[row[0].strip()] = float(row[1])
            except (IndexError, ValueError):
                raise InvalidConfig(f"{path}: malformed row {lineno}: {row}") from None
    missing = [t for t in tickers if t not in values]
    if missing:
        raise InvalidConfig(f"{path}: no value for tickers {missing[:5]}")
    return np.array([values[t] for t in tickers])


def _read_matrix_csv(path, tickers) -> np.ndarray:
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "ticker" or len(header) < 2:
            raise InvalidConfig(f"{path}: header must be ticker,<column>,...")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows[row[0].strip()] = [float(x) for x in row[1:]]
            except ValueError:
                raise InvalidConfig(f"{path}: malformed row {lineno}") from None
            if len(rows[row[0].strip()]) != len(header) - 1:
                raise InvalidConfig(f"{path}: row {lineno} has the wrong number of columns")
    missing = [t for t in tickers if t not in rows]
    if missing:
        raise InvalidConfig(f"{path}: no row for tickers {missing[:5]}")
    return np.array([rows[t] for t in tickers])


def cmd_optimize(args) -> None:
    model = FactorModel.load(args.model)
    if model.inv_cov is None:
        raise InvalidConfig(f"{args.model} has no inverse (singular model)")
    alpha = _read_vector_csv(args.alpha, model.tickers)
    n = alpha.size
    if args.constraints is None and args.bound is None:
        result = optimize_unbounded(alpha, model.inv_cov, investment=args.investment)
    else:
        y = np.ones((n, 1))
        if args.constraints:
            y = np.hstack([y, _read_matrix_csv(args.constraints, model.tickers)])
        upper = np.inf if args.bound is None else args.bound
        result = optimize_bounded(alpha, y, model.inv_cov, upper, -upper,
                                  prec=args.prec, tol=args.tol, max_outer=args.max_outer,
                                  investment=args.investment)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ticker", "weight", "holding"])
        for t, w, h in zip(model.tickers, result.weights, result.holdings):
            writer.writerow([t, repr(float(w)), repr(float(h))])
    print(args.out)


def cmd_backtest(args, threads: int) -> None:
    values = read_pairs(args.config) if args.config else {}
    values.update(parse_overrides(args.set or []))
    for key, flag in (("bound_fraction", args.bounds), ("prec", args.prec), ("tol", args.tol),
                      ("max_outer", args.max_outer)):
        if flag is not None:
            values[key] = str(flag)
    config = backtest_config(values)
    prices = PricePanel.from_csv(args.prices)
    hierarchy = IndustryHierarchy.from_csv(args.hierarchy) if args.hierarchy else None
    reports = run_horserace(prices, hierarchy, config, threads=threads)
    for path in write_reports(reports, args.out, holdings=args.holdings):
        print(path)
    failures = []
    for variant, rep in reports.items():
        audit = audit_holdings(rep)
        if audit.max_net > 1e-8 or audit.max_gross_error > max(config.prec, 1e-8) \
                or audit.bound_violations:
            failures.append(f"{variant}: {audit}")
    if failures:
        raise CommandFailed("holdings audit failed: " + "; ".join(failures))


def verify_model(model: FactorModel, prices: PricePanel | None = None) -> dict[str, dict]:
    """Invariant checks of a stored model: name -> {value, limit, ok}."""
    checks = {}
    gamma = model.cov_mat
    scale = np.abs(gamma).max()
    rec = np.abs(model.recompose() - gamma).max() / scale
    checks["recompose"] = (rec, VERIFY_TOL["recompose"])
    checks["symmetry"] = (np.abs(gamma - gamma.T).max() / scale, 1e-12)
    min_eig = float(np.linalg.eigvalsh(gamma)[0])
    checks["min_eigenvalue"] = (min_eig, 0.0)
    if model.inv_cov is not None:
        checks["inverse"] = (np.abs(gamma @ model.inv_cov - np.eye(model.n_tickers)).max(),
                             VERIFY_TOL["inverse"])
    if prices is not None:
        window = model.meta.get("window")
        series = compute_returns(prices, model.tickers)
        if window:
            lo, hi = series.dates.index(window[0]), series.dates.index(window[1]) + 1
        else:
            lo, hi = 0, len(series.dates)
        panel = ReturnsPanel(series.tickers, series.dates[lo:hi], series.close_to_close[:, lo:hi])
        var = sample_covariance(panel).variances
        checks["total_variance"] = (np.abs(np.diag(gamma) - var).max() / var.min(),
                                    VERIFY_TOL["total_variance"])
    out = {}
    for name, (value, limit) in checks.items():
        ok = value > limit if name == "min_eigenvalue" else value < limit
        if name == "min_eigenvalue" and model.meta.get("singular"):
            ok = True  # K = M principal-component models are singular by construction
        out[name] = {"value": float(value), "limit": limit, "ok": bool(ok)}
    return out


def cmd_verify(args) -> None:
    model = FactorModel.load(args.model)
    prices = PricePanel.from_csv(args.prices) if args.prices else None
    try:
        results = verify_model(model, prices)
    except ValueError as exc:
        raise InvalidConfig(f"model window does not match the price file: {exc}") from None
    print(json.dumps(results, indent=1, sort_keys=True))
    bad = [name for name, r in results.items() if not r["ok"]]
    if bad:
        raise CommandFailed("failed checks: " + ", ".join(bad))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetrisk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hetrisk {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $HETRISK_THREADS, else all cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic price panel and hierarchy")
    p.add_argument("--spec", help="key = value spec file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a spec key")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("build", help="build a risk model from a price file")
    p.add_argument("--kind", choices=("pc", "heterotic"), required=True)
    p.add_argument("--prices", required=True)
    p.add_argument("--hierarchy")
    p.add_argument("--lookback", type=int, help="number of close-to-close returns (default: all)")
    p.add_argument("--end", help="last return date of the window (default: last date)")
    p.add_argument("--k", type=int, help="principal components (default: g(K) heuristic)")
    p.add_argument("--covariance", action="store_true",
                   help="principal components of the covariance instead of the correlation")
    p.add_argument("--market-factor", action="store_true")
    p.add_argument("--drop-singletons", action="store_true")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--diagnostics", help="diagnostics CSV path (default: next to the model)")

    p = sub.add_parser("optimize", help="Sharpe-optimal holdings for an alpha file")
    p.add_argument("--model", required=True)
    p.add_argument("--alpha", required=True, help="CSV ticker,alpha (overnight returns)")
    p.add_argument("--constraints", help="CSV ticker,<loading columns> for extra neutrality")
    p.add_argument("--bound", type=float, help="|weight| cap as a fraction of the investment")
    p.add_argument("--investment", type=float, default=1.0)
    _tolerance_flags(p, defaults=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("backtest", help="run the optimization-vs-regression horse race")
    p.add_argument("--prices", required=True)
    p.add_argument("--hierarchy")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--bounds", type=float, help="liquidity bound as a fraction of ADDV")
    p.add_argument("--holdings", action="store_true", help="also write daily holdings CSVs")
    _tolerance_flags(p, defaults=False)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("verify", help="check the invariants of a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--prices", help="price file to check the total-variance condition against")
    return parser


def _tolerance_flags(p, defaults: bool) -> None:
    p.add_argument("--prec", type=float, default=1e-5 if defaults else None,
                   help="gross-weight tolerance of the bounded optimizer (1e-5)")
    p.add_argument("--tol", type=float, default=1e-6 if defaults else None,
                   help="bound tolerance of the reference inner loop (1e-6)")
    p.add_argument("--max-outer", type=int, default=100 if defaults else None,
                   help="outer iteration cap (100)")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = resolve_threads(args.threads)
        if args.command == "synth":
            cmd_synth(args)
        elif args.command == "build":
            cmd_build(args)
        elif args.command == "optimize":
            cmd_optimize(args)
        elif args.command == "backtest":
            cmd_backtest(args, threads)
        else:
            cmd_verify(args)
    except CommandFailed as exc:
        print(f"hetrisk: {exc}", file=sys.stderr)
        return 1
    except INPUT_ERRORS as exc:
        print(f"hetrisk: {exc}", file=sys.stderr)
        return 2
    except (HetRiskError, ValueError) as exc:
        print(f"hetrisk: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Optimization-vs-regression horse race on an intraday overnight-reversal alpha.

Dates are indexed in ascending order here; date t's alpha is the overnight
return E_t = ln(AO_t / AC_{t-1}), the position is opened at the open of t
and closed at its close.  Everything that feeds the position (universe,
regression weights, risk models, loadings, liquidity bounds) uses only
close-to-close returns and volumes of dates t - d, ..., t - 1.  In the
reverse labelling where s = 0 is the latest date, that is the window
s + 1, ..., s + d.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import (
    HetRiskError,
    HierarchyMismatch,
    InsufficientHistory,
    InvalidConfig,
    ZeroAlpha,
    ZeroTradedShares,
    ZeroVariancePnl,
)
from .heterotic import build_heterotic_model, heterotic_loadings
from .hierarchy import IndustryHierarchy
from .optimizer import optimize_bounded, optimize_unbounded, regression_holdings
from .pc import build_pc_model, principal_loadings
from .prices import PricePanel, _log_returns, _require_finite, average_dollar_volume
from .stats import ReturnsPanel, sample_covariance

PC_REGRESSION = "pc_regression"
INDUSTRY_REGRESSION = "industry_regression"
HETEROTIC_REGRESSION = "heterotic_regression"
PC_OPTIMIZATION = "pc_optimization"
HETEROTIC_OPTIMIZATION = "heterotic_optimization"
VARIANTS = (
    PC_REGRESSION,
    INDUSTRY_REGRESSION,
    HETEROTIC_REGRESSION,
    PC_OPTIMIZATION,
    HETEROTIC_OPTIMIZATION,
)
TRADING_DAYS = 252


@dataclass(frozen=True)
class BacktestConfig:
    """Horse-race settings.

    ``start`` is the index of the first traded date (default: the first
    date with ``lookback + 1`` prior prices) and ``days`` caps the number
    of traded dates.  ``bound_fraction`` switches on the liquidity bounds
    |H_i| <= bound_fraction * ADDV_i.
    """

    lookback: int = 21
    universe_size: int = 2000
    rebalance_period: int = 21
    investment: float = 2e7
    bound_fraction: float | None = None
    market_factor: bool = False
    daily_loadings: bool = True
    variants: tuple[str, ...] = VARIANTS
    prec: float = 1e-5
    tol: float = 1e-6
    max_outer: int = 100
    start: int | None = None
    days: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple(self.variants))
        if int(self.lookback) != self.lookback or self.lookback < 2:
            raise InvalidConfig(f"lookback must be an integer >= 2, got {self.lookback}")
        if int(self.rebalance_period) != self.rebalance_period or self.rebalance_period < 1:
            raise InvalidConfig("rebalance_period must be a positive integer")
        if int(self.universe_size) != self.universe_size or self.universe_size < 3:
            raise InvalidConfig("universe_size must be an integer >= 3")
        if not self.investment > 0 or not math.isfinite(self.investment):
            raise InvalidConfig("investment must be positive")
        if self.bound_fraction is not None and not 0 < self.bound_fraction <= 1:
            raise InvalidConfig("bound_fraction must lie in (0, 1]")
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown or not self.variants or len(set(self.variants)) != len(self.variants):
            raise InvalidConfig(f"variants must be distinct names from {VARIANTS}, got {self.variants}")
        if not (0 < self.prec < 1 and 0 < self.tol < 1) or self.max_outer < 1:
            raise InvalidConfig("prec and tol must lie in (0, 1); max_outer must be positive")
        if self.start is not None and self.start < self.lookback + 1:
            raise InvalidConfig(f"start must be at least lookback + 1 = {self.lookback + 1}")
        if self.days is not None and self.days < 1:
            raise InvalidConfig("days must be positive")

    def replace(self, **changes) -> "BacktestConfig":
        return BacktestConfig(**{**asdict(self), **changes})

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class DailyHoldings:
    date: str
    tickers: tuple[str, ...]
    holdings: np.ndarray  # dollars
    bound: np.ndarray | None = None  # dollar cap on |holdings|


@dataclass(frozen=True)
class Metrics:
    roc: float
    sharpe: float
    cps: float


@dataclass(frozen=True)
class BacktestReport:
    variant: str
    dates: tuple[str, ...]
    daily_pnl: np.ndarray
    shares_traded: np.ndarray
    holdings: tuple[DailyHoldings, ...]
    investment: float

    @property
    def summary(self) -> Metrics:
        return compute_metrics(self.daily_pnl, self.shares_traded, self.investment, strict=False)

    @property
    def universe_size(self) -> int:
        return max((len(h.tickers) for h in self.holdings), default=0)


def compute_metrics(daily_pnl, shares_traded, investment: float, strict: bool = True) -> Metrics:
    """ROC = 252 mean(P&L)/I, SR = sqrt(252) mean/sd, CPS = 100 sum(P&L)/sum(shares).

    With ``strict`` a zero-variance P&L or zero traded shares raises;
    otherwise the undefined metric is NaN.
    """
    pnl = np.asarray(daily_pnl, dtype=float)
    shares = np.asarray(shares_traded, dtype=float)
    if pnl.size == 0 or pnl.shape != shares.shape:
        raise ValueError("need matching, nonempty P&L and share series")
    roc = TRADING_DAYS * pnl.mean() / investment
    sd = pnl.std(ddof=1) if pnl.size > 1 else 0.0
    if sd > 1e-12 * max(np.abs(pnl).max(), 1e-300):
        sharpe = math.sqrt(TRADING_DAYS) * pnl.mean() / sd
    elif strict:
        raise ZeroVariancePnl("daily P&L has zero variance; the Sharpe ratio is undefined")
    else:
        sharpe = math.nan
    total_shares = shares.sum()
    if total_shares > 0:
        cps = 100.0 * pnl.sum() / total_shares
    elif strict:
        raise ZeroTradedShares("no shares traded")
    else:
        cps = math.nan
    return Metrics(float(roc), float(sharpe), float(cps))


def select_universe(prices: PricePanel, date_index: int, config: BacktestConfig,
                    candidates: Sequence[str] | None = None) -> tuple[str, ...]:
    """Top ``universe_size`` tickers by ADDV over the ``lookback`` dates before ``date_index``.

    Only tickers with complete prices over those dates and the one before
    them qualify, so the lookback returns exist.  Ties keep panel order;
    the result is listed in panel order.
    """
    d = config.lookback
    if date_index < d + 1:
        raise InsufficientHistory(
            f"date {date_index} needs {d + 1} prior dates of prices for a {d}-day lookback"
        )
    addv = average_dollar_volume(prices, date_index, d)
    complete = np.isfinite(prices.close[:, date_index - d - 1:date_index]).all(axis=1)
    eligible = complete & np.isfinite(addv)
    if candidates is not None:
        eligible &= np.isin(np.arange(prices.n_tickers), prices.rows(candidates))
    idx = np.flatnonzero(eligible)
    if idx.size < 3:
        raise InsufficientHistory(f"only {idx.size} tickers have complete history before date {date_index}")
    order = idx[np.argsort(-addv[idx], kind="stable")]
    chosen = np.sort(order[:config.universe_size])
    return tuple(prices.tickers[i] for i in chosen)


@dataclass
class _Interval:
    rows: np.ndarray
    tickers: tuple[str, ...]
    weights: np.ndarray  # z = 1 / C_ii
    hierarchy: IndustryHierarchy | None
    industry_load: np.ndarray | None
    pc_load: np.ndarray | None
    het_load: np.ndarray | None
    pc_inv: np.ndarray | None
    het_inv: np.ndarray | None


class _Engine:
    def __init__(self, prices: PricePanel, hierarchy: IndustryHierarchy | None,
                 config: BacktestConfig):
        self.prices = prices
        self.hierarchy = hierarchy
        self.config = config
        self.e, self.r = _log_returns(prices)
        needs_hier = {INDUSTRY_REGRESSION, HETEROTIC_REGRESSION, HETEROTIC_OPTIMIZATION}
        if needs_hier & set(config.variants) and hierarchy is None:
            raise HierarchyMismatch("the industry and heterotic variants need a hierarchy")

    def lookback_panel(self, rows: np.ndarray, tickers, t: int) -> ReturnsPanel:
        d = self.config.lookback
        values = self.r[rows, t - d:t]
        dates = self.prices.dates[t - d:t]
        _require_finite(values, tickers, dates, "lookback returns")
        return ReturnsPanel(tickers, dates, values)

    def interval(self, t0: int) -> _Interval:
        cfg = self.config
        candidates = None if self.hierarchy is None else self.hierarchy.tickers
        tickers = select_universe(self.prices, t0, cfg, candidates)
        rows = self.prices.rows(tickers)
        panel = self.lookback_panel(rows, tickers, t0)
        weights = 1.0 / sample_covariance(panel).variances
        variants = set(cfg.variants)
        hier = industry = None
        if self.hierarchy is not None:
            hier = self.hierarchy.restrict(tickers)
            industry = hier.ticker_membership(0)
        pc_inv = het_inv = pc_load = het_load = None
        if PC_OPTIMIZATION in variants:
            pc_inv = build_pc_model(panel).inv_cov
        if HETEROTIC_OPTIMIZATION in variants:
            het_inv = build_heterotic_model(panel, hier, market_factor=cfg.market_factor).inv_cov
        if not cfg.daily_loadings:
            if PC_REGRESSION in variants:
                pc_load = self._pc_loadings(panel)
            if HETEROTIC_REGRESSION in variants:
                het_load = heterotic_loadings(panel, hier)
        return _Interval(rows, tickers, weights, hier, industry, pc_load, het_load, pc_inv, het_inv)

    @staticmethod
    def _pc_loadings(panel: ReturnsPanel) -> np.ndarray:
        # K_PC = M, capped so that loadings plus intercept stay below N columns
        k = min(panel.n_obs - 1, panel.n_tickers - 2)
        return principal_loadings(panel, k)

    def day(self, iv: _Interval, t: int) -> dict[str, tuple[np.ndarray, np.ndarray | None]]:
        cfg = self.config
        alpha = self.e[iv.rows, t]
        _require_finite(alpha[:, None], iv.tickers, self.prices.dates[t:t + 1], "overnight returns")
        n = alpha.size
        variants = cfg.variants
        pc_load, het_load = iv.pc_load, iv.het_load
        if cfg.daily_loadings and {PC_REGRESSION, HETEROTIC_REGRESSION} & set(variants):
            panel = self.lookback_panel(iv.rows, iv.tickers, t)
            if PC_REGRESSION in variants:
                pc_load = self._pc_loadings(panel)
            if HETEROTIC_REGRESSION in variants:
                het_load = heterotic_loadings(panel, iv.hierarchy)

        bound = upper = None
        if cfg.bound_fraction is not None:
            bound = cfg.bound_fraction * average_dollar_volume(self.prices, t, cfg.lookback)[iv.rows]
            upper = bound / cfg.investment
        ones = np.ones((n, 1))
        out = {}
        for variant in variants:
            try:
                if variant == PC_REGRESSION:
                    w = self._regression(alpha, np.hstack([ones, pc_load]), iv.weights, upper)
                elif variant == INDUSTRY_REGRESSION:
                    w = self._regression(alpha, iv.industry_load, iv.weights, upper)
                elif variant == HETEROTIC_REGRESSION:
                    w = self._regression(alpha, np.hstack([ones, het_load]), iv.weights, upper)
                else:
                    inv = iv.pc_inv if variant == PC_OPTIMIZATION else iv.het_inv
                    w = self._optimization(alpha, inv, upper)
            except ZeroAlpha:
                w = np.zeros(n)
            except HetRiskError as exc:
                raise type(exc)(f"{self.prices.dates[t]} {variant}: {exc}") from exc
            out[variant] = (w * cfg.investment, bound)
        return out

    def _regression(self, alpha, load, z, upper):
        if upper is None:
            return regression_holdings(alpha, load, z).weights
        return self._bounded(alpha, load, z, upper)

    def _optimization(self, alpha, inv, upper):
        if upper is None:
            return optimize_unbounded(alpha, inv).weights
        return self._bounded(alpha, np.ones((alpha.size, 1)), inv, upper)

    def _bounded(self, alpha, load, inv, upper):
        cfg = self.config
        return optimize_bounded(alpha, load, inv, upper, -upper, prec=cfg.prec, tol=cfg.tol,
                                max_outer=cfg.max_outer).weights


def _schedule(n_dates: int, config: BacktestConfig) -> list[range]:
    first = config.lookback + 1 if config.start is None else config.start
    last = n_dates if config.days is None else min(n_dates, first + config.days)
    if first >= last:
        raise InsufficientHistory(
            f"no tradable dates: first traded index {first}, panel has {n_dates} dates"
        )
    step = config.rebalance_period
    return [range(t0, min(t0 + step, last)) for t0 in range(first, last, step)]


def run_horserace(prices: PricePanel, hierarchy: IndustryHierarchy | None,
                  config: BacktestConfig = BacktestConfig(), threads: int = 1
                  ) -> dict[str, BacktestReport]:
    """Daily P&L, traded shares and holdings for every configured variant.

    Each rebalance interval shares one universe, one set of regression
    weights and one pair of risk models; within an interval dates run on
    up to ``threads`` worker threads.  Results do not depend on ``threads``.
    """
    engine = _Engine(prices, hierarchy, config)
    per_day = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for dates in _schedule(prices.n_dates, config):
            try:
                iv = engine.interval(dates[0])
            except HetRiskError as exc:
                raise type(exc)(f"{prices.dates[dates[0]]} (rebalance): {exc}") from exc
            results = (pool.map(lambda t: engine.day(iv, t), dates) if pool
                       else (engine.day(iv, t) for t in dates))
            for t, res in zip(dates, results):
                per_day.append((t, iv.tickers, iv.rows, res))
    finally:
        if pool:
            pool.shutdown()

    reports = {}
    for variant in config.variants:
        pnl, shares, held = [], [], []
        for t, tickers, rows, res in per_day:
            h, bound = res[variant]
            p_open = prices.open[rows, t]
            p_close = prices.close[rows, t]
            _require_finite(p_close[:, None], tickers, prices.dates[t:t + 1], "fills")
            pnl.append(float(np.sum(h * (p_close / p_open - 1.0))))
            shares.append(float(np.sum(2.0 * np.abs(h) / p_open)))
            held.append(DailyHoldings(prices.dates[t], tickers, h, bound))
        reports[variant] = BacktestReport(
            variant=variant,
            dates=tuple(prices.dates[t] for t, *_ in per_day),
            daily_pnl=np.array(pnl),
            shares_traded=np.array(shares),
            holdings=tuple(held),
            investment=config.investment,
        )
    return reports


@dataclass(frozen=True)
class HoldingsAudit:
    max_net: float  # max_s |sum_i H_is| / I
    max_gross_error: float  # max_s |sum_i |H_is| / I - 1| over days with a position
    bound_violations: int
    flat_days: int


def audit_holdings(report: BacktestReport, slack: float = 1e-9) -> HoldingsAudit:
    """Neutrality, gross exposure and liquidity-bound checks over every day."""
    inv = report.investment
    net, gross, violations, flat = 0.0, 0.0, 0, 0
    for day in report.holdings:
        h = day.holdings
        total = np.abs(h).sum()
        if total == 0:
            flat += 1
            continue
        net = max(net, abs(h.sum()) / inv)
        gross = max(gross, abs(total / inv - 1.0))
        if day.bound is not None:
            violations += int(np.sum(np.abs(h) > day.bound + slack * inv))
    return HoldingsAudit(net, gross, violations, flat)


def _fmt(x: float) -> str:
    return repr(float(x))


def report_summary(report: BacktestReport) -> dict[str, Any]:
    m = report.summary
    clean = lambda v: None if math.isnan(v) else v  # noqa: E731
    return {
        "variant": report.variant,
        "roc": clean(m.roc),
        "sharpe": clean(m.sharpe),
        "cps": clean(m.cps),
        "days": len(report.dates),
        "universe_size": report.universe_size,
    }


def write_reports(reports: dict[str, BacktestReport], outdir, holdings: bool = False) -> list[Path]:
    """``<variant>_pnl.csv`` per variant plus ``summary.json``; optional holdings CSVs."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for variant, rep in reports.items():
        path = outdir / f"{variant}_pnl.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["date", "pnl", "shares_traded", "gross", "net", "names"])
            for d, p, q, day in zip(rep.dates, rep.daily_pnl, rep.shares_traded, rep.holdings):
                h = day.holdings
                writer.writerow([d, _fmt(p), _fmt(q), _fmt(np.abs(h).sum()), _fmt(h.sum()), len(h)])
        written.append(path)
        if holdings:
            path = outdir / f"{variant}_holdings.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["date", "ticker", "holding", "bound"])
                for day in rep.holdings:
                    for i, t in enumerate(day.tickers):
                        b = "" if day.bound is None else _fmt(day.bound[i])
                        writer.writerow([day.date, t, _fmt(day.holdings[i]), b])
            written.append(path)
    path = outdir / "summary.json"
    doc = [report_summary(rep) for rep in reports.values()]
    path.write_text(json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    written.append(path)
    return written

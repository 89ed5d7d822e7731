"""Daily open/close prices, split-adjusted prices and share volumes.

Arrays are ticker x date with dates in ascending order.  A missing
(ticker, date) observation is NaN in every field.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InsufficientHistory, InvalidPrices, MissingPrice

PRICE_FIELDS = ("open", "close", "adj_open", "adj_close", "volume")
CSV_HEADER = ("ticker", "date", *PRICE_FIELDS)
SPLIT_RATIO_TOL = 1e-6


@dataclass(frozen=True)
class PricePanel:
    tickers: tuple[str, ...]
    dates: tuple[str, ...]
    open: np.ndarray = field(repr=False)
    close: np.ndarray = field(repr=False)
    adj_open: np.ndarray = field(repr=False)
    adj_close: np.ndarray = field(repr=False)
    volume: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(str(t) for t in self.tickers))
        object.__setattr__(self, "dates", tuple(str(d) for d in self.dates))
        shape = (len(self.tickers), len(self.dates))
        if len(set(self.tickers)) != shape[0]:
            raise InvalidPrices("duplicate tickers in price panel")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise InvalidPrices("dates must be strictly increasing")
        arrays = {}
        for name in PRICE_FIELDS:
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != shape:
                raise InvalidPrices(f"{name} has shape {a.shape}, expected {shape}")
            a.setflags(write=False)
            arrays[name] = a
            object.__setattr__(self, name, a)

        missing = np.isnan(arrays["close"])
        for name, a in arrays.items():
            if not np.array_equal(np.isnan(a), missing):
                i, s = np.argwhere(np.isnan(a) != missing)[0]
                raise InvalidPrices(f"{self.tickers[i]} {self.dates[s]}: {name} is partially missing")
            bad = ~missing & ~(np.isfinite(a) & ((a >= 0) if name == "volume" else (a > 0)))
            if bad.any():
                i, s = np.argwhere(bad)[0]
                raise InvalidPrices(f"{self.tickers[i]} {self.dates[s]}: invalid {name} {a[i, s]!r}")
        with np.errstate(invalid="ignore"):
            f_open = arrays["adj_open"] / arrays["open"]
            f_close = arrays["adj_close"] / arrays["close"]
            off = np.abs(f_open - f_close) > SPLIT_RATIO_TOL * f_close
        if off.any():
            i, s = np.argwhere(off)[0]
            raise InvalidPrices(
                f"{self.tickers[i]} {self.dates[s]}: adjustment factors of open and close differ"
            )

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    def rows(self, tickers: Sequence[str]) -> np.ndarray:
        index = {t: i for i, t in enumerate(self.tickers)}
        try:
            return np.array([index[t] for t in tickers], dtype=int)
        except KeyError as exc:
            raise InvalidPrices(f"ticker {exc.args[0]} not in price panel") from None

    def to_csv(self, path) -> None:
        """Long format, one row per ticker and date, ticker-major."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            cols = [getattr(self, name) for name in PRICE_FIELDS]
            for i, t in enumerate(self.tickers):
                for s, d in enumerate(self.dates):
                    if np.isnan(cols[1][i, s]):
                        continue
                    writer.writerow([t, d, *(repr(float(c[i, s])) for c in cols)])

    @classmethod
    def from_csv(cls, path) -> "PricePanel":
        """Read the long format; tickers keep first-appearance order, dates are sorted."""
        path = Path(path)
        records = {}
        tickers, dates = {}, set()
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = tuple(h.strip() for h in next(reader))
            except StopIteration:
                raise InvalidPrices(f"{path}: empty price file") from None
            if header != CSV_HEADER:
                raise InvalidPrices(f"{path}: header must be {','.join(CSV_HEADER)}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(CSV_HEADER):
                    raise InvalidPrices(f"{path}: malformed row {lineno}: {row}")
                t, d = row[0].strip(), row[1].strip()
                try:
                    values = [float(x) for x in row[2:]]
                except ValueError:
                    raise InvalidPrices(f"{path}: non-numeric value in row {lineno}") from None
                if (t, d) in records:
                    raise InvalidPrices(f"{path}: duplicate ticker/date {t} {d} in row {lineno}")
                records[(t, d)] = values
                tickers.setdefault(t, len(tickers))
                dates.add(d)
        if not records:
            raise InvalidPrices(f"{path}: no price rows")
        dates = sorted(dates)
        col = {d: s for s, d in enumerate(dates)}
        data = np.full((len(PRICE_FIELDS), len(tickers), len(dates)), np.nan)
        for (t, d), values in records.items():
            data[:, tickers[t], col[d]] = values
        try:
            return cls(tuple(tickers), tuple(dates), *data)
        except InvalidPrices as exc:
            raise InvalidPrices(f"{path}: {exc}") from None


@dataclass(frozen=True)
class ReturnSeries:
    """Overnight E and close-to-close R on ``dates``; column s uses dates s and s - 1."""

    tickers: tuple[str, ...]
    dates: tuple[str, ...]
    overnight: np.ndarray
    close_to_close: np.ndarray


def _log_returns(prices: PricePanel) -> tuple[np.ndarray, np.ndarray]:
    """E and R aligned with the price dates; column 0 and gaps are NaN."""
    prev = np.full(prices.adj_close.shape, np.nan)
    prev[:, 1:] = prices.adj_close[:, :-1]
    return np.log(prices.adj_open / prev), np.log(prices.adj_close / prev)


def _require_finite(values: np.ndarray, tickers, dates, what: str) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        i, s = np.argwhere(bad)[0]
        raise MissingPrice(f"{what}: no price data for {tickers[i]} on or before {dates[s]}")


def compute_returns(prices: PricePanel, tickers: Sequence[str] | None = None) -> ReturnSeries:
    """E = ln(AO_s / AC_{s-1}) and R = ln(AC_s / AC_{s-1}) from adjusted prices.

    Returns cover every date but the first.  Any gap in the requested rows
    raises MissingPrice.
    """
    if prices.n_dates < 2:
        raise InsufficientHistory("need at least two dates to form returns")
    rows = np.arange(prices.n_tickers) if tickers is None else prices.rows(tickers)
    e, r = _log_returns(prices)
    e, r = e[rows, 1:], r[rows, 1:]
    names = tuple(prices.tickers[i] for i in rows)
    _require_finite(r, names, prices.dates[1:], "returns")
    return ReturnSeries(names, prices.dates[1:], e, r)


def average_dollar_volume(prices: PricePanel, date_index: int, lookback: int) -> np.ndarray:
    """A_i = mean of V * P^C over the ``lookback`` dates strictly before ``date_index``.

    NaN for tickers with a gap in that window.
    """
    if lookback < 1:
        raise ValueError("lookback must be positive")
    if date_index < lookback or date_index > prices.n_dates:
        raise InsufficientHistory(
            f"date index {date_index} has fewer than {lookback} prior dates"
        )
    window = slice(date_index - lookback, date_index)
    return (prices.volume[:, window] * prices.close[:, window]).mean(axis=1)

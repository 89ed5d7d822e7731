"""Synthetic price panels with a nested industry structure and a planted overnight reversal.

Standardized daily shocks are a sum of market, sector, industry,
sub-industry and idiosyncratic normals.  The correlation "ladder" gives
the total correlation of two tickers that share (at most) the market, a
sector, an industry or a sub-industry.  Each ticker draws an overnight
shock o and an intraday innovation eta with that correlation structure;
the intraday return is -kappa * o + eta, so overnight moves partially
reverse during the day.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import InvalidSpec
from .hierarchy import IndustryHierarchy
from .prices import PricePanel


@dataclass(frozen=True)
class SynthSpec:
    n_tickers: int = 100
    days: int = 300
    n_sectors: int = 3
    n_industries: int = 6
    n_sub_industries: int = 20
    n_singletons: int = 0
    market_corr: float = 0.10
    sector_corr: float = 0.20
    industry_corr: float = 0.30
    sub_industry_corr: float = 0.45
    vol_median: float = 0.02
    vol_dispersion: float = 0.4
    overnight_share: float = 0.3
    reversal: float = 0.15
    price_median: float = 30.0
    price_dispersion: float = 0.8
    dollar_volume_median: float = 2e7
    dollar_volume_dispersion: float = 1.0
    volume_noise: float = 0.3
    split_probability: float = 0.1
    start_date: str = "2020-01-02"
    seed: int = 0

    def __post_init__(self):
        for name in ("n_tickers", "days", "n_sectors", "n_industries", "n_sub_industries",
                     "n_singletons", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise InvalidSpec(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.days < 2:
            raise InvalidSpec(f"days must be at least 2, got {self.days}")
        if not 1 <= self.n_sectors <= self.n_industries <= self.n_sub_industries <= self.n_tickers:
            raise InvalidSpec(
                "cluster counts must nest: 1 <= sectors <= industries <= sub_industries <= tickers"
            )
        if not 0 <= self.n_singletons <= self.n_sub_industries:
            raise InvalidSpec("n_singletons must lie in [0, n_sub_industries]")
        pairs = self.n_sub_industries - self.n_singletons
        if self.n_singletons + 2 * pairs > self.n_tickers:
            raise InvalidSpec(
                f"{self.n_tickers} tickers cannot fill {pairs} multi-ticker and "
                f"{self.n_singletons} single-ticker sub-industries"
            )
        if self.n_singletons == self.n_sub_industries and self.n_tickers != self.n_singletons:
            raise InvalidSpec("every sub-industry is a singleton but tickers are left over")
        ladder = (0.0, self.market_corr, self.sector_corr, self.industry_corr, self.sub_industry_corr)
        if any(b < a for a, b in zip(ladder, ladder[1:])) or self.sub_industry_corr >= 1:
            raise InvalidSpec("need 0 <= market <= sector <= industry <= sub_industry corr < 1")
        for name in ("vol_median", "price_median", "dollar_volume_median"):
            if not getattr(self, name) > 0:
                raise InvalidSpec(f"{name} must be positive")
        for name in ("vol_dispersion", "price_dispersion", "dollar_volume_dispersion",
                     "volume_noise", "reversal"):
            if not getattr(self, name) >= 0:
                raise InvalidSpec(f"{name} must be non-negative")
        if not 0 < self.overnight_share < 1:
            raise InvalidSpec("overnight_share must lie in (0, 1)")
        if not 0 <= self.split_probability <= 1:
            raise InvalidSpec("split_probability must lie in [0, 1]")
        try:
            np.datetime64(self.start_date, "D")
        except ValueError:
            raise InvalidSpec(f"bad start_date {self.start_date!r}") from None

    @classmethod
    def from_mapping(cls, values: dict) -> "SynthSpec":
        known = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise InvalidSpec(f"unknown spec keys: {', '.join(unknown)}")
        defaults = asdict(cls())
        typed = {}
        for key, raw in values.items():
            kind = type(defaults[key])
            try:
                typed[key] = kind(raw) if kind is not int else int(str(raw), 10)
            except ValueError:
                raise InvalidSpec(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None
        return cls(**typed)


@dataclass(frozen=True)
class SyntheticData:
    prices: PricePanel
    hierarchy: IndustryHierarchy
    spec: SynthSpec

    def write(self, outdir) -> tuple[Path, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        prices, hier = outdir / "prices.csv", outdir / "hierarchy.csv"
        self.prices.to_csv(prices)
        self.hierarchy.to_csv(hier)
        return prices, hier


def _assign(rng: np.random.Generator, n_children: int, n_parents: int) -> np.ndarray:
    """Parent of each child: every parent gets at least one child."""
    parent = np.concatenate([np.arange(n_parents), rng.integers(0, n_parents, n_children - n_parents)])
    return np.sort(parent)


def _ticker_subs(rng: np.random.Generator, spec: SynthSpec) -> np.ndarray:
    k, single = spec.n_sub_industries, spec.n_singletons
    multi = np.arange(single, k)
    sub = [np.arange(single)]
    if multi.size:
        sub.append(np.repeat(multi, 2))
        extra = spec.n_tickers - single - 2 * multi.size
        sub.append(rng.choice(multi, size=extra))
    return np.sort(np.concatenate(sub))


def _business_days(start: str, n: int) -> list[str]:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return [str(d) for d in np.busday_offset(first, np.arange(n))]


def generate_synthetic_panel(spec: SynthSpec) -> SyntheticData:
    """Deterministic synthetic prices and hierarchy for ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    n, days = spec.n_tickers, spec.days

    ind_sector = _assign(rng, spec.n_industries, spec.n_sectors)
    sub_ind = _assign(rng, spec.n_sub_industries, spec.n_industries)
    ticker_sub = _ticker_subs(rng, spec)
    ticker_ind = sub_ind[ticker_sub]
    ticker_sec = ind_sector[ticker_ind]

    ladder = np.array([spec.market_corr, spec.sector_corr, spec.industry_corr,
                       spec.sub_industry_corr, 1.0])
    loads = np.sqrt(np.diff(np.concatenate([[0.0], ladder])))

    def shocks():
        # standardized shocks with the configured correlation ladder, n x days
        x = loads[0] * rng.standard_normal(days)[None, :]
        x = x + loads[1] * rng.standard_normal((spec.n_sectors, days))[ticker_sec]
        x = x + loads[2] * rng.standard_normal((spec.n_industries, days))[ticker_ind]
        x = x + loads[3] * rng.standard_normal((spec.n_sub_industries, days))[ticker_sub]
        return x + loads[4] * rng.standard_normal((n, days))

    vol = spec.vol_median * np.exp(spec.vol_dispersion * rng.standard_normal(n))
    overnight = shocks() * (vol * np.sqrt(spec.overnight_share))[:, None]
    innovation = shocks() * (vol * np.sqrt(1.0 - spec.overnight_share))[:, None]
    intraday = -spec.reversal * overnight + innovation
    overnight[:, 0] = 0.0  # the first date has no previous close

    log_close = np.log(spec.price_median) + spec.price_dispersion * rng.standard_normal(n)
    log_adj_close = log_close[:, None] + np.cumsum(overnight + intraday, axis=1)
    log_adj_open = log_adj_close - intraday

    # 2:1 splits: before the split date unadjusted prices are twice the adjusted ones
    factor = np.ones((n, days))
    has_split = rng.random(n) < spec.split_probability
    split_day = rng.integers(1, days, n) if days > 1 else np.ones(n, dtype=int)
    for i in np.flatnonzero(has_split):
        factor[i, :split_day[i]] = 0.5
    adj_close = np.exp(log_adj_close)
    adj_open = np.exp(log_adj_open)
    close = adj_close / factor
    open_ = adj_open / factor

    dollar = spec.dollar_volume_median * np.exp(spec.dollar_volume_dispersion * rng.standard_normal(n))
    daily = dollar[:, None] * np.exp(spec.volume_noise * rng.standard_normal((n, days)))
    volume = np.round(daily / close)

    width = max(4, len(str(n)))
    tickers = tuple(f"T{i:0{width}d}" for i in range(n))
    prices = PricePanel(tickers, tuple(_business_days(spec.start_date, days)),
                        open_, close, adj_open, adj_close, volume)
    columns = [
        [f"SUB{c + 1:03d}" for c in ticker_sub],
        [f"IND{c + 1:03d}" for c in ticker_ind],
        [f"SEC{c + 1:02d}" for c in ticker_sec],
    ]
    hierarchy = IndustryHierarchy.from_assignments(tickers, columns)
    return SyntheticData(prices, hierarchy, spec)

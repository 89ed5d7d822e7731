from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

import acceptance_log
from hetrisk.config import backtest_config, read_pairs
from hetrisk.hierarchy import IndustryHierarchy
from hetrisk.prices import PricePanel
from hetrisk.stats import ReturnsPanel

DATA = Path(__file__).parent / "data"


def random_panel(rng: np.random.Generator, n: int, t: int, factors: int = 3) -> ReturnsPanel:
    """Returns with a few common factors and lognormal volatilities."""
    f = rng.standard_normal((factors, t))
    load = rng.normal(0.0, 0.6, (n, factors))
    x = load @ f + rng.standard_normal((n, t))
    x *= np.exp(rng.normal(-4.0, 0.5, n))[:, None]
    return ReturnsPanel.from_array(x)


def panel_with_correlation(cor, t: int, rng: np.random.Generator, vols=None) -> ReturnsPanel:
    """Panel whose sample correlation equals ``cor`` to round-off (needs t > n)."""
    cor = np.asarray(cor, dtype=float)
    n = cor.shape[0]
    z = rng.standard_normal((t, n))
    z -= z.mean(axis=0)
    q, _ = np.linalg.qr(z)
    values, vectors = np.linalg.eigh(cor)
    root = vectors * np.sqrt(np.clip(values, 0.0, None))
    x = root @ q.T * np.sqrt(t - 1)
    if vols is not None:
        x = x * np.asarray(vols, dtype=float)[:, None]
    return ReturnsPanel.from_array(x)


def random_hierarchy(rng: np.random.Generator, tickers, n_top_max: int,
                     singletons: int = 0) -> IndustryHierarchy:
    """Three nested levels with counts K >= F >= L; ``singletons`` single-ticker sub-industries."""
    n = len(tickers)
    singletons = min(singletons, n - 2) if n > 2 else 0
    rest = n - singletons
    k_multi = int(rng.integers(1, max(rest // 2, 1) + 1))
    sub = list(range(singletons))
    multi = np.arange(singletons, singletons + k_multi)
    extra = rest - 2 * k_multi
    sub += list(np.repeat(multi, 2)) + list(rng.choice(multi, size=extra))
    sub = np.array(rng.permutation(sub))
    k = singletons + k_multi
    f = int(rng.integers(1, k + 1))
    sub_ind = np.concatenate([np.arange(f), rng.integers(0, f, k - f)])
    l_top = int(rng.integers(1, max(1, min(f, n_top_max)) + 1))
    ind_sec = np.concatenate([np.arange(l_top), rng.integers(0, l_top, f - l_top)])
    cols = [
        [f"s{c:03d}" for c in sub],
        [f"i{sub_ind[c]:03d}" for c in sub],
        [f"g{ind_sec[sub_ind[c]]:02d}" for c in sub],
    ]
    return IndustryHierarchy.from_assignments(tickers, cols)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def shipped():
    """The committed synthetic fixture: prices, hierarchy and its backtest config."""
    return (
        PricePanel.from_csv(DATA / "prices.csv"),
        IndustryHierarchy.from_csv(DATA / "hierarchy.csv"),
        backtest_config(read_pairs(DATA / "fixture_backtest.cfg")),
    )


def pytest_terminal_summary(terminalreporter):
    lines = acceptance_log.summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

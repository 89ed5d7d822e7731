"""Sample moments and symmetric eigendecompositions used by every model builder.

Covariances use the unbiased divisor ``M`` for ``M + 1`` observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateRow,
    InvalidPanel,
    MissingData,
    NotPositiveSemidefinite,
    NotSymmetric,
    ZeroVariance,
)

COVARIANCE_DIVISOR = "M"  # recorded in model metadata
DEGENERATE_CORRELATION_TOL = 1e-12
NEGATIVE_EIGEN_TOL = 1e-10
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class ReturnsPanel:
    """N tickers by M+1 dates of (log-)returns.

    Only the set of observations matters to every builder; date order is
    carried along for bookkeeping.
    """

    tickers: tuple[str, ...]
    dates: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        object.__setattr__(self, "tickers", tuple(str(t) for t in self.tickers))
        object.__setattr__(self, "dates", tuple(str(d) for d in self.dates))
        if values.ndim != 2:
            raise InvalidPanel(f"returns must be a 2-d array, got shape {values.shape}")
        n, t = values.shape
        if n < 2 or t < 2:
            raise InvalidPanel(f"need at least 2 tickers and 2 dates, got {n}x{t}")
        if len(self.tickers) != n or len(self.dates) != t:
            raise InvalidPanel("ticker/date labels do not match the value matrix")
        if len(set(self.tickers)) != n:
            raise InvalidPanel("duplicate tickers in panel")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise MissingData(
                f"missing return for {self.tickers[bad[0]]} on {self.dates[bad[1]]}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, tickers: Sequence[str] | None = None,
                   dates: Sequence[str] | None = None) -> "ReturnsPanel":
        values = np.asarray(values, dtype=float)
        n, t = values.shape
        if tickers is None:
            tickers = [f"T{i:04d}" for i in range(n)]
        if dates is None:
            dates = [f"D{s:04d}" for s in range(t)]
        return cls(tuple(tickers), tuple(dates), values)

    @property
    def n_tickers(self) -> int:
        return self.values.shape[0]

    @property
    def n_obs(self) -> int:
        """M + 1."""
        return self.values.shape[1]

    def subset(self, tickers: Sequence[str]) -> "ReturnsPanel":
        index = {t: i for i, t in enumerate(self.tickers)}
        rows = [index[t] for t in tickers]
        return ReturnsPanel(tuple(tickers), self.dates, self.values[rows])

    def standardized(self) -> "ReturnsPanel":
        """Each row divided by its sample standard deviation."""
        sd = np.sqrt(sample_covariance(self).variances)
        return ReturnsPanel(self.tickers, self.dates, self.values / sd[:, None])


@dataclass(frozen=True)
class CovarianceResult:
    cov: np.ndarray
    variances: np.ndarray
    cor: np.ndarray


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs sorted by decreasing eigenvalue, columns orthonormal."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def correlation_from_covariance(cov: np.ndarray) -> np.ndarray:
    sd = np.sqrt(np.diag(cov))
    cor = cov / sd[:, None] / sd[None, :]
    np.fill_diagonal(cor, 1.0)
    return cor


def sample_covariance(panel: ReturnsPanel) -> CovarianceResult:
    """Unbiased sample covariance and correlation of the panel rows.

    Raises ZeroVariance for a constant row and DegenerateRow when two rows
    are 100% (anti-)correlated.
    """
    x = panel.values
    centered = x - x.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / (x.shape[1] - 1)
    cov = 0.5 * (cov + cov.T)
    variances = np.diag(cov).copy()

    constant = np.ptp(x, axis=1) == 0
    scale = np.maximum(np.abs(x).max(axis=1), 1e-300)
    constant |= variances <= (1e-15 * scale) ** 2
    if constant.any():
        i = int(np.flatnonzero(constant)[0])
        raise ZeroVariance(f"ticker {panel.tickers[i]} has a constant return series")

    cor = correlation_from_covariance(cov)
    off = np.abs(cor) - np.eye(len(cor)) * 2.0
    if off.max() >= 1.0 - DEGENERATE_CORRELATION_TOL:
        i, j = np.unravel_index(np.argmax(off), off.shape)
        raise DegenerateRow(
            f"tickers {panel.tickers[i]} and {panel.tickers[j]} are perfectly correlated"
        )
    np.clip(cor, -1.0, 1.0, out=cor)
    return CovarianceResult(cov=cov, variances=variances, cor=cor)


def normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude is positive.

    Near-ties in magnitude are resolved in favour of the lowest row index.
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.size == 0:
        return vectors
    mags = np.abs(vectors)
    top = mags.max(axis=0)
    pivot = np.argmax(mags >= top * (1.0 - 1e-9), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eigen(mat) -> EigenSystem:
    """Eigendecomposition of a symmetric positive semi-definite matrix.

    Eigenvalues come back in decreasing order with round-off negatives
    clamped to zero; each eigenvector has its largest-magnitude entry
    positive.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {mat.shape}")
    scale = max(np.abs(mat).max(), 1e-300)
    if np.abs(mat - mat.T).max() > SYMMETRY_TOL * scale:
        raise NotSymmetric("matrix is not symmetric")
    values, vectors = np.linalg.eigh(0.5 * (mat + mat.T))
    values = values[::-1]
    vectors = vectors[:, ::-1]
    floor = NEGATIVE_EIGEN_TOL * max(1.0, abs(values[0]))
    if values[-1] < -floor:
        raise NotPositiveSemidefinite(f"eigenvalue {values[-1]:.3g} is negative")
    values = np.maximum(values, 0.0)
    return EigenSystem(eigenvalues=values, eigenvectors=normalize_signs(vectors))


def top_eigenpairs(centered: np.ndarray, k: int) -> EigenSystem:
    """Leading eigenpairs of ``centered @ centered.T / (T - 1)`` via thin SVD.

    ``centered`` holds N rows of demeaned observations.  Only the first
    ``min(k, T - 1)`` pairs are returned; the rest of the spectrum vanishes.
    """
    n, t = centered.shape
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    k = min(k, t - 1, n)
    return EigenSystem(
        eigenvalues=s[:k] ** 2 / (t - 1),
        eigenvectors=normalize_signs(u[:, :k]),
    )

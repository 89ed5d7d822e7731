"""Statistical risk model from principal components of the sample correlation matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, TooFewObservations
from .factor_model import FactorModel, factor_model_inverse
from .stats import COVARIANCE_DIVISOR, ReturnsPanel, sample_covariance, top_eigenpairs

QUANTILE_COLUMNS = ("k", "min", "q1", "median", "mean", "q3", "max", "g")


@dataclass(frozen=True)
class FactorCountSelection:
    """Outcome of the g(K) scan.

    ``g`` and ``quantiles`` cover every k in 1..k_max even though the
    selection itself stops at the first increase of |g(k) - 1|.
    """

    k: int
    ks: np.ndarray
    g: np.ndarray
    quantiles: np.ndarray  # rows: k; cols: min, q1, median, mean, q3, max of spec var ratio
    full_scan_k: int

    def table(self) -> list[tuple]:
        """Rows of (k, min, q1, median, mean, q3, max, g)."""
        return [
            (int(k), *map(float, q), float(g))
            for k, q, g in zip(self.ks, self.quantiles, self.g)
        ]


def _spectrum(panel: ReturnsPanel, use_correlation: bool):
    x = panel.values
    centered = x - x.mean(axis=1, keepdims=True)
    variances = sample_covariance(panel).variances
    if use_correlation:
        centered = centered / np.sqrt(variances)[:, None]
        total = np.ones_like(variances)
    else:
        total = variances
    eig = top_eigenpairs(centered, panel.n_obs - 1)
    return eig, total, variances


def _max_factors(panel: ReturnsPanel) -> int:
    m = panel.n_obs - 1
    if m < 2:
        raise TooFewObservations(f"need M >= 2 (at least 3 observations), got M = {m}")
    return min(m, panel.n_tickers) - 1


def _spec_ratio(eig, total, k):
    load = eig.eigenvectors[:, :k] * np.sqrt(eig.eigenvalues[:k])
    spec = total - np.einsum("ij,ij->i", load, load)
    return np.maximum(spec, 0.0) / total


def principal_loadings(panel: ReturnsPanel, k: int | None = None) -> np.ndarray:
    """sqrt(C_ii) sqrt(lambda_A) V_iA for the top ``k`` components of the correlation matrix.

    ``k`` defaults to M, the number of nonvanishing eigenvalues.
    """
    eig, _, variances = _spectrum(panel, True)
    k = eig.eigenvalues.size if k is None else min(int(k), eig.eigenvalues.size)
    if k < 1:
        raise ValueError("need at least one principal component")
    load = eig.eigenvectors[:, :k] * np.sqrt(eig.eigenvalues[:k])
    return np.sqrt(variances)[:, None] * load


def select_num_factors(panel: ReturnsPanel, use_correlation: bool = True) -> FactorCountSelection:
    """Fix K by bringing g(K) = sqrt(min xi~^2) + sqrt(max xi~^2) closest to 1.

    The scan over k = 1, 2, ... stops as soon as |g(k) - 1| increases and
    returns the last k before the increase.
    """
    k_max = _max_factors(panel)
    eig, total, _ = _spectrum(panel, use_correlation)
    ks = np.arange(1, k_max + 1)
    g = np.empty(k_max)
    quantiles = np.empty((k_max, 6))
    for idx, k in enumerate(ks):
        z = _spec_ratio(eig, total, k)
        g[idx] = np.sqrt(z.min()) + np.sqrt(z.max())
        q1, med, q3 = np.quantile(z, [0.25, 0.5, 0.75])
        quantiles[idx] = (z.min(), q1, med, z.mean(), q3, z.max())

    dist = np.abs(g - 1.0)
    chosen = 1
    for idx in range(1, k_max):
        if dist[idx] > dist[idx - 1]:
            break
        chosen = idx + 1
    return FactorCountSelection(
        k=chosen, ks=ks, g=g, quantiles=quantiles, full_scan_k=int(np.argmin(dist)) + 1
    )


def build_pc_model(panel: ReturnsPanel, use_correlation: bool = True,
                   k_override: int | None = None) -> FactorModel:
    """Principal-component factor model with unit factor covariance.

    Loadings are sqrt(lambda_A) V_A of the correlation matrix (rescaled by
    the sample volatilities) or of the covariance matrix when
    ``use_correlation`` is False.  Specific variances make every model
    variance equal the sample variance.  With ``k_override == M`` the model
    reproduces the sample matrix, is singular and carries no inverse.
    """
    m = panel.n_obs - 1
    if m < 2:
        raise TooFewObservations(f"need M >= 2 (at least 3 observations), got M = {m}")
    eig, total, variances = _spectrum(panel, use_correlation)
    if k_override is None:
        selection = select_num_factors(panel, use_correlation)
        k = selection.k
    else:
        k = int(k_override)
        if not 1 <= k <= min(m, panel.n_tickers):
            raise ValueError(f"k_override must lie in [1, {min(m, panel.n_tickers)}], got {k}")

    load = eig.eigenvectors[:, :k] * np.sqrt(eig.eigenvalues[:k])
    factor_var = np.einsum("ij,ij->i", load, load)
    spec_var = np.maximum(total - factor_var, 0.0)
    singular = k >= min(m, panel.n_tickers)
    if singular:
        spec_var[:] = 0.0
        inv = None
    else:
        inv = factor_model_inverse(np.sqrt(spec_var), load, np.eye(k))

    cov = load @ load.T
    cov[np.diag_indices_from(cov)] = total
    if use_correlation:
        tr = np.sqrt(variances)
        spec_risk = tr * np.sqrt(spec_var)
        load = tr[:, None] * load
        cov = cov * tr[:, None] * tr[None, :]
        cov[np.diag_indices_from(cov)] = variances
        if inv is not None:
            inv = inv / tr[:, None] / tr[None, :]
    else:
        spec_risk = np.sqrt(spec_var)

    meta = {
        "kind": "pc",
        "k": k,
        "use_correlation": bool(use_correlation),
        "k_override": None if k_override is None else int(k_override),
        "n_obs": panel.n_obs,
        "covariance_divisor": COVARIANCE_DIVISOR,
        "singular": singular,
    }
    return FactorModel(
        tickers=panel.tickers, spec_risk=spec_risk, fac_load=load, fac_cov=np.eye(k),
        cov_mat=cov, inv_cov=inv, meta=meta,
    )


def total_variance_matrix(loadings, cor) -> np.ndarray:
    """T = 2 Q Psi Q^T - Q Psi - Psi Q^T with Q the projector onto ``loadings``."""
    load = np.atleast_2d(np.asarray(loadings, dtype=float))
    cor = np.asarray(cor, dtype=float)
    if load.shape[0] != cor.shape[0]:
        raise DimensionMismatch(f"loadings {load.shape} vs correlation {cor.shape}")
    coef = np.linalg.lstsq(load, np.eye(load.shape[0]), rcond=None)[0]
    q = load @ coef
    q = 0.5 * (q + q.T)
    q_cor = q @ cor
    return 2.0 * q_cor @ q.T - q_cor - cor @ q.T


@dataclass(frozen=True)
class TotalVarianceCheck:
    max_abs_diag: float
    trace: float
    max_rel_variance_error: float


def verify_total_variance(model: FactorModel, panel: ReturnsPanel) -> TotalVarianceCheck:
    """Diagnostics of the in-sample total-variance conditions for ``model``.

    The loadings are first rescaled by the sample volatilities, so the
    check runs on the correlation-matrix form of the regression.
    """
    if not set(model.tickers) <= set(panel.tickers):
        raise DimensionMismatch("model tickers are not a subset of the panel tickers")
    panel = panel.subset(model.tickers)
    stats = sample_covariance(panel)
    if model.fac_load.shape[0] != panel.n_tickers:
        raise DimensionMismatch("loadings do not match the panel")
    tr = np.sqrt(stats.variances)
    t = total_variance_matrix(model.fac_load / tr[:, None], stats.cor)
    rel = np.abs(np.diag(model.cov_mat) - stats.variances) / stats.variances
    return TotalVarianceCheck(
        max_abs_diag=float(np.abs(np.diag(t)).max()),
        trace=float(np.trace(t)),
        max_rel_variance_error=float(rel.max()),
    )

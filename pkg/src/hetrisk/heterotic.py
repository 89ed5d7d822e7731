"""Heterotic risk model: per-cluster first principal components nested Russian-doll style.

At every level of the industry hierarchy the loadings of a child on its
parent cluster are the entries of the first principal component of the
cluster's block of the current correlation matrix.  The sample covariance
of the resulting cluster factors is itself modelled the same way one level
up, until the least granular level (or an optional single market factor)
is reached.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCluster, HierarchyError, HierarchyMismatch, SingularTopLevel
from .factor_model import FactorModel, factor_model_inverse
from .hierarchy import IndustryHierarchy
from .stats import (
    COVARIANCE_DIVISOR,
    ReturnsPanel,
    correlation_from_covariance,
    sample_covariance,
)

DEGENERACY_TOL = 1e-10
TOP_LEVEL_SINGULARITY_TOL = 1e-10


@dataclass(frozen=True)
class ClusterPC:
    """First principal component of each cluster block.

    ``loadings[i]`` is the entry for child i in its own cluster; entries
    of one cluster have unit norm and a non-negative sum.
    """

    loadings: np.ndarray
    eigenvalues: np.ndarray
    degenerate: np.ndarray


@dataclass(frozen=True)
class NestedLevel:
    name: str
    parent: np.ndarray
    pcs: ClusterPC
    loadings: np.ndarray  # children x clusters, U_i at (i, parent[i])
    factor_cov: np.ndarray  # sample covariance of this level's cluster factors


def _as_parent(membership, n: int) -> tuple[np.ndarray, int]:
    membership = np.asarray(membership)
    if membership.ndim == 1:
        parent = membership.astype(int)
        return parent, int(parent.max()) + 1 if parent.size else 0
    if membership.shape[0] != n:
        raise HierarchyError(f"membership has {membership.shape[0]} rows, expected {n}")
    if not np.all((membership == 0) | (membership == 1)) or not np.all(membership.sum(axis=1) == 1):
        raise HierarchyError("every row of a membership matrix needs exactly one 1")
    return np.argmax(membership, axis=1), membership.shape[1]


def _orient(u: np.ndarray) -> np.ndarray:
    total = u.sum()
    if abs(total) > 1e-12:
        return u if total > 0 else -u
    pivot = np.argmax(np.abs(u) >= np.abs(u).max() * (1.0 - 1e-9))
    return u if u[pivot] >= 0 else -u


def cluster_first_pc(cor, membership) -> ClusterPC:
    """Top eigenpair of each diagonal block of ``cor`` picked out by ``membership``.

    ``membership`` is a binary (n x clusters) matrix or a parent-index vector.
    """
    cor = np.asarray(cor, dtype=float)
    parent, n_clusters = _as_parent(membership, cor.shape[0])
    sizes = np.bincount(parent, minlength=n_clusters)
    if (sizes == 0).any():
        raise EmptyCluster(f"cluster {int(np.flatnonzero(sizes == 0)[0])} has no members")
    u = np.empty(cor.shape[0])
    lam = np.empty(n_clusters)
    degenerate = np.zeros(n_clusters, dtype=bool)
    order = np.argsort(parent, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    for a in range(n_clusters):
        take = order[bounds[a]:bounds[a + 1]]
        if take.size == 1:
            u[take] = 1.0
            lam[a] = cor[take[0], take[0]]
            continue
        values, vectors = np.linalg.eigh(cor[np.ix_(take, take)])
        lam[a] = values[-1]
        degenerate[a] = values[-1] - values[-2] <= DEGENERACY_TOL * max(values[-1], 1.0)
        u[take] = _orient(vectors[:, -1])
    return ClusterPC(loadings=u, eigenvalues=lam, degenerate=degenerate)


def _loading_matrix(parent: np.ndarray, n_clusters: int, u: np.ndarray) -> np.ndarray:
    out = np.zeros((parent.size, n_clusters))
    out[np.arange(parent.size), parent] = u
    return out


def nest_levels(cor: np.ndarray, hierarchy: IndustryHierarchy) -> list[NestedLevel]:
    """Walk up the hierarchy: cluster PCs, factor covariance, renormalize, repeat."""
    levels = []
    for lvl in range(hierarchy.depth):
        parent = np.asarray(hierarchy.parents[lvl])
        n_clusters = len(hierarchy.labels[lvl])
        pcs = cluster_first_pc(cor, parent)
        load = _loading_matrix(parent, n_clusters, pcs.loadings)
        phi = load.T @ cor @ load
        phi = 0.5 * (phi + phi.T)
        levels.append(NestedLevel(hierarchy.level_names[lvl], parent, pcs, load, phi))
        cor = correlation_from_covariance(phi)
    return levels


def _market_model(top_cov: np.ndarray) -> np.ndarray:
    """One-factor model of ``top_cov`` with its own diagonal."""
    cor = correlation_from_covariance(top_cov)
    values, vectors = np.linalg.eigh(cor)
    y = _orient(vectors[:, -1])
    mod = values[-1] * np.outer(y, y)
    np.fill_diagonal(mod, 1.0)
    sd = np.sqrt(np.diag(top_cov))
    return mod * sd[:, None] * sd[None, :]


def _check_top_level(top_cov: np.ndarray) -> None:
    cor = correlation_from_covariance(top_cov)
    values = np.linalg.eigvalsh(cor)
    if values[0] <= TOP_LEVEL_SINGULARITY_TOL * max(values[-1], 1.0):
        raise SingularTopLevel(
            f"{len(cor)}x{len(cor)} top-level factor covariance is singular "
            f"(min eigenvalue {values[0]:.3g}); use market_factor=True"
        )


def prepare_inputs(panel: ReturnsPanel, hierarchy: IndustryHierarchy,
                   drop_singletons: bool = False):
    """Align the hierarchy with the panel and optionally prune singleton tickers."""
    hier = hierarchy.restrict(panel.tickers)
    hier.validate_nesting()
    if drop_singletons:
        keep = ~hier.singleton_tickers()
        if not keep.any():
            raise HierarchyMismatch("every ticker sits in a single-ticker cluster")
        if not keep.all():
            kept = [t for t, k in zip(panel.tickers, keep) if k]
            panel = panel.subset(kept)
            hier = hier.restrict(kept)
    return panel, hier


def build_heterotic_model(panel: ReturnsPanel, hierarchy: IndustryHierarchy,
                          market_factor: bool = False,
                          drop_singletons: bool = False) -> FactorModel:
    """Heterotic Russian-doll factor model of the panel's sample covariance.

    The hierarchy may cover more tickers than the panel; it is restricted to
    the panel's tickers.  Tickers alone in their most granular cluster are
    either dropped (``drop_singletons``) or kept with their whole variance
    booked as specific risk and a zero diagonal entry in the factor
    covariance.
    """
    panel, hier = prepare_inputs(panel, hierarchy, drop_singletons)
    stats = sample_covariance(panel)
    levels = nest_levels(stats.cor, hier)

    top_cov = levels[-1].factor_cov
    if market_factor:
        mod = _market_model(top_cov)
    else:
        _check_top_level(top_cov)
        mod = top_cov

    child_var = [stats.variances] + [np.diag(lv.factor_cov) for lv in levels[:-1]]
    fac_cov = spec_var = None
    for lvl in range(len(levels) - 1, -1, -1):
        fac_cov = mod
        load = levels[lvl].loadings
        mod = load @ mod @ load.T
        spec_var = np.maximum(1.0 - np.diag(mod), 0.0)
        np.fill_diagonal(mod, 1.0)
        tr = np.sqrt(child_var[lvl])
        mod = mod * tr[:, None] * tr[None, :]
    cov_mat = 0.5 * (mod + mod.T)

    singles = hier.singleton_tickers()
    fac_cov = np.array(fac_cov, copy=True)
    if singles.any():
        spec_var[singles] = 1.0
        single_clusters = levels[0].parent[singles]
        fac_cov[single_clusters, single_clusters] = 0.0

    tr = np.sqrt(stats.variances)
    load = levels[0].loadings
    inv = factor_model_inverse(np.sqrt(spec_var), load, fac_cov) / tr[:, None] / tr[None, :]

    meta = {
        "kind": "heterotic",
        "market_factor": bool(market_factor),
        "drop_singletons": bool(drop_singletons),
        "level_names": list(hier.level_names),
        "cluster_counts": hier.counts(),
        "singleton_tickers": [t for t, s in zip(panel.tickers, singles) if s],
        "degenerate_clusters": [int(lv.pcs.degenerate.sum()) for lv in levels],
        "n_obs": panel.n_obs,
        "covariance_divisor": COVARIANCE_DIVISOR,
    }
    return FactorModel(
        tickers=panel.tickers,
        spec_risk=tr * np.sqrt(spec_var),
        fac_load=tr[:, None] * load,
        fac_cov=fac_cov,
        cov_mat=cov_mat,
        inv_cov=0.5 * (inv + inv.T),
        meta=meta,
    )


def heterotic_loadings(panel: ReturnsPanel, hierarchy: IndustryHierarchy) -> np.ndarray:
    """sqrt(C_ii) U_i delta_{G(i),A}: most granular cluster PCs in return units.

    Columns follow the sorted sub-industry labels of the hierarchy
    restricted to the panel's tickers.
    """
    hier = hierarchy.restrict(panel.tickers)
    stats = sample_covariance(panel)
    parent = np.asarray(hier.parents[0])
    pcs = cluster_first_pc(stats.cor, parent)
    load = _loading_matrix(parent, len(hier.labels[0]), pcs.loadings)
    return np.sqrt(stats.variances)[:, None] * load


def factor_returns(panel: ReturnsPanel, hierarchy: IndustryHierarchy,
                   market_factor: bool = False) -> list[np.ndarray]:
    """Realized factor return series, one (clusters x dates) array per level.

    Level factors are U-weighted sums of the children's returns, each child
    normalized by its own sample volatility.  With ``market_factor`` a last
    1 x dates series is appended.
    """
    panel, hier = prepare_inputs(panel, hierarchy)
    stats = sample_covariance(panel)
    levels = nest_levels(stats.cor, hier)
    series = panel.values / np.sqrt(stats.variances)[:, None]
    out = []
    for lv in levels:
        f = lv.loadings.T @ series
        out.append(f)
        series = f / np.sqrt(np.diag(lv.factor_cov))[:, None]
    if market_factor:
        cor = correlation_from_covariance(levels[-1].factor_cov)
        y = _orient(np.linalg.eigh(cor)[1][:, -1])
        out.append(y[None, :] @ series)
    return out

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import panel_with_correlation, random_hierarchy, random_panel
from hetrisk.errors import EmptyCluster, HierarchyError, HierarchyMismatch, SingularTopLevel
from hetrisk.heterotic import (
    build_heterotic_model,
    cluster_first_pc,
    factor_returns,
    heterotic_loadings,
    nest_levels,
)
from hetrisk.hierarchy import IndustryHierarchy
from hetrisk.pc import build_pc_model
from hetrisk.stats import sample_covariance


def one_level(tickers, subs):
    return IndustryHierarchy.from_assignments(tickers, [subs], ("sub_industry",))


def test_equicorrelated_cluster():
    rho = 0.4
    cor = np.full((3, 3), rho) + (1 - rho) * np.eye(3)
    pcs = cluster_first_pc(cor, [0, 0, 0])
    assert pcs.eigenvalues[0] == pytest.approx(1 + 2 * rho)
    np.testing.assert_allclose(pcs.loadings, 1 / np.sqrt(3))
    assert not pcs.degenerate[0]


def test_singleton_cluster_and_membership_matrix():
    cor = np.array([[1.0, 0.3], [0.3, 1.0]])
    pcs = cluster_first_pc(cor, np.eye(2))
    np.testing.assert_array_equal(pcs.loadings, [1.0, 1.0])
    np.testing.assert_array_equal(pcs.eigenvalues, [1.0, 1.0])
    with pytest.raises(EmptyCluster):
        cluster_first_pc(cor, np.array([[1, 0, 0], [1, 0, 0]]))
    with pytest.raises(HierarchyError):
        cluster_first_pc(cor, np.array([[1, 1], [0, 1]]))


def test_identity_block_is_flagged_degenerate():
    pcs = cluster_first_pc(np.eye(3), [0, 0, 0])
    assert pcs.degenerate[0]
    assert abs(np.linalg.norm(pcs.loadings) - 1) < 1e-12


def test_block_diagonal_example(rng):
    block = np.array([[1.0, 0.6], [0.6, 1.0]])
    cor = np.zeros((4, 4))
    cor[:2, :2] = cor[2:, 2:] = block
    panel = panel_with_correlation(cor, 30, rng, vols=[0.01, 0.02, 0.03, 0.04])
    model = build_heterotic_model(panel, one_level(panel.tickers, ["a", "a", "b", "b"]))
    np.testing.assert_allclose(model.fac_cov, np.diag([1.6, 1.6]), atol=1e-12)
    var = sample_covariance(panel).variances
    np.testing.assert_allclose(model.spec_risk ** 2 / var, 0.2, atol=1e-12)
    sd = np.sqrt(var)
    expect = np.zeros((4, 4))
    expect[:2, :2] = expect[2:, 2:] = [[1.0, 0.8], [0.8, 1.0]]  # U lambda U = 0.5 * 1.6
    np.testing.assert_allclose(model.cov_mat / np.outer(sd, sd), expect, atol=1e-12)


def test_equicorrelation_model(rng):
    rho = 0.3
    cor = np.full((3, 3), rho) + (1 - rho) * np.eye(3)
    panel = panel_with_correlation(cor, 25, rng)
    model = build_heterotic_model(panel, one_level(panel.tickers, ["a"] * 3))
    sd = np.sqrt(sample_covariance(panel).variances)
    gcor = model.cov_mat / np.outer(sd, sd)
    off = gcor[~np.eye(3, dtype=bool)]
    np.testing.assert_allclose(off, (1 + 2 * rho) / 3, atol=1e-12)
    np.testing.assert_allclose(model.spec_risk ** 2 / sd ** 2, (2 - 2 * rho) / 3, atol=1e-12)


def test_level_factor_variance_is_cluster_eigenvalue(rng):
    panel = random_panel(rng, 30, 60)
    hier = random_hierarchy(rng, panel.tickers, 3, singletons=2)
    levels = nest_levels(sample_covariance(panel).cor, hier)
    for lv in levels:
        np.testing.assert_allclose(np.diag(lv.factor_cov), lv.pcs.eigenvalues, rtol=1e-12)


def test_singletons_carry_all_variance_as_specific(rng):
    panel = random_panel(rng, 20, 50)
    hier = random_hierarchy(rng, panel.tickers, 3, singletons=4)
    model = build_heterotic_model(panel, hier)
    singles = hier.singleton_tickers()
    var = sample_covariance(panel).variances
    np.testing.assert_allclose(model.spec_risk[singles] ** 2, var[singles], rtol=1e-12)
    cols = np.unique(hier.parents[0][singles])
    np.testing.assert_array_equal(np.diag(model.fac_cov)[cols], 0.0)
    assert np.linalg.eigvalsh(model.cov_mat)[0] > 0
    assert np.abs(model.cov_mat @ model.inv_cov - np.eye(20)).max() < 1e-8
    np.testing.assert_allclose(model.recompose(), model.cov_mat, atol=1e-12 * var.max())
    assert len(model.meta["singleton_tickers"]) == singles.sum()


def test_all_singletons_is_pc_market_model(rng):
    panel = random_panel(rng, 8, 40)
    hier = IndustryHierarchy.from_assignments(
        panel.tickers, [list(panel.tickers), ["m"] * 8], ("sub_industry", "sector"))
    het = build_heterotic_model(panel, hier)
    pc = build_pc_model(panel, k_override=1)
    np.testing.assert_allclose(het.cov_mat, pc.cov_mat, rtol=1e-10)
    np.testing.assert_allclose(het.inv_cov, pc.inv_cov, rtol=1e-8)


def test_singular_top_level_and_market_factor(rng):
    panel = random_panel(rng, 6, 4)
    hier = IndustryHierarchy.from_assignments(
        panel.tickers, [list(panel.tickers)], ("sub_industry",))
    with pytest.raises(SingularTopLevel):
        build_heterotic_model(panel, hier)
    model = build_heterotic_model(panel, hier, market_factor=True)
    assert model.meta["market_factor"]
    assert np.linalg.eigvalsh(model.cov_mat)[0] > 0
    np.testing.assert_allclose(np.diag(model.cov_mat), sample_covariance(panel).variances,
                               rtol=1e-12)


def test_drop_singletons_matches_pruned_panel(rng):
    panel = random_panel(rng, 25, 60)
    hier = random_hierarchy(rng, panel.tickers, 3, singletons=5)
    dropped = build_heterotic_model(panel, hier, drop_singletons=True)
    keep = [t for t, s in zip(panel.tickers, hier.singleton_tickers()) if not s]
    pruned = build_heterotic_model(panel.subset(keep), hier)
    assert dropped.tickers == tuple(keep)
    np.testing.assert_allclose(dropped.cov_mat, pruned.cov_mat, rtol=1e-12)
    again = build_heterotic_model(panel.subset(keep), hier, drop_singletons=True)
    np.testing.assert_allclose(again.cov_mat, dropped.cov_mat, rtol=1e-12)


def test_all_singletons_cannot_be_dropped(rng):
    panel = random_panel(rng, 4, 10)
    hier = one_level(panel.tickers, list(panel.tickers))
    with pytest.raises(HierarchyMismatch):
        build_heterotic_model(panel, hier, drop_singletons=True)


def test_hierarchy_may_cover_more_tickers(rng):
    panel = random_panel(rng, 12, 30)
    big = random_hierarchy(rng, list(panel.tickers) + ["X1", "X2"], 3)
    model = build_heterotic_model(panel, big)
    assert model.tickers == panel.tickers
    with pytest.raises(HierarchyMismatch):
        build_heterotic_model(panel, big.restrict(panel.tickers[:5]))


def test_loadings_and_factor_returns(rng):
    panel = random_panel(rng, 15, 40)
    hier = random_hierarchy(rng, panel.tickers, 3)
    load = heterotic_loadings(panel, hier)
    assert load.shape == (15, hier.counts()[0])
    assert np.all((load != 0).sum(axis=1) == 1)
    sd = np.sqrt(sample_covariance(panel).variances)
    np.testing.assert_allclose(np.linalg.norm(load / sd[:, None], axis=0), 1.0)
    levels = nest_levels(sample_covariance(panel).cor, hier)
    series = factor_returns(panel, hier, market_factor=True)
    assert len(series) == hier.depth + 1 and series[-1].shape == (1, panel.n_obs)
    for f, lv in zip(series, levels):
        np.testing.assert_allclose(np.cov(f), lv.factor_cov, rtol=1e-10, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 30), singles=st.integers(0, 4), seed=st.integers(0, 2**31 - 1))
def test_model_invariants(n, singles, seed):
    rng = np.random.default_rng(seed)
    panel = random_panel(rng, n, 50)
    hier = random_hierarchy(rng, panel.tickers, 4, singletons=singles)
    model = build_heterotic_model(panel, hier, market_factor=True)
    var = sample_covariance(panel).variances
    np.testing.assert_allclose(np.diag(model.cov_mat), var, rtol=1e-10)
    assert np.abs(model.recompose() - model.cov_mat).max() <= 1e-10 * var.max()
    assert np.linalg.eigvalsh(model.cov_mat / np.sqrt(np.outer(var, var)))[0] > 0
    assert np.abs(model.cov_mat @ model.inv_cov - np.eye(n)).max() < 1e-7

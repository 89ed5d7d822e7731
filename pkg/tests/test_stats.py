import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_panel
from hetrisk.errors import (
    DegenerateRow,
    InvalidPanel,
    MissingData,
    NotPositiveSemidefinite,
    NotSymmetric,
    ZeroVariance,
)
from hetrisk.stats import ReturnsPanel, normalize_signs, sample_covariance, sym_eigen, top_eigenpairs
from oracles import two_pass_covariance


def test_covariance_matches_two_pass_oracle(rng):
    x = rng.standard_normal((3, 5))
    res = sample_covariance(ReturnsPanel.from_array(x))
    np.testing.assert_allclose(res.cov, two_pass_covariance(x), rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(np.diag(res.cor), 1.0)
    np.testing.assert_allclose(res.variances, np.diag(res.cov))


def test_constant_row_is_zero_variance(rng):
    x = rng.standard_normal((3, 6))
    x[1] = 0.25
    with pytest.raises(ZeroVariance, match="T0001"):
        sample_covariance(ReturnsPanel.from_array(x))


def test_scaled_copy_is_degenerate(rng):
    x = rng.standard_normal((4, 8))
    x[3] = -2.5 * x[0] + 0.1
    with pytest.raises(DegenerateRow):
        sample_covariance(ReturnsPanel.from_array(x))


def test_panel_rejects_gaps_and_tiny_shapes(rng):
    x = rng.standard_normal((3, 4))
    x[2, 1] = np.nan
    with pytest.raises(MissingData, match="T0002"):
        ReturnsPanel.from_array(x)
    with pytest.raises(InvalidPanel):
        ReturnsPanel.from_array(np.ones((1, 5)))
    with pytest.raises(InvalidPanel):
        ReturnsPanel(("a", "a"), ("d1", "d2"), np.eye(2))


def test_rank_at_most_m_and_psd(rng):
    panel = random_panel(rng, 12, 6)
    cov = sample_covariance(panel).cov
    values = np.linalg.eigvalsh(cov)
    assert values.min() >= -1e-10 * values.max()
    assert np.sum(values > 1e-12 * values.max()) <= panel.n_obs - 1


def test_date_permutation_invariance(rng):
    panel = random_panel(rng, 7, 11)
    perm = rng.permutation(panel.n_obs)
    shuffled = ReturnsPanel(panel.tickers, tuple(panel.dates[p] for p in perm), panel.values[:, perm])
    np.testing.assert_allclose(sample_covariance(shuffled).cov, sample_covariance(panel).cov,
                               rtol=1e-12, atol=1e-18)


@pytest.mark.parametrize("rho", [0.3, -0.7, 0.95])
def test_sym_eigen_two_by_two(rho):
    eig = sym_eigen([[1.0, rho], [rho, 1.0]])
    big, small = sorted([1 + rho, 1 - rho], reverse=True)
    np.testing.assert_allclose(eig.eigenvalues, [big, small], atol=1e-14)
    s = 1 / np.sqrt(2)
    plus, minus = np.array([s, s]), np.array([s, -s])
    first = plus if rho > 0 else minus
    assert abs(abs(eig.eigenvectors[:, 0] @ first) - 1) < 1e-12
    assert np.abs(eig.eigenvectors[:, 0]).max() == pytest.approx(s)


def test_sym_eigen_identity():
    np.testing.assert_allclose(sym_eigen(np.eye(3)).eigenvalues, [1.0, 1.0, 1.0])


def test_sym_eigen_reconstruction_and_signs(rng):
    a = rng.standard_normal((6, 4))
    gram = a @ a.T
    eig = sym_eigen(gram)
    rec = eig.eigenvectors @ np.diag(eig.eigenvalues) @ eig.eigenvectors.T
    assert np.abs(rec - gram).max() < 1e-9
    assert np.all(np.diff(eig.eigenvalues) <= 0)
    np.testing.assert_allclose(eig.eigenvectors.T @ eig.eigenvectors, np.eye(6), atol=1e-10)
    cols = eig.eigenvectors
    assert np.all(cols[np.argmax(np.abs(cols), axis=0), np.arange(6)] > 0)


def test_sym_eigen_errors():
    with pytest.raises(NotSymmetric):
        sym_eigen([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(NotPositiveSemidefinite):
        sym_eigen([[1.0, 0.0], [0.0, -1.0]])
    eig = sym_eigen([[1.0, 1.0], [1.0, 1.0 - 1e-13]])
    assert eig.eigenvalues.min() == 0.0  # round-off negatives are clamped


def test_normalize_signs_tie_goes_to_first_row():
    v = normalize_signs(np.array([[-0.5], [0.5], [0.1]]))
    assert v[0, 0] > 0


def test_top_eigenpairs_match_dense(rng):
    x = rng.standard_normal((9, 5))
    c = x - x.mean(axis=1, keepdims=True)
    eig = top_eigenpairs(c, 10)
    assert eig.eigenvalues.size == 4
    dense = sym_eigen(c @ c.T / 4)
    np.testing.assert_allclose(eig.eigenvalues, dense.eigenvalues[:4], rtol=1e-10)
    np.testing.assert_allclose(np.abs(eig.eigenvectors.T @ dense.eigenvectors[:, :4]),
                               np.eye(4), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 12), t=st.integers(3, 15), seed=st.integers(0, 2**31 - 1))
def test_correlation_properties(n, t, seed):
    panel = random_panel(np.random.default_rng(seed), n, t)
    res = sample_covariance(panel)
    assert np.all(np.diag(res.cor) == 1.0)
    assert np.abs(res.cor).max() <= 1 + 1e-12
    assert np.abs(res.cov - res.cov.T).max() <= 1e-12 * np.abs(res.cov).max()
    assert np.all(res.variances > 0)

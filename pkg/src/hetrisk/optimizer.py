"""Portfolio construction: weighted regressions and Sharpe-ratio optimization.

Every routine takes the overnight return E as its alpha and bets on its
reversal, so holdings point against E: H = -Z eps for regressions and
H = -gamma [Gamma^-1 E - ...] for optimizations.  Weights are holdings
over the investment level and have unit gross exposure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from .errors import (
    DimensionMismatch,
    InfeasibleBounds,
    NonConvergence,
    RankDeficientLoadings,
    ZeroAlpha,
)

DEFAULT_PREC = 1e-5
DEFAULT_TOL = 1e-6
DEFAULT_MAX_OUTER = 100
MAX_SCALE_GROWTH = 1e6
RANK_TOL = 1e-10


@dataclass(frozen=True)
class HoldingsVector:
    weights: np.ndarray
    investment: float = 1.0
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def holdings(self) -> np.ndarray:
        """Dollar holdings H = w * I."""
        return self.weights * self.investment


class RegressionResiduals(NamedTuple):
    weighted: np.ndarray  # Z eps
    raw: np.ndarray  # eps


def _constraint_matrix(loadings, n: int) -> np.ndarray:
    y = np.asarray(loadings, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] != n:
        raise DimensionMismatch(f"constraint matrix has {y.shape[0]} rows, expected {n}")
    p = y.shape[1]
    if p == 0:
        raise RankDeficientLoadings("empty constraint set")
    if p >= n:
        raise RankDeficientLoadings(f"{p} constraints for {n} names")
    s = np.linalg.svd(y, compute_uv=False)
    if s[-1] <= RANK_TOL * s[0]:
        raise RankDeficientLoadings(f"constraint matrix has rank < {p}")
    return y


def weighted_regression_residuals(returns, loadings, weights) -> RegressionResiduals:
    """Residuals of the cross-sectional regression of ``returns`` on ``loadings``.

    Minimizes sum_i z_i eps_i^2.  Rows that are the only nonzero entry of
    some loading column are fitted exactly and get a residual of exactly 0.
    """
    e = np.asarray(returns, dtype=float)
    z = np.asarray(weights, dtype=float)
    y = _constraint_matrix(loadings, e.size)
    if z.shape != e.shape or np.any(z <= 0):
        raise ValueError("regression weights must be positive and match the returns")
    sz = np.sqrt(z)
    coef = np.linalg.lstsq(y * sz[:, None], e * sz, rcond=None)[0]
    eps = e - y @ coef
    eps[_exactly_fitted_rows(y)] = 0.0
    return RegressionResiduals(weighted=z * eps, raw=eps)


def _exactly_fitted_rows(y: np.ndarray) -> np.ndarray:
    nonzero = y != 0
    lone_cols = nonzero.sum(axis=0) == 1
    return nonzero[:, lone_cols].any(axis=1)


def _normalize(direction: np.ndarray, investment: float, **diagnostics) -> HoldingsVector:
    gross = np.abs(direction).sum()
    return HoldingsVector(weights=-direction / gross, investment=investment, diagnostics=diagnostics)


def regression_holdings(returns, loadings, weights, investment: float = 1.0) -> HoldingsVector:
    """H = -Z eps * I / sum|Z eps|."""
    res = weighted_regression_residuals(returns, loadings, weights)
    scale = np.abs(res.weighted).max(initial=0.0)
    if scale <= 1e-14 * max(np.abs(np.asarray(returns) * np.asarray(weights)).max(), 1e-300):
        raise ZeroAlpha("regression residuals vanish")
    return _normalize(res.weighted, investment)


def _apply(inv_cov: np.ndarray, x: np.ndarray) -> np.ndarray:
    if inv_cov.ndim == 1:
        return inv_cov[:, None] * x if x.ndim == 2 else inv_cov * x
    return inv_cov @ x


def _inverse_covariance(inv_cov, n: int) -> np.ndarray:
    s = np.asarray(inv_cov, dtype=float)
    if s.shape not in ((n,), (n, n)):
        raise DimensionMismatch(f"inverse covariance of shape {s.shape} for {n} names")
    return s


def optimize_unbounded(alpha, inv_cov, investment: float = 1.0) -> HoldingsVector:
    """Dollar-neutral Sharpe maximizer for a mean-reversion alpha.

    H = -gamma [G E - G 1 (1'G E)/(1'G 1)] with G the inverse covariance and
    gamma fixing sum|H| = investment.
    """
    e = np.asarray(alpha, dtype=float)
    s = _inverse_covariance(inv_cov, e.size)
    ge = _apply(s, e)
    g1 = _apply(s, np.ones_like(e))
    x = ge - g1 * ge.sum() / g1.sum()
    if np.abs(x).max(initial=0.0) <= 1e-12 * max(np.abs(ge).max(initial=0.0), 1e-300):
        raise ZeroAlpha("alpha is constant across names")
    return _normalize(x, investment)


def _generalized_lm(ret, y, s) -> np.ndarray:
    """(S - S Y (Y'S Y)^-1 Y'S) ret: constrained Sharpe direction without bounds."""
    sy = _apply(s, y)
    sr = _apply(s, ret)
    coef = np.linalg.solve(y.T @ sy, y.T @ sr)
    return sr - sy @ coef


def _presolve(y: np.ndarray, lower: np.ndarray, upper: np.ndarray):
    """Fix names whose weight a constraint forces to zero; drop such columns."""
    fixed = (lower == upper)
    lone = _exactly_fitted_rows(y)
    fixed = fixed | lone
    nonzero = y != 0
    keep = ~((nonzero.sum(axis=0) == 1) | (nonzero.sum(axis=0) == 0))
    return y[:, keep], fixed


def _solve_spd(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        c = np.linalg.cholesky(m)
        out = np.linalg.solve(c.T, np.linalg.solve(c, rhs))
        if np.all(np.isfinite(out)):
            return out
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(m, rhs, rcond=None)[0]


def _active_set(ret, y, s, upper, lower, fixed, max_iter, start=None):
    """Primal active-set solve of min 1/2 x'Gamma x - ret'x, Y'x = 0, lower <= x <= upper.

    Starts at x = 0 (or at a feasible ``start = (x, at_upper, at_lower)``),
    steps toward the equality-constrained minimizer of the current working
    set, pins the first coordinates to reach a bound and releases pinned
    coordinates whose multiplier has the wrong sign once the working set
    stops growing.  Returns the solution, the iteration count and the final
    working set.
    """
    n = ret.size
    sy = _apply(s, y)
    sr = _apply(s, ret)
    ysy = y.T @ sy
    ysr = y.T @ sr
    dense = s.ndim == 2
    if start is None:
        z = np.zeros(n)
        at_up = np.zeros(n, dtype=bool)
        at_lo = np.zeros(n, dtype=bool)
    else:
        z, at_up, at_lo = (np.array(a, copy=True) for a in start)
    scale = max(np.abs(ret).max(initial=0.0), 1e-300)

    for it in range(1, max_iter + 1):
        pinned = at_up | at_lo | fixed
        idx = np.flatnonzero(pinned)
        b = np.where(at_up, upper, np.where(at_lo, lower, 0.0))[idx]
        free = ~pinned
        cols = np.abs(y[free]).sum(axis=0) > 0
        yc = y[:, cols]
        syc = sy[:, cols]
        p = yc.shape[1]
        m = np.empty((p + idx.size, p + idx.size))
        m[:p, :p] = ysy[np.ix_(cols, cols)]
        m[p:, :p] = -syc[idx]
        m[:p, p:] = -syc[idx].T
        m[p:, p:] = s[np.ix_(idx, idx)] if dense else np.diag(s[idx])
        rhs = np.concatenate([ysr[cols], b - sr[idx]])
        u = _solve_spd(m, rhs)
        nu, mu = u[:p], u[p:]
        x = sr - syc @ nu
        if idx.size:
            x += (s[:, idx] @ mu) if dense else np.bincount(idx, s[idx] * mu, minlength=n)
        x[idx] = b

        d = x - z
        ratio = np.full(n, np.inf)
        up = free & (d > 0)
        lo = free & (d < 0)
        ratio[up] = (upper[up] - z[up]) / d[up]
        ratio[lo] = (lower[lo] - z[lo]) / d[lo]
        t = ratio.min(initial=np.inf)
        if t < 1.0:
            t = max(t, 0.0)
            z = z + t * d
            # simultaneous hits are pinned together
            hit = ratio <= t * (1.0 + 1e-12) + 1e-15
            at_up |= hit & up
            at_lo |= hit & lo
            z[at_up] = upper[at_up]
            z[at_lo] = lower[at_lo]
            continue

        z = x
        # multipliers of the pinned coordinates: mu_i = (grad f + Y nu)_i
        wrong = np.zeros(n)
        mult = np.zeros(n)
        mult[idx] = mu
        wrong[at_up & ~fixed] = mult[at_up & ~fixed]
        wrong[at_lo & ~fixed] = -mult[at_lo & ~fixed]
        worst = int(np.argmax(wrong))
        if wrong[worst] <= 1e-12 * scale:
            return z, it, (z, at_up, at_lo)
        at_up[worst] = at_lo[worst] = False
    raise NonConvergence(f"active-set loop did not settle in {max_iter} iterations")


def _reference_inner(ret, load, s, upper, lower, tol, max_iter):
    """Reference inner loop: per-name clipping followed by a constrained re-solve.

    Free weights are taken from rows of the full inverse covariance, which
    is exact only when it is diagonal; pinned weights are never released.
    """
    n, k = load.shape
    w_load = _apply(s, load)
    w_ret = _apply(s, ret)
    jp = np.zeros(n, dtype=bool)
    jm = np.zeros(n, dtype=bool)
    z = np.zeros(n)
    for it in range(1, max_iter + 1):
        jt = ~jp & ~jm
        y = load[jt].T @ w_ret[jt] + load[jp].T @ upper[jp] + load[jm].T @ lower[jm]
        take = np.abs(load[jt]).sum(axis=0) > 0 if k > 1 else np.ones(1, dtype=bool)
        q = load[jt][:, take].T @ w_load[jt][:, take]
        v = np.linalg.solve(q, y[take])
        prev_p, prev_m = jp.copy(), jm.copy()
        x = w_ret - w_load[:, take] @ v
        x[jp] = upper[jp]
        x[jm] = lower[jm]

        q_dir = x - z
        p = np.full(n, np.nan)
        p[q_dir > 0] = np.minimum(x, upper)[q_dir > 0]
        p[q_dir < 0] = np.maximum(x, lower)[q_dir < 0]
        moving = q_dir != 0
        if moving.any():
            t = np.nanmin((p[moving] - z[moving]) / q_dir[moving])
            z = z + t * q_dir
        jp = np.abs(z - upper) < tol
        jm = np.abs(z - lower) < tol
        if np.array_equal(jp, prev_p) and np.array_equal(jm, prev_m):
            return z, it
    raise NonConvergence(f"reference inner loop did not settle in {max_iter} iterations")


def optimize_bounded(alpha, constraints, inv_cov, upper, lower, prec: float = DEFAULT_PREC,
                     tol: float = DEFAULT_TOL, max_outer: int = DEFAULT_MAX_OUTER,
                     investment: float = 1.0, method: str = "active_set",
                     max_inner: int | None = None) -> HoldingsVector:
    """Sharpe maximization with homogeneous linear constraints and weight bounds.

    Outer loop: rescale the alpha by the gross weight until the bounded
    solution has sum|w| within ``prec`` of 1, starting from the scale of
    the unbounded constrained solution.  Once scales on both sides of 1
    are known the search continues by regula falsi inside that bracket.
    Inner loop: box-constrained QP for the current alpha scale.  ``method="active_set"`` (default) solves it
    exactly; ``method="reference"`` runs the clipping reference loop,
    which agrees with it for a diagonal inverse covariance.

    ``inv_cov`` may be an N x N matrix or an N-vector holding a diagonal.
    """
    e = np.asarray(alpha, dtype=float)
    n = e.size
    s = _inverse_covariance(inv_cov, n)
    y = _constraint_matrix(constraints, n)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,)).copy()
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,)).copy()
    if np.any(lower > 0) or np.any(upper < 0):
        raise InfeasibleBounds("bounds must satisfy lower <= 0 <= upper")
    if method not in ("active_set", "reference"):
        raise ValueError(f"unknown method {method!r}")
    max_inner = max_inner or 50 * n + 100

    ret = -e
    direction = _generalized_lm(ret, y, s)
    gross = np.abs(direction).sum()
    if gross <= 1e-12 * max(np.abs(_apply(s, ret)).sum(), 1e-300):
        raise ZeroAlpha("alpha vanishes once the constraints are projected out")

    if method == "active_set":
        y_eff, fixed = _presolve(y, lower, upper)
        reach = np.where(fixed, 0.0, np.maximum(upper, -lower)).sum()
    else:
        reach = np.maximum(upper, -lower).sum()
    if reach < 1.0 - prec:
        raise InfeasibleBounds(f"bounds allow a gross weight of at most {reach:.6g}",
                               gross_cap=float(reach))

    warm = None

    def solve(c):
        nonlocal warm
        try:
            if method == "active_set":
                # the previous solution stays feasible when only the alpha scale changes
                x, its, warm = _active_set(ret * c, y_eff, s, upper, lower, fixed, max_inner, warm)
                return x, its
            return _reference_inner(ret * c, y, s, upper, lower, tol, max_inner)
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(f"inner solve failed at alpha scale {c:.3g}: {exc}") from exc

    scale = 1.0 / gross
    first = scale
    inner_iters = []
    lo = hi = None  # (scale, gross - 1) with gross below / above 1
    side = 0
    prev = None
    for outer in range(1, max_outer + 1):
        x, its = solve(scale)
        inner_iters.append(its)
        total = np.abs(x).sum()
        f = total - 1.0
        if abs(f) < prec:
            return HoldingsVector(
                weights=x, investment=investment,
                diagnostics={"alpha_scale": -scale, "outer_iterations": outer,
                             "inner_iterations": inner_iters, "method": method},
            )
        if total == 0.0:
            raise InfeasibleBounds("bounds pin every weight at zero")
        if f < 0:
            if scale >= first * MAX_SCALE_GROWTH:
                raise InfeasibleBounds(
                    f"the bounded optimum saturates at gross weight {total:.6g} as the alpha "
                    f"scale grows; bounds and constraints block the alpha's direction",
                    gross_cap=float(total),
                )
            if lo is not None and hi is None and f - lo[1] <= 1e-12 and scale > lo[0]:
                # gross no longer grows with the alpha scale
                lo = (scale, f)
                scale *= 10.0
                continue
            lo = (scale, f)
            if side == -1 and hi is not None:
                hi = (hi[0], hi[1] / 2)
            side = -1
        else:
            hi = (scale, f)
            if side == 1 and lo is not None:
                lo = (lo[0], lo[1] / 2)
            side = 1
        if lo is None or hi is None:
            # plain update: rescale by the gross weight, sped up by a
            # secant step through the previous point when that goes further
            step = scale / total
            if prev is not None and f != prev[1]:
                secant = scale - f * (scale - prev[0]) / (f - prev[1])
                if (secant - scale) * (step - scale) > 0 and abs(secant - scale) > abs(step - scale):
                    step = min(max(secant, scale / 10.0), scale * 10.0)
            prev = (scale, f)
            scale = step
            continue
        # Illinois step inside the bracket; gross is piecewise linear in the scale
        scale = lo[0] - lo[1] * (hi[0] - lo[0]) / (hi[1] - lo[1])
    raise NonConvergence(f"gross weight did not reach 1 within {max_outer} outer iterations")


@dataclass(frozen=True)
class EquivalenceCheck:
    max_abs_diff: float
    optimized: np.ndarray
    regressed: np.ndarray


def regression_as_optimization_check(alpha, constraints, variances) -> EquivalenceCheck:
    """Compare diagonal-covariance optimization with the weighted regression.

    The optimization side runs the bounded optimizer with infinite bounds and
    inverse covariance 1/C_ii; the regression side uses weights z = 1/C_ii.
    """
    variances = np.asarray(variances, dtype=float)
    if np.any(variances <= 0):
        raise ValueError("variances must be positive")
    z = 1.0 / variances
    opt = optimize_bounded(alpha, constraints, z, np.inf, -np.inf).weights
    reg = regression_holdings(alpha, constraints, z).weights
    return EquivalenceCheck(float(np.abs(opt - reg).max()), opt, reg)

"""Principal-component and heterotic (industry-nested) factor risk models.

Builders turn a panel of returns into a FactorModel with a factor-form
inverse; the optimizer and backtest modules use those models in an
intraday mean-reversion horse race.
"""

from .backtest import BacktestConfig, BacktestReport, compute_metrics, run_horserace, select_universe
from .errors import HetRiskError
from .factor_model import FactorModel, factor_model_inverse
from .heterotic import build_heterotic_model, cluster_first_pc
from .hierarchy import IndustryHierarchy
from .optimizer import (
    optimize_bounded,
    optimize_unbounded,
    regression_as_optimization_check,
    regression_holdings,
    weighted_regression_residuals,
)
from .pc import build_pc_model, select_num_factors, verify_total_variance
from .prices import PricePanel, compute_returns
from .stats import ReturnsPanel, sample_covariance, sym_eigen
from .synth import SynthSpec, generate_synthetic_panel

__version__ = "0.1.0"

__all__ = [
    "BacktestConfig",
    "BacktestReport",
    "FactorModel",
    "HetRiskError",
    "IndustryHierarchy",
    "PricePanel",
    "ReturnsPanel",
    "SynthSpec",
    "build_heterotic_model",
    "build_pc_model",
    "cluster_first_pc",
    "compute_metrics",
    "compute_returns",
    "factor_model_inverse",
    "generate_synthetic_panel",
    "optimize_bounded",
    "optimize_unbounded",
    "regression_as_optimization_check",
    "regression_holdings",
    "run_horserace",
    "sample_covariance",
    "select_num_factors",
    "select_universe",
    "sym_eigen",
    "verify_total_variance",
    "weighted_regression_residuals",
]

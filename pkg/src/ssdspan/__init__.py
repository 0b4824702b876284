"""Sparse second-order stochastic dominance spanning portfolios.

Estimates sparse spanning supports from return panels via expected-utility
linear programs and forward stepwise selection, quantifies the
diversification loss of sparsity, and ships subsampling/bootstrap inference,
a rolling backtest harness, performance metrics, factor regressions and
Monte Carlo validation designs.
"""

__version__ = "0.1.0"

from .backtest import BacktestConfig, BacktestOutput, cumulative_wealth, run_backtest
from .inference import (
    ConfidenceInterval,
    DominanceTestResult,
    SubsampleConfig,
    nondominance_test,
    sparse_threshold_optimizers,
    subsample_ci,
)
from .lp import LpSolution, UtilityLpInstance, build_instance, lpm, lpmd, max_expected_utility
from .metrics import (
    PerformanceReport,
    ceq,
    downside_sharpe,
    moments,
    opportunity_cost,
    performance_report,
    return_loss,
    turnover_and_costs,
    up_ratio,
    var_es,
)
from .panel import ReturnPanel, SupportBounds, load_panel, support_bounds, window_and_filter
from .regress import RegressionResult, ols
from .spanning import (
    LossCurve,
    SparseSpanningSelector,
    SpanningConfig,
    SpanningResult,
    fss_select,
    full_universe_optima,
    loss_curve,
    loss_of_support,
)
from .synth import McDesign, McReport, generate, run_experiment
from .utility import (
    OutcomeGrid,
    RussellSeoUtility,
    build_grid,
    enumerate_utilities,
    evaluate_utility,
    utility_count,
)

__all__ = [name for name in dir() if not name.startswith("_")]

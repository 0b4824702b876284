"""Rolling-window out-of-sample harness for the sparse strategy and 1/N.

Each month, the prior `window` months are used for selection (assets with
any missing cell in the window are dropped), weights are fixed, and the
realized return is read from the next month's actual returns. No information
after the rebalance date ever enters the weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyUniverseError, ParameterError
from .lp import max_expected_utility
from .metrics import DEFAULT_TRC, PerformanceReport, performance_report
from .panel import ReturnPanel, window_and_filter
from .spanning import SpanningConfig, fss_select
from .utility import RussellSeoUtility, build_grid
from .panel import array_bounds

STRATEGY_SPARSE = "sparse_ssd"
STRATEGY_EQUAL = "one_over_n"


@dataclass
class BacktestConfig:
    window: int = 240
    spanning: SpanningConfig = field(default_factory=lambda: SpanningConfig(q_max=45))
    strategies: tuple[str, ...] = (STRATEGY_SPARSE, STRATEGY_EQUAL)
    trc: float = DEFAULT_TRC
    rf: float = 0.0

    def __post_init__(self):
        if self.window < 2:
            raise ParameterError("window must cover at least 2 periods")
        if not self.strategies:
            raise ParameterError("at least one strategy required")
        for s in self.strategies:
            if s not in (STRATEGY_SPARSE, STRATEGY_EQUAL):
                raise ParameterError(f"unknown strategy {s!r}")


@dataclass
class BacktestRecord:
    date: str                      # realization date (held-out month)
    n_assets_training: int
    support: list[str]
    q_achieved: int
    loss: float
    weights: dict[str, float]      # sparse strategy weights on the full universe
    realized_return: float


@dataclass
class BacktestOutput:
    records: list[BacktestRecord]
    realized: dict[str, np.ndarray]
    weights: dict[str, np.ndarray]     # (n_oos, p) rows over the full asset list
    wealth: dict[str, np.ndarray]
    reports: dict[str, PerformanceReport]
    dates: list[str]
    asset_names: tuple[str, ...]
    metadata: dict = field(default_factory=dict)


def cumulative_wealth(realized) -> np.ndarray:
    """W_t = prod_{s<=t} (1 + R_s) with W before the first period equal to 1."""
    r = np.asarray(realized, dtype=float)
    if (1.0 + r <= 0).any():
        import warnings

        warnings.warn("gross return <= 0 encountered; wealth path hits zero or below")
    return np.cumprod(1.0 + r)


def _held_portfolio(train: ReturnPanel, result, config: SpanningConfig) -> np.ndarray:
    """Weights held out of sample, on the training panel's asset order.

    When the selection ends with positive loss, holds the sparse-side
    optimizer of the utility attaining the loss; at (near) zero loss, holds
    the optimizer of the uniform ramp mixture as a canonical representative.
    """
    grid = build_grid(array_bounds(train.values), config.n1)
    if result.loss > config.loss_tolerance and result.binding_utility is not None:
        from .utility import enumerate_utilities

        utility = enumerate_utilities(grid, config.n2)[result.binding_utility]
    else:
        n1 = grid.n1
        utility = RussellSeoUtility(tuple([1] * n1), n1, grid)
    sol = max_expected_utility(train.values, utility, support=result.support)
    weights = np.zeros(train.n_assets)
    weights[np.asarray(result.support, dtype=int)] = sol.weights
    return weights


def run_backtest(panel: ReturnPanel, config: BacktestConfig) -> BacktestOutput:
    """Roll the window one month at a time and account realized returns."""
    T = panel.n_periods
    if config.window + 1 > T:
        raise ParameterError(f"window {config.window} + 1 exceeds panel length {T}")
    n_oos = T - config.window
    p = panel.n_assets
    names = panel.assets
    realized = {s: np.empty(n_oos) for s in config.strategies}
    weights = {s: np.zeros((n_oos, p)) for s in config.strategies}
    records: list[BacktestRecord] = []
    dates: list[str] = []

    for step in range(n_oos):
        t_end = config.window + step          # index of the held-out month
        start_date = panel.dates[step]
        train = window_and_filter(panel, start_date, config.window)
        if train.n_assets == 0:
            raise EmptyUniverseError(f"no tradable assets at {panel.dates[t_end]}")
        surviving = [panel.assets.index(a) for a in train.assets]
        next_row = panel.values[t_end]
        next_mask = panel.mask[t_end]
        dates.append(panel.dates[t_end])

        if STRATEGY_SPARSE in config.strategies:
            result = fss_select(train, config.spanning, compute_per_utility=False)
            held = _held_portfolio(train, result, config.spanning)
            full = np.zeros(p)
            for j, a in enumerate(surviving):
                full[a] = held[j]
            held_assets = np.nonzero(full)[0]
            if not next_mask[held_assets].all():
                missing = [names[a] for a in held_assets if not next_mask[a]]
                raise EmptyUniverseError(
                    f"held asset(s) {missing} unobserved at {panel.dates[t_end]}")
            ret = float(full[held_assets] @ next_row[held_assets])
            realized[STRATEGY_SPARSE][step] = ret
            weights[STRATEGY_SPARSE][step] = full
            records.append(BacktestRecord(
                date=panel.dates[t_end],
                n_assets_training=train.n_assets,
                support=[train.assets[i] for i in result.support],
                q_achieved=len(result.support),
                loss=float(result.loss),
                weights={names[a]: float(full[a]) for a in held_assets},
                realized_return=ret,
            ))

        if STRATEGY_EQUAL in config.strategies:
            full = np.zeros(p)
            for a in surviving:
                full[a] = 1.0 / len(surviving)
            if not next_mask[surviving].all():
                missing = [names[a] for a in surviving if not next_mask[a]]
                raise EmptyUniverseError(
                    f"1/N asset(s) {missing} unobserved at {panel.dates[t_end]}")
            realized[STRATEGY_EQUAL][step] = float(full[surviving] @ next_row[surviving])
            weights[STRATEGY_EQUAL][step] = full

    wealth = {s: cumulative_wealth(realized[s]) for s in config.strategies}
    reports = {}
    for s in config.strategies:
        bench = None
        if s == STRATEGY_SPARSE and STRATEGY_EQUAL in config.strategies:
            bench = realized[STRATEGY_EQUAL]
        reports[s] = performance_report(
            realized[s], rf=config.rf, weights_history=weights[s], trc=config.trc,
            benchmark_returns=bench,
        )
    return BacktestOutput(
        records=records, realized=realized, weights=weights, wealth=wealth,
        reports=reports, dates=dates, asset_names=names,
        metadata={
            "window": config.window,
            "strategies": list(config.strategies),
            "trc": config.trc,
            "q_max": config.spanning.q_max,
            "held_portfolio_rule": ("binding-utility optimizer when loss exceeds "
                                    "tolerance, uniform-mixture optimizer otherwise"),
        },
    )

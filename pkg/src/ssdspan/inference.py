"""Subsampling confidence intervals for the diversification loss and the
pairwise non-dominance bootstrap test.

The fast subsampling scheme fixes the sparse-side threshold optimizers
kappa_z computed once on the full sample, so each of the T - b + 1
overlapping subsamples only needs one full-simplex LPM minimization per
threshold instead of a fresh greedy search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .lp import min_weighted_lpm
from .panel import array_bounds
from .spanning import SpanningResult
from .utility import build_grid
from .validation import check_returns_matrix, check_series


def default_block_length(n_periods: int) -> int:
    """floor(T^0.6): grows without bound while b/T vanishes."""
    return max(1, min(n_periods, int(math.floor(n_periods ** 0.6))))


def default_bootstrap_block(n_periods: int) -> int:
    """ceil(T^(1/3)) for the circular block bootstrap."""
    return max(1, int(math.ceil(n_periods ** (1.0 / 3.0))))


@dataclass
class SubsampleConfig:
    """Settings for the fast subsampling confidence interval."""

    block_length: int | None = None       # b_T; defaults to floor(T^0.6)
    alpha: float = 0.05
    z_grid: np.ndarray | None = None      # defaults to the utility outcome grid
    n1: int = 10
    trim: float = 0.0                     # lift the grid floor above inf Z by this offset

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ParameterError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if self.trim < 0:
            raise ParameterError("trim must be nonnegative")


@dataclass
class ConfidenceInterval:
    """One-sided-conservative interval for the population loss."""

    lower: float
    upper: float
    quantile: float
    statistics: np.ndarray
    center: float                         # threshold-form loss on the full sample
    alpha: float
    block_length: int
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "lower": float(self.lower),
            "upper": float(self.upper),
            "quantile": float(self.quantile),
            "center": float(self.center),
            "alpha": float(self.alpha),
            "block_length": int(self.block_length),
            "statistics": [float(s) for s in self.statistics],
            "metadata": self.metadata,
        }


def _resolve_grid(values: np.ndarray, config: SubsampleConfig) -> np.ndarray:
    if config.z_grid is not None:
        grid = np.asarray(config.z_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ParameterError("z_grid must be a non-empty 1-D array")
    else:
        grid = build_grid(array_bounds(values), config.n1).points.copy()
    if config.trim > 0:
        floor = values.min() + config.trim
        grid = grid[grid >= floor]
        if grid.size == 0:
            raise ParameterError("trim removed every threshold from the grid")
    return grid


def sparse_threshold_optimizers(returns, support, z_grid) -> dict[float, np.ndarray]:
    """Per-threshold LPM minimizers restricted to `support`, on the full sample.

    These are the kappa_z reused across every subsample by the fast scheme.
    Weights are reported over the full asset universe (zeros off the support).
    """
    X = check_returns_matrix(returns)
    support = list(map(int, support))
    if not support:
        raise ParameterError("support must be non-empty")
    T, p = X.shape
    out: dict[float, np.ndarray] = {}
    warm = None
    for z in np.asarray(z_grid, dtype=float):
        _, lam, _, _ = min_weighted_lpm(X[:, support], np.array([z]),
                                        np.array([1.0 / T]), warm_lambda=warm)
        warm = lam
        full = np.zeros(p)
        full[support] = lam
        out[float(z)] = full
    return out


def threshold_form_loss(returns, kappa_map: dict[float, np.ndarray]) -> float:
    """sup over the grid of [LPM at kappa_z minus the full-simplex optimum]."""
    X = check_returns_matrix(returns)
    T = X.shape[0]
    best = -np.inf
    warm = None
    for z, kappa in kappa_map.items():
        k_side = float(np.maximum(z - X @ kappa, 0.0).mean())
        j_side, lam, _, _ = min_weighted_lpm(X, np.array([z]), np.array([1.0 / T]),
                                             warm_lambda=warm)
        warm = lam
        best = max(best, k_side - j_side)
    return best


def subsample_ci(returns, spanning_result: SpanningResult | None,
                 kappa_map: dict[float, np.ndarray] | None = None,
                 config: SubsampleConfig | None = None) -> ConfidenceInterval:
    """Fast subsampling confidence interval for the diversification loss.

    For each start t, computes sqrt(b) * (sup over the grid and the full
    simplex of the LPM differential at the fixed kappa_z on that subsample,
    minus the full-sample loss), takes the ceil((1-alpha) n)-th order
    statistic q, and returns [max(0, M - q/sqrt(T)), M + q/sqrt(T)].

    The center M is recomputed here in the threshold form from the same
    selected support, so the statistic is exactly zero when b equals T.
    """
    config = config or SubsampleConfig()
    X = check_returns_matrix(returns)
    T = X.shape[0]
    b = config.block_length if config.block_length is not None else default_block_length(T)
    if not 1 <= b <= T:
        raise ParameterError(f"block length {b} outside 1..{T}")
    grid = _resolve_grid(X, config)
    if kappa_map is None:
        if spanning_result is None:
            raise ParameterError("need a spanning result or an explicit kappa_map")
        kappa_map = sparse_threshold_optimizers(X, spanning_result.support, grid)
    else:
        kappa_map = {float(z): np.asarray(k, dtype=float) for z, k in kappa_map.items()}
        grid = np.array(sorted(kappa_map))

    center = threshold_form_loss(X, kappa_map)
    n_sub = T - b + 1
    stats = np.empty(n_sub)
    kappas = {z: kappa_map[float(z)] for z in grid}
    warm: dict[float, np.ndarray] = {}
    for t0 in range(n_sub):
        sub = X[t0:t0 + b]
        best = -np.inf
        for z in grid:
            zf = float(z)
            k_side = float(np.maximum(zf - sub @ kappas[zf], 0.0).mean())
            j_side, lam, _, _ = min_weighted_lpm(sub, np.array([zf]),
                                                 np.array([1.0 / b]),
                                                 warm_lambda=warm.get(zf))
            warm[zf] = lam
            best = max(best, k_side - j_side)
        stats[t0] = math.sqrt(b) * (best - center)

    # guard the order-statistic index against float noise in (1-alpha)*n
    k_order = max(int(math.ceil((1.0 - config.alpha) * n_sub - 1e-9)), 1)
    quantile = float(np.sort(stats)[k_order - 1])
    half = quantile / math.sqrt(T)
    lower = max(0.0, center - half)
    upper = max(center + half, lower)
    return ConfidenceInterval(
        lower=lower, upper=upper, quantile=quantile, statistics=stats,
        center=center, alpha=config.alpha, block_length=b,
        metadata={
            "n_subsamples": n_sub,
            "z_grid": [float(z) for z in grid],
            "order_statistic": k_order,
        },
    )


@dataclass
class DominanceTestResult:
    """Pairwise non-dominance test outcome."""

    statistic: float
    p_value: float
    replications: int
    reject_5pct: bool
    block_length: int
    z_grid: np.ndarray
    bootstrap_statistics: np.ndarray
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "replications": int(self.replications),
            "reject_5pct": bool(self.reject_5pct),
            "block_length": int(self.block_length),
            "z_grid": [float(z) for z in self.z_grid],
            "bootstrap_statistics": [float(s) for s in self.bootstrap_statistics],
            "metadata": self.metadata,
        }


def _lpm_curve(series: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return np.maximum(grid[:, None] - series[None, :], 0.0).mean(axis=1)


def _circular_block_indices(rng: np.random.Generator, T: int, block: int) -> np.ndarray:
    n_blocks = int(math.ceil(T / block))
    starts = rng.integers(0, T, size=n_blocks)
    idx = (starts[:, None] + np.arange(block)[None, :]) % T
    return idx.ravel()[:T]


def nondominance_test(benchmark, candidate, z_grid=None, block_length: int | None = None,
                      replications: int = 1000, seed: int = 0, recenter: bool = True,
                      n1: int = 10, trim: float = 0.0, alpha: float = 0.05
                      ) -> DominanceTestResult:
    """Test H0: `candidate` does not strictly SSD-dominate `benchmark`.

    The statistic is the largest LPM advantage of the candidate over the
    grid, xi = max_z [LPM_benchmark(z) - LPM_candidate(z)]. The null is
    rejected at 5% when the circular-block-bootstrap p-value (fraction of
    recentered bootstrap statistics above xi) falls below alpha and xi is
    positive; two identical series therefore never reject.
    """
    kappa = check_series(benchmark, "benchmark series")
    lam = check_series(candidate, "candidate series")
    if kappa.size != lam.size:
        raise ParameterError(f"series lengths differ: {kappa.size} vs {lam.size}")
    if replications < 1:
        raise ParameterError("replications must be >= 1")
    T = kappa.size
    if z_grid is None:
        pooled = np.concatenate([kappa, lam])
        lo, hi = float(pooled.min()), float(pooled.max())
        grid = np.linspace(lo, hi, n1) if hi > lo else np.array([lo])
    else:
        grid = np.asarray(z_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ParameterError("z_grid must be a non-empty 1-D array")
    if trim > 0:
        floor = min(kappa.min(), lam.min()) + trim
        grid = grid[grid >= floor]
        if grid.size == 0:
            raise ParameterError("trim removed every threshold from the grid")

    d_hat = _lpm_curve(kappa, grid) - _lpm_curve(lam, grid)
    xi = float(d_hat.max())
    block = block_length if block_length is not None else default_bootstrap_block(T)
    if not 1 <= block <= T:
        raise ParameterError(f"bootstrap block length {block} outside 1..{T}")

    rng = np.random.default_rng(seed)
    boot = np.empty(replications)
    for r in range(replications):
        idx = _circular_block_indices(rng, T, block)
        d_star = _lpm_curve(kappa[idx], grid) - _lpm_curve(lam[idx], grid)
        boot[r] = float((d_star - d_hat).max()) if recenter else float(d_star.max())
    p_value = float((boot > xi).sum()) / replications
    reject = bool(p_value < alpha and xi > 0.0)
    return DominanceTestResult(
        statistic=xi, p_value=p_value, replications=replications, reject_5pct=reject,
        block_length=block, z_grid=grid, bootstrap_statistics=boot,
        metadata={"recenter": recenter, "seed": seed, "alpha": alpha,
                  "scheme": "circular block bootstrap"},
    )

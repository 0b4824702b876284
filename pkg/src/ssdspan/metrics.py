"""Performance and risk measures for realized portfolio return series.

Monthly decimal units throughout; no annualization. Tail measures use the
positive-for-loss sign convention and the lower empirical order statistic
(no interpolation). Certainty equivalents and opportunity costs support the
canonical CARA (exponential) and CRRA (power) utilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BracketError, ParameterError, UndefinedMeasureError
from .validation import check_series

DEFAULT_AVERSIONS = (2.0, 4.0, 6.0)
DEFAULT_TRC = 0.0035  # 35 bps proportional transaction cost


def moments(returns) -> tuple[float, float, float, float]:
    """(mean, sd, skewness, excess kurtosis); sd uses the T-1 denominator.

    Skewness is m3 / m2^1.5 and kurtosis m4 / m2^2 - 3 with central moments
    in the 1/T convention.
    """
    r = check_series(returns, "returns")
    if r.size < 4:
        raise ParameterError("moments require at least 4 observations")
    mean = float(r.mean())
    dev = r - mean
    m2 = float((dev**2).mean())
    if m2 == 0.0 or np.all(r == r[0]):
        raise UndefinedMeasureError("constant series: skewness and kurtosis undefined")
    sd = float(r.std(ddof=1))
    skew = float((dev**3).mean() / m2**1.5)
    kurt = float((dev**4).mean() / m2**2 - 3.0)
    return mean, sd, skew, kurt


def sharpe(returns, rf=0.0) -> float:
    r = check_series(returns, "returns")
    rf_arr = np.broadcast_to(np.asarray(rf, dtype=float), r.shape)
    sd = float(r.std(ddof=1))
    if sd == 0.0:
        raise UndefinedMeasureError("zero return volatility: Sharpe ratio undefined")
    return float((r.mean() - rf_arr.mean()) / sd)


def downside_sharpe(returns, rf=0.0) -> float:
    """(mean - mean rf) / (sqrt(2) * downside deviation of raw returns below zero)."""
    r = check_series(returns, "returns")
    if r.size < 2:
        raise ParameterError("downside Sharpe requires at least 2 observations")
    rf_arr = np.broadcast_to(np.asarray(rf, dtype=float), r.shape)
    downside = np.minimum(r, 0.0)
    var_minus = float((downside**2).sum() / (r.size - 1))
    if var_minus == 0.0:
        raise UndefinedMeasureError("no negative returns: downside deviation is zero")
    return float((r.mean() - rf_arr.mean()) / (np.sqrt(2.0) * np.sqrt(var_minus)))


def up_ratio(returns, benchmark=0.0) -> float:
    """Mean upside excess over root-mean-square shortfall against the benchmark."""
    r = check_series(returns, "returns")
    b = np.broadcast_to(np.asarray(benchmark, dtype=float), r.shape)
    upside = float(np.maximum(r - b, 0.0).mean())
    shortfall_sq = float((np.maximum(b - r, 0.0) ** 2).mean())
    if shortfall_sq == 0.0:
        raise UndefinedMeasureError("no shortfall below the benchmark: UP ratio undefined")
    return upside / float(np.sqrt(shortfall_sq))


def var_es(returns, level: float = 0.95) -> tuple[float, float]:
    """95% VaR and ES, positive for a loss; lower order statistic convention."""
    if not 0.0 < level < 1.0:
        raise ParameterError(f"level must be in (0, 1), got {level}")
    r = check_series(returns, "returns")
    # guard the order-statistic index against float noise in (1-level)*T
    k = max(int(np.ceil((1.0 - level) * r.size - 1e-9)), 1)
    threshold = np.sort(r)[k - 1]
    var = -float(threshold)
    es = -float(r[r <= threshold].mean())
    return var, es


def ceq(returns, kind: str = "exponential", aversion: float = 2.0) -> float:
    """Certainty-equivalent return solving E[u(1 + R)] = u(1 + CEQ)."""
    r = check_series(returns, "returns")
    if aversion <= 0:
        raise ParameterError("risk aversion must be positive")
    gross = 1.0 + r
    if kind == "exponential":
        # u(w) = -exp(-a w)
        lse = float(np.log(np.mean(np.exp(-aversion * gross))))
        return -lse / aversion - 1.0
    if kind == "power":
        if aversion == 1.0:
            raise ParameterError("power utility needs aversion != 1")
        if (gross <= 0).any():
            raise ParameterError("power utility needs 1 + R > 0 for every observation")
        # u(w) = w^(1-g) / (1-g)
        mean_pow = float(np.mean(gross ** (1.0 - aversion)))
        return mean_pow ** (1.0 / (1.0 - aversion)) - 1.0
    raise ParameterError(f"unknown utility kind {kind!r}")


def _mean_utility(series: np.ndarray, kind: str, aversion: float, shift: float) -> float:
    gross = 1.0 + series + shift
    if kind == "exponential":
        return float(np.mean(-np.exp(-aversion * gross)))
    if (gross <= 0).any():
        raise ParameterError("power utility needs positive gross returns over the bracket")
    return float(np.mean(gross ** (1.0 - aversion) / (1.0 - aversion)))


def opportunity_cost(bench_returns, target_returns, kind: str = "exponential",
                     aversion: float = 2.0, tol: float = 1e-10) -> float:
    """Return theta making E[u(1 + bench + theta)] = E[u(1 + target)].

    Solved by bisection on [-0.9, 0.9]; u strictly increasing makes the root
    unique.
    """
    bench = check_series(bench_returns, "benchmark returns")
    target = check_series(target_returns, "target returns")
    if kind == "power" and aversion == 1.0:
        raise ParameterError("power utility needs aversion != 1")
    target_val = _mean_utility(target, kind, aversion, 0.0)
    lo, hi = -0.9, 0.9
    f_lo = _mean_utility(bench, kind, aversion, lo) - target_val
    f_hi = _mean_utility(bench, kind, aversion, hi) - target_val
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0:
        raise BracketError(
            f"no sign change on [-0.9, 0.9]: f(-0.9)={f_lo:.3e}, f(0.9)={f_hi:.3e}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = _mean_utility(bench, kind, aversion, mid) - target_val
        if f_mid == 0.0:
            return mid
        if f_lo * f_mid < 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def turnover_and_costs(weights_history, realized_returns, trc: float = DEFAULT_TRC
                       ) -> tuple[float, np.ndarray, np.ndarray]:
    """Portfolio turnover, net-of-cost return series, and per-period turnovers.

    `weights_history` holds one row per period, aligned with
    `realized_returns`; the cost of the initial purchase is not charged.
    Net wealth follows NW_t = NW_{t-1} (1 + R_t) (1 - trc * turn_t) with
    turn_t the absolute weight change entering period t, and the net return
    is RTC_t = NW_t / NW_{t-1} - 1.
    """
    W = np.asarray(weights_history, dtype=float)
    r = check_series(realized_returns, "realized returns")
    if W.ndim != 2 or W.shape[0] != r.size:
        raise ParameterError("weights_history must be (T, p) aligned with returns")
    if trc < 0:
        raise ParameterError("transaction cost rate must be nonnegative")
    row_err = np.abs(W.sum(axis=1) - 1.0)
    if row_err.max() > 1e-6:
        t_bad = int(np.argmax(row_err))
        raise ParameterError(f"weight row {t_bad} off the simplex by {row_err[t_bad]:.2e}")
    turns = np.zeros(r.size)
    if r.size > 1:
        turns[1:] = np.abs(np.diff(W, axis=0)).sum(axis=1)
    pt = float(turns[1:].mean()) if r.size > 1 else 0.0
    net = (1.0 + r) * (1.0 - trc * turns) - 1.0
    return pt, net, turns


def return_loss(rtc_strategy, rtc_benchmark) -> float:
    """(mu_s / sigma_s) * sigma_b - mu_b for net-of-cost series s and b."""
    s = check_series(rtc_strategy, "strategy net returns")
    b = check_series(rtc_benchmark, "benchmark net returns")
    sd_s = float(s.std(ddof=1))
    if sd_s == 0.0:
        raise UndefinedMeasureError("zero strategy volatility: return loss undefined")
    return float(s.mean() / sd_s * b.std(ddof=1) - b.mean())


@dataclass
class PerformanceReport:
    """Standard block of performance and risk measures for one strategy."""

    average: float
    standard_deviation: float
    skewness: float | None
    kurtosis: float | None
    sharpe: float | None
    downside_sharpe: float | None
    var95: float
    es95: float
    up_ratio: float | None
    turnover: float | None
    ceq: dict
    opportunity_cost: dict | None
    return_loss: float | None
    net_of_cost_series: np.ndarray | None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def _f(x):
            return None if x is None else float(x)

        return {
            "schema_version": 1,
            "average": _f(self.average),
            "standard_deviation": _f(self.standard_deviation),
            "skewness": _f(self.skewness),
            "kurtosis": _f(self.kurtosis),
            "sharpe": _f(self.sharpe),
            "downside_sharpe": _f(self.downside_sharpe),
            "var95": _f(self.var95),
            "es95": _f(self.es95),
            "up_ratio": _f(self.up_ratio),
            "turnover": _f(self.turnover),
            "ceq": {k: _f(v) for k, v in self.ceq.items()},
            "opportunity_cost": None if self.opportunity_cost is None else
                {k: _f(v) for k, v in self.opportunity_cost.items()},
            "return_loss": _f(self.return_loss),
            "net_of_cost_series": None if self.net_of_cost_series is None else
                [float(x) for x in self.net_of_cost_series],
            "metadata": self.metadata,
        }


def performance_report(returns, rf=0.0, weights_history=None, trc: float = DEFAULT_TRC,
                       benchmark_returns=None, aversions=DEFAULT_AVERSIONS
                       ) -> PerformanceReport:
    """Assemble the full measure block; undefined measures become None.

    `benchmark_returns` enables the opportunity-cost block (theta added to the
    benchmark to match this strategy) and the return-loss measure.
    """
    r = check_series(returns, "returns")

    def _try(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (UndefinedMeasureError, ParameterError):
            return None

    mom = _try(moments, r)
    mean = float(r.mean())
    sd = float(r.std(ddof=1)) if r.size > 1 else 0.0
    var95, es95 = var_es(r)
    ceq_map = {}
    for a in aversions:
        ceq_map[f"exponential:{a:g}"] = _try(ceq, r, "exponential", a)
        ceq_map[f"power:{a:g}"] = _try(ceq, r, "power", a)
    pt = net = None
    if weights_history is not None:
        pt, net, _ = turnover_and_costs(weights_history, r, trc)
    oc_map = None
    rloss = None
    if benchmark_returns is not None:
        bench = check_series(benchmark_returns, "benchmark returns")
        oc_map = {}
        for a in aversions:
            oc_map[f"exponential:{a:g}"] = _try(opportunity_cost, bench, r, "exponential", a)
            oc_map[f"power:{a:g}"] = _try(opportunity_cost, bench, r, "power", a)
        rloss = _try(return_loss, r if net is None else net, bench)
    return PerformanceReport(
        average=mean,
        standard_deviation=sd,
        skewness=None if mom is None else mom[2],
        kurtosis=None if mom is None else mom[3],
        sharpe=_try(sharpe, r, rf),
        downside_sharpe=_try(downside_sharpe, r, rf),
        var95=var95,
        es95=es95,
        up_ratio=_try(up_ratio, r, rf),
        turnover=pt,
        ceq=ceq_map,
        opportunity_cost=oc_map,
        return_loss=rloss,
        net_of_cost_series=net,
        metadata={
            "units": "monthly decimal returns",
            "quantile_convention": "lower order statistic, no interpolation",
            "kurtosis_convention": "excess",
            "ceq_utilities": "exponential u(w)=-exp(-a w); power u(w)=w^(1-g)/(1-g)",
            "trc": trc,
        },
    )

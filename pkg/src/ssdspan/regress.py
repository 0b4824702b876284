"""OLS factor regressions of excess returns with plain or Newey-West errors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ParameterError
from .validation import check_series


@dataclass
class RegressionResult:
    names: list[str]
    params: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    residuals: np.ndarray
    fitted: np.ndarray
    df_resid: int
    se_kind: str
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "names": self.names,
            "coef": [float(x) for x in self.params],
            "std_error": [float(x) for x in self.std_errors],
            "t_stat": [float(x) for x in self.t_stats],
            "p_value": [float(x) for x in self.p_values],
            "r_squared": float(self.r_squared),
            "df_resid": int(self.df_resid),
            "se_kind": self.se_kind,
            "metadata": self.metadata,
        }


def default_nw_lags(n_obs: int) -> int:
    return int(math.floor(0.75 * n_obs ** (1.0 / 3.0)))


def ols(y, x, se_kind: str = "plain", nw_lags: int | None = None,
        add_intercept: bool = True, names: list[str] | None = None) -> RegressionResult:
    """Least-squares fit of y on x with an intercept.

    `se_kind` is "plain" (homoskedastic) or "newey_west" (HAC with Bartlett
    weights, default lag floor(0.75 T^(1/3))). Two-sided p-values use the t
    distribution with T - k degrees of freedom. Rank-deficient designs raise
    with the offending columns named.
    """
    yv = check_series(y, "dependent variable")
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != yv.size:
        raise ParameterError(f"y has {yv.size} rows, x has {X.shape[0]}")
    if not np.isfinite(X).all():
        raise ParameterError("factor matrix contains non-finite values")
    n_factors = X.shape[1]
    if names is None:
        names = [f"x{i + 1}" for i in range(n_factors)]
    if len(names) != n_factors:
        raise ParameterError("one name per factor column required")
    if add_intercept:
        design = np.column_stack([np.ones(yv.size), X])
        names = ["const"] + list(names)
    else:
        design = X
        names = list(names)
    T, k = design.shape
    if T <= k:
        raise ParameterError(f"need more than {k} observations, got {T}")

    # column-pivoted QR exposes which columns are collinear
    from scipy.linalg import qr

    _, Rtri, piv = qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rtri))
    tol = diag.max() * max(T, k) * np.finfo(float).eps if diag.size else 0.0
    rank = int((diag > tol).sum())
    if rank < k:
        bad = [names[j] for j in piv[rank:]]
        raise ParameterError(f"design matrix is rank deficient; collinear columns: {bad}")

    beta, _, _, _ = np.linalg.lstsq(design, yv, rcond=None)
    fitted = design @ beta
    resid = yv - fitted
    df = T - k
    xtx_inv = np.linalg.inv(design.T @ design)
    if se_kind == "plain":
        sigma2 = float(resid @ resid) / df
        cov = sigma2 * xtx_inv
    elif se_kind == "newey_west":
        lags = default_nw_lags(T) if nw_lags is None else int(nw_lags)
        if lags < 0:
            raise ParameterError("nw_lags must be nonnegative")
        xe = design * resid[:, None]
        S = xe.T @ xe
        for lag in range(1, lags + 1):
            gamma = xe[lag:].T @ xe[:-lag]
            S += (1.0 - lag / (lags + 1.0)) * (gamma + gamma.T)
        cov = xtx_inv @ S @ xtx_inv
    else:
        raise ParameterError(f"unknown se_kind {se_kind!r}")

    se = np.sqrt(np.diag(cov))
    tstat = beta / se
    pval = 2.0 * stats.t.sf(np.abs(tstat), df)
    tss = float(((yv - yv.mean()) ** 2).sum()) if add_intercept else float((yv ** 2).sum())
    rss = float(resid @ resid)
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    return RegressionResult(
        names=names, params=beta, std_errors=se, t_stats=tstat, p_values=pval,
        r_squared=r2, residuals=resid, fitted=fitted, df_resid=df, se_kind=se_kind,
        metadata={"nw_lags": (default_nw_lags(T) if nw_lags is None else nw_lags)
                  if se_kind == "newey_west" else None},
    )

"""Input validation helpers shared by the estimator API and the functional core."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .panel import ReturnPanel


def check_returns_matrix(X) -> np.ndarray:
    """Coerce to a finite 2-D float matrix of returns (T x p)."""
    if isinstance(X, ReturnPanel):
        if not X.fully_observed:
            raise ParameterError("panel has missing cells; window_and_filter it first")
        return X.values
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ParameterError(f"expected a T x p return matrix, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParameterError(f"empty return matrix of shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ParameterError("return matrix contains non-finite values")
    return arr


def asset_names_of(X, p: int) -> tuple[str, ...]:
    if isinstance(X, ReturnPanel):
        return X.assets
    return tuple(f"A{i + 1}" for i in range(p))


def check_series(x, name: str = "series") -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise ParameterError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def check_simplex_weights(w, tol: float = 1e-6, name: str = "weights") -> np.ndarray:
    arr = np.asarray(w, dtype=float).ravel()
    if arr.size == 0:
        raise ParameterError(f"{name} is empty")
    if arr.min() < -tol or abs(arr.sum() - 1.0) > tol:
        raise ParameterError(f"{name} is off the simplex (sum={arr.sum():.8f}, min={arr.min():.2e})")
    return arr

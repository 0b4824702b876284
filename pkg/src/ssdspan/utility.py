"""Outcome grid and the finite class of piecewise-linear concave utilities.

Each utility is a convex mixture of ramp functions r(y; x) = (y - x) 1(y <= x)
anchored at the grid points, with mixture weights on a rational lattice. On
the grid's span every utility also equals the minimum of its supporting lines
(slope/intercept pairs), which is what the LP engine consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np

from .errors import DegenerateSupportError, ParameterError
from .panel import SupportBounds


@dataclass(frozen=True)
class OutcomeGrid:
    """Equally spaced outcome levels z_1 < ... < z_{n1}."""

    points: np.ndarray
    n1: int

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        if self.n1 != points.size or self.n1 < 2:
            raise ParameterError("grid size must match points and be >= 2")

    @property
    def lower(self) -> float:
        return float(self.points[0])

    @property
    def upper(self) -> float:
        return float(self.points[-1])


def build_grid(bounds: SupportBounds, n1: int) -> OutcomeGrid:
    """Partition [lower, upper] into n1 equally spaced outcome levels."""
    if n1 < 2:
        raise ParameterError(f"n1 must be >= 2, got {n1}")
    if bounds.lower == bounds.upper:
        raise DegenerateSupportError(
            f"degenerate support [{bounds.lower}, {bounds.upper}]: grid needs lower < upper"
        )
    steps = np.arange(n1, dtype=float) / (n1 - 1)
    points = bounds.lower + steps * (bounds.upper - bounds.lower)
    points[0] = bounds.lower
    points[-1] = bounds.upper
    return OutcomeGrid(points=points, n1=n1)


@dataclass(frozen=True)
class RussellSeoUtility:
    """One mixture utility u(y) = sum_n v_n (y - z_n) 1(y <= z_n).

    Weights are stored as exact integer numerators over a common denominator
    (n2 - 1) so enumeration never drifts; floats are derived on demand.
    """

    numerators: tuple[int, ...]
    denominator: int
    grid: OutcomeGrid

    def __post_init__(self):
        if self.denominator < 1:
            raise ParameterError("weight denominator must be >= 1")
        if len(self.numerators) != self.grid.n1:
            raise ParameterError("one weight per grid point required")
        if sum(self.numerators) != self.denominator or min(self.numerators) < 0:
            raise ParameterError("weights must be nonnegative and sum to one")

    @cached_property
    def weights(self) -> np.ndarray:
        v = np.array(self.numerators, dtype=float) / self.denominator
        v.setflags(write=False)
        return v

    @cached_property
    def slopes(self) -> np.ndarray:
        """c1_n = sum_{m >= n} v_m; non-increasing with c1_1 = 1."""
        c1 = np.cumsum(self.weights[::-1])[::-1].copy()
        c1.setflags(write=False)
        return c1

    @cached_property
    def intercepts(self) -> np.ndarray:
        """c0_n = -sum_{m >= n} v_m z_m, so line_n(y) = c1_n y + c0_n."""
        c0 = -np.cumsum((self.weights * self.grid.points)[::-1])[::-1].copy()
        c0.setflags(write=False)
        return c0

    @cached_property
    def active(self) -> np.ndarray:
        """Indices (0-based) of the active line set: {n : v_n > 0} plus the top."""
        idx = [n for n, m in enumerate(self.numerators) if m > 0]
        if idx[-1] != self.grid.n1 - 1:
            idx.append(self.grid.n1 - 1)
        out = np.array(idx, dtype=int)
        out.setflags(write=False)
        return out

    @property
    def is_null(self) -> bool:
        """True when the utility vanishes on the whole grid span (v = e_1)."""
        return self.numerators[0] == self.denominator

    def __call__(self, y):
        return evaluate_utility(self, y)


def utility_count(n1: int, n2: int) -> int:
    """Closed-form size of the utility class for grid parameters (n1, n2)."""
    if n1 < 2 or n2 < 2:
        raise ParameterError("n1 and n2 must both be >= 2")
    return comb(n1 + n2 - 2, n1 - 1)


def enumerate_utilities(grid: OutcomeGrid, n2: int) -> list[RussellSeoUtility]:
    """All lattice mixtures over the grid, in lexicographic weight order."""
    if n2 < 2:
        raise ParameterError(f"n2 must be >= 2, got {n2}")
    denom = n2 - 1
    n1 = grid.n1
    out: list[RussellSeoUtility] = []

    def rec(prefix: list[int], remaining: int, slots: int):
        if slots == 1:
            out.append(RussellSeoUtility(tuple(prefix + [remaining]), denom, grid))
            return
        for m in range(remaining + 1):
            rec(prefix + [m], remaining - m, slots - 1)

    rec([], denom, n1)
    assert len(out) == utility_count(n1, n2)
    return out


def evaluate_utility(u: RussellSeoUtility, y):
    """u(y) = sum_n v_n (y - z_n) 1(y <= z_n); ramps extend linearly below the grid."""
    arr = np.asarray(y, dtype=float)
    z = u.grid.points
    ramps = (arr[..., None] - z) * (arr[..., None] <= z)
    val = ramps @ u.weights
    return float(val) if np.isscalar(y) or arr.ndim == 0 else val


def min_of_lines(u: RussellSeoUtility, y):
    """Equivalent evaluation min_{n active} (c1_n y + c0_n); valid on the grid span."""
    arr = np.asarray(y, dtype=float)
    act = u.active
    lines = u.slopes[act] * arr[..., None] + u.intercepts[act]
    val = lines.min(axis=-1)
    return float(val) if np.isscalar(y) or arr.ndim == 0 else val


def ramp_means(values: np.ndarray, grid: OutcomeGrid) -> np.ndarray:
    """Matrix M[n, i] = (1/T) sum_t (X_ti - z_n) 1(X_ti <= z_n).

    Expected utility of holding column i alone is then (weights @ M)[i];
    used to batch single-asset evaluations across every utility at once.
    """
    X = np.asarray(values, dtype=float)
    z = grid.points
    T = X.shape[0]
    out = np.empty((grid.n1, X.shape[1]))
    for n in range(grid.n1):
        diff = X - z[n]
        out[n] = np.where(diff <= 0, diff, 0.0).sum(axis=0) / T
    return out

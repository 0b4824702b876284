"""Forward stepwise selection of sparse spanning supports and the loss curve.

The engine measures, for a candidate support S, the diversification loss

    loss(S) = max over the utility class of
              [ max_{lam in simplex} E u(X'lam) - max_{kappa on S} E u(X'kappa) ],

and greedily grows S one asset at a time, always adding the asset whose
inclusion lowers the loss the most (ties to the lowest asset index). Gaps are
non-increasing along the greedy path, which allows an exact early stop: when
candidates are scanned in descending order of the gaps' current upper bounds,
the running maximum bounds everything still unscanned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import EmptyUniverseError, NumericalError, ParameterError
from .lp import max_expected_utility, segment_refine
from .panel import array_bounds
from .utility import OutcomeGrid, RussellSeoUtility, build_grid, enumerate_utilities, ramp_means
from .validation import asset_names_of, check_returns_matrix

_NEG_LOSS_FLOOR = -1e-9   # losses below this indicate a solver failure
_UB_SLACK = 1e-10         # safety slack on the monotone-gap early stop


@dataclass
class SpanningConfig:
    """Knobs for one greedy selection run."""

    q_max: int
    iteration_cap: int | None = None      # defaults to ceil(q * ln(T + 1))
    loss_tolerance: float = 1e-6
    n1: int = 10
    n2: int = 5
    theory_mode: bool = False             # iterate past q_max up to the cap
    backend: str = "dual"

    def __post_init__(self):
        if self.q_max < 1:
            raise ParameterError(f"q_max must be >= 1, got {self.q_max}")
        if self.loss_tolerance < 0:
            raise ParameterError("loss_tolerance must be nonnegative")
        if self.n1 < 2 or self.n2 < 2:
            raise ParameterError("n1 and n2 must be >= 2")

    def resolved_cap(self, n_periods: int) -> int:
        cap = self.iteration_cap
        if cap is None:
            cap = math.ceil(self.q_max * math.log(n_periods + 1))
        if cap < self.q_max:
            raise ParameterError(f"iteration_cap {cap} below q_max {self.q_max}")
        return cap


@dataclass
class TraceStep:
    asset_index: int
    asset_name: str
    loss_after: float


@dataclass
class SpanningResult:
    """Selected support with its diversification loss and greedy trace."""

    support: list[int]                 # asset indices in selection order
    asset_names: list[str]
    loss: float
    trace: list[TraceStep]
    binding_utility: int | None       # index of the utility attaining the loss
    per_utility_full: np.ndarray | None = None
    per_utility_sparse: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "schema_version": 1,
            "support_indices": list(map(int, self.support)),
            "support": list(self.asset_names),
            "loss": float(self.loss),
            "binding_utility": None if self.binding_utility is None else int(self.binding_utility),
            "trace": [
                {"asset_index": int(s.asset_index), "asset": s.asset_name,
                 "loss_after": float(s.loss_after)}
                for s in self.trace
            ],
            "metadata": self.metadata,
        }
        if self.per_utility_full is not None:
            out["per_utility"] = {
                "full": [float(v) for v in self.per_utility_full],
                "sparse": [float(v) for v in self.per_utility_sparse],
            }
        return out


@dataclass
class LossCurve:
    """Diversification loss along the greedy path, per requested sparsity."""

    q_values: list[int]
    losses: list[float]
    supports: list[list[int]]
    asset_names: list[str]
    confidence_intervals: list | None = None

    def to_dict(self) -> dict:
        out = {
            "schema_version": 1,
            "q": list(map(int, self.q_values)),
            "loss": [float(x) for x in self.losses],
            "supports": [list(map(int, s)) for s in self.supports],
            "support_names": [[self.asset_names[i] for i in s] for s in self.supports],
        }
        if self.confidence_intervals is not None:
            out["confidence_intervals"] = [
                None if ci is None else {"lower": ci.lower, "upper": ci.upper}
                for ci in self.confidence_intervals
            ]
        return out


class _WarmCache:
    """Per-utility solve artifacts reused across supports.

    Stores the last optimizer (keyed by asset index, for warm starts) and the
    last optimal dual (for column-pricing certificates).
    """

    def __init__(self):
        self._weights: dict[int, dict[int, float]] = {}
        self._duals: dict[int, tuple[np.ndarray, float]] = {}

    def get(self, u_idx: int, support: list[int]) -> np.ndarray | None:
        entry = self._weights.get(u_idx)
        if entry is None:
            return None
        lam = np.array([entry.get(a, 0.0) for a in support])
        s = lam.sum()
        return lam / s if s > 1e-12 else None

    def put(self, u_idx: int, support: list[int], weights: np.ndarray,
            dual: tuple[np.ndarray, float] | None = None) -> None:
        self._weights[u_idx] = {a: float(wi) for a, wi in zip(support, weights)}
        if dual is not None:
            self._duals[u_idx] = dual

    def dual(self, u_idx: int) -> tuple[np.ndarray, float] | None:
        return self._duals.get(u_idx)

    def has_dual(self, u_idx: int) -> bool:
        return u_idx in self._duals

    def seed_duals(self, pi_rows: np.ndarray, h_vec: np.ndarray) -> None:
        for u_idx in range(pi_rows.shape[0]):
            self._duals.setdefault(u_idx, (pi_rows[u_idx], float(h_vec[u_idx])))


def _clamped(loss: float) -> float:
    if loss < _NEG_LOSS_FLOOR:
        raise NumericalError(f"computed loss {loss} below tolerance floor; LP engine inconsistent")
    return max(loss, 0.0)


def _candidate_gap_bounds(X, J, support, warm, order, limit: int = 24):
    """Vectorized lower bounds on loss(S + {j}) for every candidate j.

    Uses the stored optimal duals of the highest-upper-bound utilities: for a
    dual (pi, h) of utility u, K_u(S + {j}) <= max over S + {j} of (X'pi)_i
    minus h, so J_u + h minus that expression lower-bounds the candidate
    loss. Any subset of utilities gives a valid bound.
    """
    p = X.shape[1]
    out = np.full(p, -np.inf)
    used = 0
    for u_idx in order:
        if used >= limit:
            break
        dual = warm.dual(int(u_idx))
        if dual is None:
            continue
        used += 1
        pi_bar, h = dual
        g = X.T @ pi_bar
        maxg_s = float(g[support].max())
        np.maximum(out, J[u_idx] + h - np.maximum(maxg_s, g), out)
    return out


def full_universe_optima(returns, utilities: list[RussellSeoUtility],
                         backend: str = "dual") -> np.ndarray:
    """Optimal expected utility over the whole universe, one value per utility.

    Utilities are solved in order with the previous optimizer as warm start;
    neighbours in the lexicographic enumeration have nearby optima.
    """
    X = check_returns_matrix(returns)
    out = np.empty(len(utilities))
    warm = None
    for i, u in enumerate(utilities):
        sol = max_expected_utility(X, u, backend=backend, warm_lambda=warm)
        if sol.status != "optimal":
            raise NumericalError(f"full-universe LP failed for utility {i}: {sol.status}")
        out[i] = sol.value
        if sol.weights.size == X.shape[1]:
            warm = sol.weights
    return out


def sparse_optima(returns, utilities: list[RussellSeoUtility], support,
                  backend: str = "dual") -> np.ndarray:
    """Optimal expected utility restricted to `support`, one value per utility."""
    X = check_returns_matrix(returns)
    support = list(map(int, support))
    out = np.empty(len(utilities))
    warm = None
    for i, u in enumerate(utilities):
        sol = max_expected_utility(X, u, support=support, backend=backend, warm_lambda=warm)
        if sol.status != "optimal":
            raise NumericalError(f"sparse LP failed for utility {i} on {support}: {sol.status}")
        out[i] = sol.value
        warm = sol.weights if sol.weights.size == len(support) else None
    return out


def loss_of_support(returns, utilities: list[RussellSeoUtility], full_optima,
                    support, backend: str = "dual") -> float:
    """max over utilities of (full optimum - support-restricted optimum)."""
    if len(list(support)) == 0:
        raise ParameterError("support must be non-empty")
    K = sparse_optima(returns, utilities, support, backend=backend)
    J = np.asarray(full_optima, dtype=float)
    return _clamped(float((J - K).max()))


_MISSING = object()


class _IterationCertificates:
    """Column-pricing bounds per utility on the current support, built lazily.

    A stored optimal dual (pi, h) of an earlier solve of utility u stays
    feasible for every superset support, so h - max_{i in S+{j}} (X'pi)_i
    lower-bounds the minimal weighted LPM there and J_u plus it lower-bounds
    the gap. When candidate j prices out (its column value below the max over
    S), the bound collapses to the exact gap at the dual's own support, so no
    LP is needed.
    """

    def __init__(self, X, J, support, warm: _WarmCache):
        self.X = X
        self.J = J
        self.support = support
        self.warm = warm
        self._cache: dict[int, tuple | None] = {}

    def gap_lower_bound(self, u_idx: int, cand: int) -> float:
        cert = self._cache.get(u_idx, _MISSING)
        if cert is _MISSING:
            dual = self.warm.dual(u_idx)
            if dual is None:
                cert = None
            else:
                pi_bar, h = dual
                g = self.X.T @ pi_bar
                cert = (g, h, float(g[self.support].max()))
            self._cache[u_idx] = cert
        if cert is None:
            return -np.inf
        g, h, maxg_s = cert
        return self.J[u_idx] + h - max(maxg_s, float(g[cand]))


def _evaluate_candidate(X, utilities, J, support, ub, order, best_loss, best_j,
                        cand_j, warm: _WarmCache, certs: _IterationCertificates,
                        backend: str):
    """Exact loss of `support`, early-stopped via monotone gap upper bounds.

    Returns (loss, gaps_found, binding_idx, abandoned). Scanning in descending
    ub order lets the running max certify the loss before every utility is
    solved. A utility whose certificate bound meets its upper bound is scored
    without an LP (the candidate column prices out). A candidate is abandoned
    once it provably cannot win: its running max already exceeds the incumbent
    loss, or matches it while the incumbent has the lower asset index (the tie
    rule), so correctness is independent of the order candidates are visited.
    """
    run_max = 0.0
    binding = None
    gaps: dict[int, float] = {}
    T = X.shape[0]
    for u_idx in order:
        if run_max >= ub[u_idx] - _UB_SLACK:
            break  # every unscanned gap is <= its ub <= run_max (+slack)
        if run_max > best_loss or (run_max >= best_loss and cand_j > best_j):
            return run_max, gaps, binding, True
        lb_gap = certs.gap_lower_bound(u_idx, cand_j)
        ub_gap = ub[u_idx]
        warm_lam = warm.get(u_idx, support)
        if warm_lam is not None and ub_gap - lb_gap > _UB_SLACK:
            # exact line search from the cached optimizer toward the new
            # asset: achievable value, so it tightens the gap from above,
            # and it leaves a near-optimal warm start when a solve is needed
            u = utilities[u_idx]
            v = u.weights
            nz = np.nonzero(v)[0]
            warm_lam, seg_val = segment_refine(
                X[:, support], u.grid.points[nz], v[nz] / T, warm_lam, len(support) - 1)
            ub_gap = min(ub_gap, J[u_idx] + seg_val)
        if ub_gap - lb_gap <= _UB_SLACK:
            # gap pinned between certificate and achievable value; no solve
            if lb_gap > run_max:
                run_max = lb_gap
                binding = u_idx
            continue
        sol = max_expected_utility(X, utilities[u_idx], support=support, backend=backend,
                                   warm_lambda=warm_lam)
        if sol.status != "optimal":
            raise NumericalError(f"LP failed for utility {u_idx} on {support}")
        warm.put(u_idx, support, sol.weights, sol.dual)
        gap = J[u_idx] - sol.value
        gaps[u_idx] = gap
        if gap > run_max:
            run_max = gap
            binding = u_idx
    return run_max, gaps, binding, False


def fss_select(returns, config: SpanningConfig, utilities=None, grid: OutcomeGrid | None = None,
               full_optima=None, compute_per_utility: bool = True) -> SpanningResult:
    """Greedy forward selection of a sparse spanning support.

    Starts from the empty set; each iteration adds the asset minimizing the
    resulting loss. Stops at loss <= tolerance, at q_max assets, or at the
    iteration cap in theory mode.
    """
    X = check_returns_matrix(returns)
    names = asset_names_of(returns, X.shape[1])
    T, p = X.shape
    if p < 1:
        raise EmptyUniverseError("no assets to select from")
    if grid is None:
        grid = build_grid(array_bounds(X), config.n1)
    if utilities is None:
        utilities = enumerate_utilities(grid, config.n2)
    J = full_universe_optima(X, utilities, config.backend) if full_optima is None \
        else np.asarray(full_optima, dtype=float)

    limit = config.resolved_cap(T) if config.theory_mode else config.q_max

    # first pick in closed form: single-asset expected utilities for all
    # utilities at once via the ramp-mean matrix
    V = np.stack([u.weights for u in utilities])
    eu_single = V @ ramp_means(X, grid)               # (n_utilities, p)
    losses1 = (J[:, None] - eu_single).max(axis=0)
    j0 = int(np.argmin(losses1))
    support = [j0]
    gap_vec = J - eu_single[:, j0]
    binding = int(np.argmax(gap_vec))
    loss = _clamped(float(gap_vec[binding]))
    ub = gap_vec.copy()                               # valid upper bounds: gaps shrink with S
    warm = _WarmCache()
    # exact duals of every utility's single-asset program on j0 seed the
    # column-pricing certificates
    below = (X[:, j0][None, :] <= grid.points[:, None]).astype(float)
    warm.seed_duals((V / T) @ below, V @ (grid.points * below.sum(axis=1)) / T)
    trace = [TraceStep(j0, names[j0], loss)]

    # certificate bounds prune candidates before any LP runs; the visiting
    # order (most promising bound first) only affects speed, never the
    # selection, thanks to the tie-aware abandonment inside the evaluator
    in_support = np.zeros(p, dtype=bool)
    in_support[j0] = True
    while len(support) < limit and loss > config.loss_tolerance:
        order = np.argsort(-ub, kind="stable")
        gap_lb = _candidate_gap_bounds(X, J, support, warm, order)
        cands = sorted((j for j in range(p) if not in_support[j]),
                       key=lambda j: (gap_lb[j], j))
        certs = _IterationCertificates(X, J, support, warm)
        best_j, best_loss, best_gaps, best_binding = -1, np.inf, None, None
        for j in cands:
            if gap_lb[j] > best_loss + 1e-10:
                continue  # provably cannot beat the incumbent
            cand_loss, gaps, cand_binding, abandoned = _evaluate_candidate(
                X, utilities, J, support + [j], ub, order, best_loss, best_j, j,
                warm, certs, config.backend)
            if abandoned:
                continue
            if cand_loss < best_loss or (cand_loss == best_loss and j < best_j):
                best_j, best_loss, best_gaps, best_binding = j, cand_loss, gaps, cand_binding
        if best_j < 0:
            raise NumericalError("no admissible candidate found; should not happen")
        support.append(best_j)
        in_support[best_j] = True
        for u_idx, gap in best_gaps.items():
            ub[u_idx] = gap
        loss = _clamped(best_loss)
        binding = best_binding if best_binding is not None else binding
        trace.append(TraceStep(best_j, names[best_j], loss))

    per_full = per_sparse = None
    if compute_per_utility:
        per_sparse = sparse_optima(X, utilities, support, backend=config.backend)
        per_full = J.copy()
        gap_vec = per_full - per_sparse
        binding = int(np.argmax(gap_vec))
        loss = _clamped(float(gap_vec[binding]))
        if trace:
            trace[-1] = TraceStep(trace[-1].asset_index, trace[-1].asset_name, loss)

    meta = {
        "mode": "theory" if config.theory_mode else "empirical",
        "q_max": config.q_max,
        "iteration_cap": config.resolved_cap(T),
        "loss_tolerance": config.loss_tolerance,
        "n1": config.n1,
        "n2": config.n2,
        "n_periods": T,
        "n_assets": p,
        "backend": config.backend,
        "grid_lower": grid.lower,
        "grid_upper": grid.upper,
    }
    return SpanningResult(
        support=support, asset_names=[names[i] for i in support], loss=loss,
        trace=trace, binding_utility=binding,
        per_utility_full=per_full, per_utility_sparse=per_sparse, metadata=meta,
    )


def loss_curve(returns, q_values, config: SpanningConfig) -> LossCurve:
    """Loss per sparsity level along one nested greedy path."""
    qs = sorted(set(int(q) for q in q_values))
    if not qs or qs[0] < 1:
        raise ParameterError("q_values must be positive integers")
    X = check_returns_matrix(returns)
    names = asset_names_of(returns, X.shape[1])
    cfg = SpanningConfig(
        q_max=max(qs), iteration_cap=config.iteration_cap,
        loss_tolerance=config.loss_tolerance, n1=config.n1, n2=config.n2,
        theory_mode=False, backend=config.backend,
    )
    result = fss_select(X, cfg, compute_per_utility=False)
    losses, supports = [], []
    for q in qs:
        k = min(q, len(result.trace))
        losses.append(result.trace[k - 1].loss_after)
        supports.append(result.support[:k])
    return LossCurve(q_values=qs, losses=losses, supports=supports,
                     asset_names=list(names))


def greedy_vs_exhaustive(returns, q: int, config: SpanningConfig) -> dict:
    """Diagnostics comparing the greedy loss to the exhaustive size-q optimum.

    Exponential in p; intended for small instances only.
    """
    from itertools import combinations

    X = check_returns_matrix(returns)
    p = X.shape[1]
    grid = build_grid(array_bounds(X), config.n1)
    utilities = enumerate_utilities(grid, config.n2)
    J = full_universe_optima(X, utilities, config.backend)
    cfg = SpanningConfig(q_max=q, iteration_cap=config.iteration_cap,
                         loss_tolerance=0.0, n1=config.n1, n2=config.n2,
                         backend=config.backend)
    greedy = fss_select(X, cfg, utilities=utilities, grid=grid, full_optima=J,
                        compute_per_utility=False)
    best_loss, best_support = np.inf, None
    for combo in combinations(range(p), q):
        loss = loss_of_support(X, utilities, J, list(combo), backend=config.backend)
        if loss < best_loss:
            best_loss, best_support = loss, list(combo)
    ratio = greedy.loss / best_loss if best_loss > 0 else (1.0 if greedy.loss <= 0 else np.inf)
    return {
        "greedy_loss": greedy.loss,
        "greedy_support": greedy.support,
        "exhaustive_loss": float(best_loss),
        "exhaustive_support": best_support,
        "ratio": float(ratio),
    }


class SparseSpanningSelector(TransformerMixin, BaseEstimator):
    """Greedy sparse-support selector with a scikit-learn estimator surface.

    Fitting selects at most `q_max` columns of the return matrix such that
    portfolios on the selected columns come as close as possible, in maximal
    expected-utility gap over the piecewise-linear concave class, to spanning
    the full universe. `transform` keeps the selected columns.

    Parameters
    ----------
    q_max : int
        Sparsity cap (number of assets allowed in the support).
    n1, n2 : int
        Outcome-grid size and weight-lattice resolution of the utility class.
    loss_tolerance : float
        Loss level treated as spanning; selection stops once reached.
    iteration_cap : int or None
        Iteration budget in theory mode; defaults to ceil(q_max * ln(T + 1)).
    theory_mode : bool
        Allow the support to grow past q_max up to `iteration_cap`.
    backend : str
        LP backend, "dual" (built-in) or "highs" (external adapter).

    Attributes
    ----------
    support_ : bool mask of selected columns, shape (n_features_in_,)
    selected_indices_ : selected column indices in selection order
    loss_ : diversification loss at the final support
    trace_ : list of (asset index, loss after adding it)
    result_ : the full SpanningResult
    """

    def __init__(self, q_max: int = 10, n1: int = 10, n2: int = 5,
                 loss_tolerance: float = 1e-6, iteration_cap: int | None = None,
                 theory_mode: bool = False, backend: str = "dual"):
        self.q_max = q_max
        self.n1 = n1
        self.n2 = n2
        self.loss_tolerance = loss_tolerance
        self.iteration_cap = iteration_cap
        self.theory_mode = theory_mode
        self.backend = backend

    def _config(self) -> SpanningConfig:
        return SpanningConfig(
            q_max=self.q_max, iteration_cap=self.iteration_cap,
            loss_tolerance=self.loss_tolerance, n1=self.n1, n2=self.n2,
            theory_mode=self.theory_mode, backend=self.backend,
        )

    def fit(self, X, y=None):
        values = check_returns_matrix(X)
        result = fss_select(X, self._config(), compute_per_utility=False)
        self.n_features_in_ = values.shape[1]
        self.result_ = result
        self.selected_indices_ = np.array(result.support, dtype=int)
        mask = np.zeros(values.shape[1], dtype=bool)
        mask[self.selected_indices_] = True
        self.support_ = mask
        self.loss_ = result.loss
        self.trace_ = [(s.asset_index, s.loss_after) for s in result.trace]
        return self

    def get_support(self, indices: bool = False):
        if indices:
            return self.selected_indices_.copy()
        return self.support_.copy()

    def transform(self, X):
        if not hasattr(self, "support_"):
            raise ParameterError("selector is not fitted")
        values = check_returns_matrix(X)
        if values.shape[1] != self.n_features_in_:
            raise ParameterError(
                f"X has {values.shape[1]} columns, fit saw {self.n_features_in_}")
        return values[:, self.support_]

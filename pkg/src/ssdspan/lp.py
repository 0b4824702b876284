"""Expected-utility maximization over the portfolio simplex, plus LPM evaluation.

The empirical program max over simplex portfolios of (1/T) sum_t u(X_t'lam)
is, for a ramp-mixture utility, equivalent to minimizing a weighted sum of
lower partial moments:

    min over lam in the simplex of  sum_k w_k sum_t (z_k - X_t'lam)_+ .

The production path solves the dual of that program

    max sum_{t,k} z_k x_tk + mu
    s.t. sum_{t,k} R_ti x_tk + mu <= 0 for every allowed asset i,
         0 <= x_tk <= w_k,

whose row duals at the optimum are the optimal portfolio. Only (scenario,
threshold) pairs with the threshold strictly inside the scenario's
cross-sectional return range are genuine variables; the rest are fixed at
their optimal bound up front. Three deterministic stages are tried in order:

1. zero certificate: when a portfolio clears every ambiguous threshold the
   optimum is exactly 0 (the objective is nonnegative), no LP needed;
2. a bounded-variable revised simplex with vectorized pricing (basis has one
   row per asset, so scenario count never enters the basis), with Bland's
   rule after a degeneracy streak and a stall bailout;
3. the external HiGHS adapter on the same dual.

The canonical primal form (epigraph variable per scenario, one
constraint per scenario and active line) is also built explicitly, both for
plain-text instance dumps and as an independent cross-check backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ParameterError
from .panel import ReturnPanel
from .utility import RussellSeoUtility, evaluate_utility

_RC_TOL = 1e-10          # reduced-cost optimality tolerance
_BLAND_AFTER = 40        # consecutive degenerate pivots before Bland's rule
_STALL_LIMIT = 350       # iterations without objective progress before bailing


@dataclass
class LpSolution:
    """Result of one expected-utility maximization.

    `dual` carries the optimal dual of the weighted-LPM program as a pair
    (scenario weights pi summed over thresholds, objective mass sum pi z);
    downstream pricing uses it to certify that candidate assets cannot
    improve the optimum.
    """

    value: float
    weights: np.ndarray
    support: np.ndarray
    status: str
    iterations: int = 0
    backend: str = "dual-simplex"
    dual: tuple[np.ndarray, float] | None = None

    def full_weights(self, n_assets: int) -> np.ndarray:
        out = np.zeros(n_assets)
        out[self.support] = self.weights
        return out


def _as_values(returns) -> np.ndarray:
    if isinstance(returns, ReturnPanel):
        return returns.values
    return np.asarray(returns, dtype=float)


def _weights_on(panel_width: int, weights, support=None) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if support is not None:
        full = np.zeros(panel_width)
        full[np.asarray(support, dtype=int)] = w
        return full
    if w.shape != (panel_width,):
        raise ParameterError(f"weights of length {w.size} for {panel_width} assets")
    return w


def lpm(returns, weights, z: float, support=None) -> float:
    """Empirical lower partial moment (1/T) sum_t (z - X_t'lam)_+."""
    X = _as_values(returns)
    lam = _weights_on(X.shape[1], weights, support)
    r = X @ lam
    return float(np.maximum(z - r, 0.0).mean())


def lpmd(returns, kappa, lam, z: float) -> float:
    """Lower partial moment differential: lpm(kappa, z) - lpm(lam, z)."""
    return lpm(returns, kappa, z) - lpm(returns, lam, z)


# ---------------------------------------------------------------------------
# weighted-LPM minimization: preprocessing and solver chain
# ---------------------------------------------------------------------------

def _prepare(R: np.ndarray, z: np.ndarray, w: np.ndarray):
    """Classify (scenario, threshold) pairs; fix non-ambiguous ones at bounds.

    Returns (t_idx, k_idx, q0, const0, pb0) where q0 is the per-asset column
    sum of the variables fixed at their upper bound, const0 their objective
    mass, and pb0 their per-scenario dual weight (part of any optimal dual).
    """
    rmin = R.min(axis=1)
    rmax = R.max(axis=1)
    t_idx_l, k_idx_l = [], []
    T, m = R.shape
    q0 = np.zeros(m)
    pb0 = np.zeros(T)
    const0 = 0.0
    for k in range(z.size):
        zk = z[k]
        up = rmax <= zk
        amb = (~up) & (rmin < zk)
        if up.any():
            q0 += w[k] * R[up].sum(axis=0)
            pb0[up] += w[k]
            const0 += w[k] * zk * int(up.sum())
        if amb.any():
            t_amb = np.nonzero(amb)[0]
            t_idx_l.append(t_amb)
            k_idx_l.append(np.full(t_amb.size, k, dtype=int))
    if t_idx_l:
        return np.concatenate(t_idx_l), np.concatenate(k_idx_l), q0, const0, pb0
    return np.empty(0, dtype=int), np.empty(0, dtype=int), q0, const0, pb0


def _direct_value(R: np.ndarray, z: np.ndarray, w: np.ndarray, lam: np.ndarray) -> float:
    r = R @ lam
    return float(sum(w[k] * np.maximum(z[k] - r, 0.0).sum() for k in range(z.size)))


def _zero_certificate(R: np.ndarray, z: np.ndarray, t_idx: np.ndarray,
                      k_idx: np.ndarray) -> np.ndarray | None:
    """Portfolio with zero objective, or None.

    The objective is a nonnegative sum, so any lam whose returns clear the
    largest ambiguous threshold of every scenario certifies optimum 0.
    Tries equal weight, then a capped multiplicative-weights search for the
    maximin portfolio. The final check is exact float comparison.
    """
    m = R.shape[1]
    scen = np.unique(t_idx)
    need = np.full(scen.size, -np.inf)
    pos = {t: j for j, t in enumerate(scen)}
    for t, k in zip(t_idx, k_idx):
        j = pos[t]
        if z[k] > need[j]:
            need[j] = z[k]
    Rs = R[scen]

    lam = np.full(m, 1.0 / m)
    if (Rs @ lam >= need).all():
        return lam
    p = np.ones(scen.size) / scen.size
    best_lam, best_gap = None, np.inf
    for _ in range(120):
        i = int(np.argmax(p @ Rs))
        lam = 0.85 * lam + 0.15 * np.eye(m)[i]
        slack = Rs @ lam - need
        worst = float(-slack.min())
        if worst <= 0.0:
            return lam
        if worst < best_gap:
            best_gap, best_lam = worst, lam.copy()
        p *= np.exp(np.minimum(-slack * 8.0 / max(np.abs(slack).max(), 1e-12), 30))
        p /= p.sum()
    if best_lam is not None and (Rs @ best_lam >= need).all():
        return best_lam
    return None


def _dual_simplex(R, z, w, t_idx, k_idx, q0, const0, warm_lambda, max_iter, _trace=0):
    """Bounded-variable revised simplex on the dual; returns (lam, iterations).

    Deterministic: Dantzig pricing with first-index ties, leaving ties broken
    by smallest (kind, index), Bland's rule after a degeneracy streak. Raises
    NumericalError when the iteration cap is hit or progress stalls.
    """
    T, m = R.shape
    na = t_idx.size
    ub = w[k_idx]
    scale = max(1.0, float(np.max(np.abs(z))))
    # deterministic tiny perturbations break the massive reduced-cost and
    # ratio ties this scenario structure produces; the caller re-evaluates
    # the returned portfolio directly, so values stay exact to O(1e-10)
    jitter = ((t_idx * 2654435761 + k_idx * 40503) % 65536).astype(float)
    cx = z[k_idx] + 1e-12 * scale * (jitter / 65536.0 - 0.5)
    b_rhs = -1e-12 * scale * np.arange(1, m + 1) / (m + 1.0)

    if warm_lambda is None:
        col_obj = np.zeros(m)
        for k in range(z.size):
            col_obj += w[k] * np.maximum(z[k] - R, 0.0).sum(axis=0)
        lam0 = np.zeros(m)
        lam0[int(np.argmin(col_obj))] = 1.0
    else:
        lam0 = np.asarray(warm_lambda, dtype=float)
    r0 = R @ lam0
    x_status = np.where(r0[t_idx] <= cx, 1, 0).astype(np.int8)  # 0 lower, 1 upper, 2 basic

    def rebuild_q():
        sel = np.nonzero(x_status == 1)[0]
        if sel.size:
            return q0 + (ub[sel, None] * R[t_idx[sel]]).sum(axis=0)
        return q0.copy()

    q = rebuild_q()
    istar = int(np.argmax(q - b_rhs))
    basis_kind = np.empty(m, dtype=int)   # 0 = mu, 1 = slack, 2 = x
    basis_ref = np.empty(m, dtype=int)
    basis_kind[0], basis_ref[0] = 0, -1
    others = [i for i in range(m) if i != istar]
    for p_, i in enumerate(others, start=1):
        basis_kind[p_], basis_ref[p_] = 1, i
    slack_nonbasic = np.zeros(m, dtype=bool)
    slack_nonbasic[istar] = True
    B = np.zeros((m, m))
    B[:, 0] = 1.0
    for p_, i in enumerate(others, start=1):
        B[i, p_] = 1.0

    # incrementally maintained state: sign = +1 at lower, -1 at upper, 0 basic
    # (pricing is rc * sign); cB basic costs; upper-bound objective mass
    sign = np.where(x_status == 1, -1.0, 1.0)
    cB = np.zeros(m)
    cB[0] = 1.0
    up0 = x_status == 1
    upper_mass = float(cx[up0] @ ub[up0])

    def resync():
        nonlocal q, upper_mass
        q = rebuild_q()
        up = x_status == 1
        upper_mass = float(cx[up] @ ub[up])

    degenerate_streak = 0
    stall = 0
    best_obj = -np.inf
    it = 0
    while True:
        it += 1
        if it > max_iter:
            raise NumericalError(f"simplex iteration cap {max_iter} exceeded (T={T}, m={m})")
        if it % 512 == 0:
            resync()  # kill accumulated float drift
        try:
            xB = np.linalg.solve(B, b_rhs - q)
            y = np.linalg.solve(B.T, cB)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular basis in LP solve: {exc}") from None

        obj = const0 + float(cB @ xB) + upper_mass
        if not np.isfinite(best_obj) or obj > best_obj + 1e-14 * max(1.0, abs(best_obj)):
            best_obj = obj
            stall = 0
        else:
            stall += 1
            if stall > _STALL_LIMIT:
                raise NumericalError("dual simplex stalled on a degenerate face")
        if _trace and it % _trace == 0:
            print(f"    it={it} obj={obj:.15f} stall={stall} streak={degenerate_streak} "
                  f"basic_x={int((basis_kind == 2).sum())}")

        ry = R @ y
        if na:
            viol_x = (cx - ry[t_idx]) * sign
            best_x = float(viol_x.max())
        else:
            viol_x = np.empty(0)
            best_x = -np.inf
        viol_s = np.where(slack_nonbasic, -y, -np.inf)
        best_s = float(viol_s.max())
        if max(best_x, best_s) <= _RC_TOL:
            break
        if best_s <= _RC_TOL and best_x > 0:
            # Dantzig bound: remaining improvement from box variables is at
            # most the positive reduced-cost mass times their ranges
            gap_bound = float(np.maximum(viol_x, 0.0) @ ub)
            if gap_bound <= 1e-11 * scale:
                break

        if degenerate_streak >= _BLAND_AFTER:
            jx = int(np.argmax(viol_x > _RC_TOL)) if best_x > _RC_TOL else -1
            js = int(np.argmax(viol_s > _RC_TOL)) if best_s > _RC_TOL else -1
            if jx >= 0:
                enter_kind, enter_ref = 2, jx
            else:
                enter_kind, enter_ref = 1, js
        elif best_x >= best_s:
            enter_kind, enter_ref = 2, int(np.argmax(viol_x))
        else:
            enter_kind, enter_ref = 1, int(np.argmax(viol_s))

        if enter_kind == 2:
            enter_dir = 1 if x_status[enter_ref] == 0 else -1
            a_e = R[t_idx[enter_ref]]
            own_span = ub[enter_ref]
        else:
            enter_dir = 1
            a_e = np.zeros(m)
            a_e[enter_ref] = 1.0
            own_span = np.inf

        h = np.linalg.solve(B, a_e)
        step = enter_dir * h  # basic values move by -step * delta

        deltas = np.full(m, np.inf)
        dn = (step > 1e-13) & (basis_kind != 0)          # heading to lower bound 0
        if dn.any():
            deltas[dn] = np.maximum(xB[dn], 0.0) / step[dn]
        uprow = (step < -1e-13) & (basis_kind == 2)      # basic x heading to its cap
        if uprow.any():
            caps = ub[basis_ref[uprow]]
            deltas[uprow] = np.maximum(caps - xB[uprow], 0.0) / (-step[uprow])
        dmin = float(deltas.min())
        delta_basic = max(dmin, 0.0)
        delta = min(own_span, delta_basic)
        if not np.isfinite(delta):
            raise NumericalError("unbounded dual step; primal should always be feasible")
        degenerate_streak = degenerate_streak + 1 if delta <= 1e-12 else 0

        if own_span <= delta_basic and enter_kind == 2:
            if enter_dir == 1:
                x_status[enter_ref] = 1
                sign[enter_ref] = -1.0
                q += ub[enter_ref] * a_e
                upper_mass += cx[enter_ref] * ub[enter_ref]
            else:
                x_status[enter_ref] = 0
                sign[enter_ref] = 1.0
                q -= ub[enter_ref] * a_e
                upper_mass -= cx[enter_ref] * ub[enter_ref]
            continue

        # leaving tie-break follows the same global variable order as Bland's
        # entering rule (all x variables before slacks), else cycling is possible
        ties = np.nonzero(deltas <= dmin + 1e-15)[0]
        blocking = int(min(
            ties,
            key=lambda p_: basis_ref[p_] if basis_kind[p_] == 2 else na + basis_ref[p_],
        ))
        lk, lr = basis_kind[blocking], basis_ref[blocking]
        if lk == 1:
            slack_nonbasic[lr] = True
        elif lk == 2:
            if step[blocking] < 0:  # basic value was increasing, hits its cap
                x_status[lr] = 1
                sign[lr] = -1.0
                q += ub[lr] * R[t_idx[lr]]
                upper_mass += cx[lr] * ub[lr]
            else:
                x_status[lr] = 0
                sign[lr] = 1.0
        if enter_kind == 2:
            if x_status[enter_ref] == 1:
                q -= ub[enter_ref] * a_e
                upper_mass -= cx[enter_ref] * ub[enter_ref]
            x_status[enter_ref] = 2
            sign[enter_ref] = 0.0
            cB[blocking] = cx[enter_ref]
        else:
            slack_nonbasic[enter_ref] = False
            cB[blocking] = 0.0
        basis_kind[blocking] = enter_kind
        basis_ref[blocking] = enter_ref
        B[:, blocking] = a_e

    lam = np.maximum(y, 0.0)
    total = lam.sum()
    if total <= 0:
        raise NumericalError("degenerate dual multipliers; no portfolio recovered")
    # assemble the optimal dual levels of the ambiguous variables
    vals = np.where(x_status == 1, ub, 0.0)
    for p_ in range(m):
        if basis_kind[p_] == 2:
            ref = basis_ref[p_]
            vals[ref] = min(max(xB[p_], 0.0), ub[ref])
    pi_amb = np.zeros(T)
    np.add.at(pi_amb, t_idx, vals)
    h_amb = float(vals @ z[k_idx])
    return lam / total, it, pi_amb, h_amb


def _dual_highs(R, z, w, t_idx, k_idx, q0):
    """External-solver fallback on the same pruned dual program."""
    from scipy import sparse
    from scipy.optimize import linprog

    T, m = R.shape
    cols = sparse.csc_matrix(R[t_idx].T) if t_idx.size else sparse.csc_matrix((m, 0))
    A = sparse.hstack([cols, sparse.csc_matrix(np.ones((m, 1)))], format="csc")
    c = -np.concatenate([z[k_idx], [1.0]])
    bounds = [(0.0, float(wk)) for wk in w[k_idx]] + [(None, None)]
    res = linprog(c, A_ub=A, b_ub=-q0, bounds=bounds, method="highs")
    if res.status != 0:
        raise NumericalError(f"HiGHS failed on dual LPM program: {res.message}")
    lam = np.maximum(-res.ineqlin.marginals, 0.0)
    total = lam.sum()
    if total <= 0:
        raise NumericalError("HiGHS returned degenerate dual multipliers")
    vals = np.asarray(res.x[:-1], dtype=float)
    pi_amb = np.zeros(T)
    np.add.at(pi_amb, t_idx, vals)
    h_amb = float(vals @ z[k_idx])
    return lam / total, pi_amb, h_amb


def indicator_dual(series: np.ndarray, thresholds: np.ndarray, w: np.ndarray
                   ) -> tuple[np.ndarray, float]:
    """Exact dual of the single-asset program: pi_tk = w_k 1(r_t <= z_k)."""
    below = series[None, :] <= thresholds[:, None]
    pi_bar = w @ below
    h = float(w @ (thresholds * below.sum(axis=1)))
    return pi_bar, h


def segment_refine(R: np.ndarray, thresholds: np.ndarray, w: np.ndarray,
                   lam_base: np.ndarray, direction_col: int, iters: int = 48
                   ) -> tuple[np.ndarray, float]:
    """Minimize the weighted LPM along (1-g) lam_base + g e_col, g in [0, 1].

    The objective is convex piecewise linear in g; bisection on its
    subgradient lands on the minimizing kink. Returns the refined portfolio
    and its exact objective value, an upper bound on the full-simplex
    optimum and usually an excellent warm start after adding one asset.
    """
    r0 = R @ lam_base
    d = R[:, direction_col] - r0

    def subgrad(g):
        r = r0 + g * d
        s = 0.0
        for k in range(thresholds.size):
            active = r < thresholds[k]
            s += w[k] * -(d[active].sum())
        return s

    lo, hi = 0.0, 1.0
    if subgrad(0.0) >= 0.0:
        g_star = 0.0
    elif subgrad(1.0) <= 0.0:
        g_star = 1.0
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if subgrad(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        g_star = 0.5 * (lo + hi)
    lam = (1.0 - g_star) * lam_base
    lam[direction_col] += g_star
    value = float(sum(w[k] * np.maximum(thresholds[k] - (r0 + g_star * d), 0.0).sum()
                      for k in range(thresholds.size)))
    return lam, value


def min_weighted_lpm(R: np.ndarray, thresholds, w,
                     warm_lambda=None, max_iter: int | None = None
                     ) -> tuple[float, np.ndarray, int, tuple[np.ndarray, float]]:
    """Solve min_{lam in simplex} sum_k w_k sum_t (z_k - R_t lam)_+ exactly.

    Returns (optimal value, portfolio weights, simplex iterations, dual),
    where dual = (per-scenario dual weights, their objective mass sum pi z).
    The value is the direct primal evaluation at the certified portfolio; the
    dual certifies it, and prices candidate columns for larger supports.
    """
    R = np.ascontiguousarray(R, dtype=float)
    T, m = R.shape
    z = np.asarray(thresholds, dtype=float)
    w = np.asarray(w, dtype=float)
    if z.ndim != 1 or w.shape != z.shape:
        raise ParameterError("thresholds and weights must be 1-D of equal length")
    if (w <= 0).any():
        raise ParameterError("threshold weights must be positive")
    if m == 1:
        val = float(np.sum(w * np.maximum(z[None, :] - R, 0.0).sum(axis=0)))
        return val, np.ones(1), 0, indicator_dual(R[:, 0], z, w)

    t_idx, k_idx, q0, const0, pb0 = _prepare(R, z, w)
    if t_idx.size == 0:
        # objective is linear in lam: const0 - q0'lam, optimal at a vertex
        i = int(np.argmax(q0))
        lam = np.zeros(m)
        lam[i] = 1.0
        return _direct_value(R, z, w, lam), lam, 0, (pb0, const0)
    if const0 == 0.0:
        lam = _zero_certificate(R, z, t_idx, k_idx)
        if lam is not None:
            return 0.0, lam, 0, (np.zeros(T), 0.0)
    if max_iter is None:
        max_iter = 2000 + 60 * m + 2 * t_idx.size
    try:
        lam, iters, pi_amb, h_amb = _dual_simplex(
            R, z, w, t_idx, k_idx, q0, const0, warm_lambda, max_iter)
    except NumericalError:
        lam, pi_amb, h_amb = _dual_highs(R, z, w, t_idx, k_idx, q0)
        iters = -1
    return _direct_value(R, z, w, lam), lam, iters, (pb0 + pi_amb, const0 + h_amb)


# ---------------------------------------------------------------------------
# canonical primal instance and external-solver adapter
# ---------------------------------------------------------------------------

@dataclass
class UtilityLpInstance:
    """Canonical LP: max (1/T) sum_t y_t s.t. y_t - c1_n (X_t'lam) <= c0_n, lam in simplex."""

    returns: np.ndarray
    support: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    active: np.ndarray
    asset_names: tuple[str, ...] = field(default=None)  # type: ignore[assignment]

    @property
    def n_constraints(self) -> int:
        return self.returns.shape[0] * self.active.size + 1

    @property
    def n_variables(self) -> int:
        return self.returns.shape[0] + self.support.size

    def to_lp_format(self) -> str:
        """Plain-text dump in LP interchange format for external validation."""
        T = self.returns.shape[0]
        names = self.asset_names or tuple(f"a{i}" for i in self.support)
        lines = ["Maximize", " obj: " + " + ".join(f"{1.0 / T:.17g} y{t}" for t in range(T)),
                 "Subject To"]
        R = self.returns[:, self.support]
        for t in range(T):
            for n in self.active:
                c1 = self.slopes[n]
                terms = [f"y{t}"]
                for j, name in enumerate(names):
                    coef = -c1 * R[t, j]
                    terms.append(f"{'+' if coef >= 0 else '-'} {abs(coef):.17g} w_{name}")
                lines.append(f" r{t}_{n}: " + " ".join(terms) + f" <= {self.intercepts[n]:.17g}")
        lines.append(" simplex: " + " + ".join(f"w_{name}" for name in names) + " = 1")
        lines.append("Bounds")
        for t in range(T):
            lines.append(f" y{t} free")
        lines.append("End")
        return "\n".join(lines)


def build_instance(returns, utility: RussellSeoUtility, support=None,
                   asset_names=None) -> UtilityLpInstance:
    X = _as_values(returns)
    if support is None:
        support = np.arange(X.shape[1])
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise ParameterError("support must be non-empty")
    if isinstance(returns, ReturnPanel) and asset_names is None:
        asset_names = tuple(returns.assets[i] for i in support)
    return UtilityLpInstance(
        returns=X, support=support, slopes=utility.slopes,
        intercepts=utility.intercepts, active=utility.active,
        asset_names=asset_names,
    )


def _solve_canonical_highs(instance: UtilityLpInstance) -> LpSolution:
    from scipy import sparse
    from scipy.optimize import linprog

    X = instance.returns
    S = instance.support
    T = X.shape[0]
    act = instance.active
    K = act.size
    mS = S.size
    n_var = T + mS
    rows = np.arange(T * K)
    col_y = np.repeat(np.arange(T), K)
    A_y = sparse.coo_matrix((np.ones(T * K), (rows, col_y)), shape=(T * K, n_var))
    c1 = instance.slopes[act]
    lam_rows = np.repeat(rows, mS)
    lam_cols = np.tile(T + np.arange(mS), T * K)
    coefs = (-np.repeat(np.tile(c1, T), mS) * np.repeat(X[:, S], K, axis=0).ravel())
    A_l = sparse.coo_matrix((coefs, (lam_rows, lam_cols)), shape=(T * K, n_var))
    b = np.tile(instance.intercepts[act], T)
    A_eq = sparse.coo_matrix((np.ones(mS), (np.zeros(mS), T + np.arange(mS))), shape=(1, n_var))
    c = np.concatenate([-np.full(T, 1.0 / T), np.zeros(mS)])
    res = linprog(c, A_ub=(A_y + A_l).tocsc(), b_ub=b, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(None, None)] * T + [(0, None)] * mS, method="highs")
    if res.status != 0:
        return LpSolution(value=np.nan, weights=np.full(mS, np.nan), support=S,
                          status="numerical-failure", backend="highs")
    lam = np.maximum(res.x[T:], 0.0)
    lam /= lam.sum()
    return LpSolution(value=-float(res.fun), weights=lam, support=S,
                      status="optimal", iterations=int(res.nit), backend="highs")


def max_expected_utility(returns, utility: RussellSeoUtility, support=None,
                         backend: str = "dual", warm_lambda=None) -> LpSolution:
    """Maximize empirical expected utility over simplex portfolios on `support`.

    `backend="dual"` uses the specialized deterministic solver chain;
    `backend="highs"` solves the canonical epigraph primal with scipy/HiGHS.
    """
    X = _as_values(returns)
    if not np.isfinite(X).all():
        raise ParameterError("returns must be fully observed for utility maximization")
    if support is None:
        support = np.arange(X.shape[1])
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise ParameterError("support must be non-empty")

    if utility.is_null:
        w = np.full(support.size, 1.0 / support.size)
        return LpSolution(value=0.0, weights=w, support=support, status="optimal",
                          backend="shortcut", dual=(np.zeros(X.shape[0]), 0.0))
    v = utility.weights
    nz = np.nonzero(v)[0]
    z = utility.grid.points[nz]
    w = v[nz] / X.shape[0]
    if support.size == 1:
        series = X[:, support[0]]
        val = float(evaluate_utility(utility, series).mean())
        return LpSolution(value=val, weights=np.ones(1), support=support,
                          status="optimal", backend="shortcut",
                          dual=indicator_dual(series, z, w))
    if backend == "highs":
        return _solve_canonical_highs(build_instance(X, utility, support))
    if backend != "dual":
        raise ParameterError(f"unknown LP backend {backend!r}")

    neg_val, lam, iters, dual = min_weighted_lpm(X[:, support], z, w, warm_lambda=warm_lambda)
    return LpSolution(value=-neg_val, weights=lam, support=support,
                      status="optimal", iterations=iters, backend="dual-simplex",
                      dual=dual)

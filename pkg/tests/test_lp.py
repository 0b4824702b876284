import numpy as np
import pytest

from ssdspan.lp import build_instance, lpm, lpmd, max_expected_utility
from ssdspan.panel import array_bounds
from ssdspan.utility import build_grid, enumerate_utilities, evaluate_utility

from _oracles import brute_force_max_eu

rng = np.random.default_rng(2024)


def random_instance(p=3, T=10, n1=4, n2=3, seed=None):
    r = np.random.default_rng(seed)
    X = r.normal(0.01, 0.06, (T, p))
    grid = build_grid(array_bounds(X), n1)
    return X, grid, enumerate_utilities(grid, n2)


class TestLpm:
    def test_threshold_at_infimum_is_zero(self):
        X = rng.normal(0, 0.05, (30, 3))
        w = np.array([0.2, 0.5, 0.3])
        assert lpm(X, w, float((X @ w).min())) == 0.0

    def test_hand_example(self):
        X = np.array([[-0.1], [0.2]])
        assert lpm(X, [1.0], 0.0) == pytest.approx(0.05, abs=1e-15)

    def test_all_parts_active(self):
        X = rng.normal(0.01, 0.03, (25, 2))
        w = np.array([0.4, 0.6])
        r = X @ w
        z = float(r.max()) + 0.05
        assert lpm(X, w, z) == pytest.approx(z - r.mean(), abs=1e-12)


class TestLpmd:
    def test_identity_portfolio_is_zero(self):
        X = rng.normal(0, 0.05, (20, 3))
        w = np.array([0.3, 0.3, 0.4])
        for z in np.linspace(X.min(), X.max(), 7):
            assert lpmd(X, w, w, float(z)) == 0.0

    def test_pointwise_shift_is_positive(self):
        X = np.empty((12, 2))
        X[:, 0] = rng.normal(0.0, 0.04, 12)
        X[:, 1] = X[:, 0] + 0.01
        kappa = np.array([1.0, 0.0])
        lam = np.array([0.0, 1.0])
        z = float(X[:, 1].max())
        assert lpmd(X, kappa, lam, z) > 0.0

    def test_zero_at_lower_support_bound(self):
        X = rng.normal(0, 0.05, (15, 2))
        assert lpmd(X, [1, 0], [0, 1], float(X.min())) == 0.0

    def test_antisymmetry(self):
        X = rng.normal(0.01, 0.05, (18, 3))
        kappa = np.array([0.5, 0.2, 0.3])
        lam = np.array([0.1, 0.8, 0.1])
        for z in np.linspace(X.min(), X.max(), 5):
            assert lpmd(X, kappa, lam, float(z)) == pytest.approx(
                -lpmd(X, lam, kappa, float(z)), abs=1e-15)


class TestMaxExpectedUtility:
    def test_single_asset_support_is_plain_mean(self):
        X, grid, utils = random_instance(seed=1)
        for u in utils[::4]:
            sol = max_expected_utility(X, u, support=[1])
            assert np.array_equal(sol.weights, [1.0])
            assert sol.value == pytest.approx(
                float(evaluate_utility(u, X[:, 1]).mean()), abs=1e-12)

    def test_duplicated_column_matches_single(self):
        X, grid, utils = random_instance(p=2, seed=2)
        X[:, 1] = X[:, 0]
        for u in utils[::3]:
            solo = max_expected_utility(X, u, support=[0])
            both = max_expected_utility(X, u, support=[0, 1])
            assert both.value == pytest.approx(solo.value, abs=1e-9)

    def test_matches_brute_force_oracle(self):
        X, grid, utils = random_instance(p=3, T=10, seed=3)
        for u in utils[::2]:
            sol = max_expected_utility(X, u)
            oracle = brute_force_max_eu(X, u, step=0.01, refine_step=0.001)
            assert sol.value >= oracle - 1e-9
            assert sol.value == pytest.approx(oracle, abs=1e-4)

    def test_reevaluation_identity(self):
        X, grid, utils = random_instance(p=5, T=40, seed=4)
        for u in utils[::3]:
            sol = max_expected_utility(X, u)
            direct = float(evaluate_utility(u, X @ sol.full_weights(5)).mean())
            assert abs(sol.value - direct) < 1e-7
            assert abs(sol.weights.sum() - 1) < 1e-8
            assert sol.weights.min() > -1e-8

    def test_monotone_in_support(self):
        X, grid, utils = random_instance(p=5, T=25, seed=5)
        for u in utils[::5]:
            small = max_expected_utility(X, u, support=[0, 2])
            big = max_expected_utility(X, u, support=[0, 1, 2, 4])
            assert big.value >= small.value - 1e-9

    def test_cross_backend_agreement(self):
        for seed in range(8):
            X, grid, utils = random_instance(p=4, T=15, n1=5, n2=3, seed=seed)
            for u in utils[:: max(1, len(utils) // 6)]:
                a = max_expected_utility(X, u, backend="dual")
                b = max_expected_utility(X, u, backend="highs")
                assert b.status == "optimal"
                assert a.value == pytest.approx(b.value, abs=1e-9)

    def test_deterministic_repeat(self):
        X, grid, utils = random_instance(p=4, T=30, seed=6)
        u = utils[5]
        first = max_expected_utility(X, u)
        second = max_expected_utility(X, u)
        assert first.value == second.value
        assert np.array_equal(first.weights, second.weights)

    def test_warm_start_does_not_move_value(self):
        X, grid, utils = random_instance(p=5, T=30, seed=7)
        for u in utils[::6]:
            cold = max_expected_utility(X, u)
            warm = max_expected_utility(X, u, warm_lambda=np.full(5, 0.2))
            assert warm.value == pytest.approx(cold.value, abs=1e-9)

    def test_null_utility_short_circuit(self):
        X, grid, utils = random_instance(seed=8)
        u = next(x for x in utils if x.is_null)
        sol = max_expected_utility(X, u)
        assert sol.value == 0.0


class TestUtilityDifferenceForms:
    def test_utility_diff_equals_weighted_lpmd(self):
        X, grid, utils = random_instance(p=4, T=20, seed=9)
        kappa = np.array([0.4, 0.3, 0.2, 0.1])
        lam = np.array([0.1, 0.2, 0.3, 0.4])
        for u in utils:
            udiff = float(evaluate_utility(u, X @ lam).mean()
                          - evaluate_utility(u, X @ kappa).mean())
            weighted = sum(v * lpmd(X, kappa, lam, float(z))
                           for v, z in zip(u.weights, grid.points) if v > 0)
            assert udiff == pytest.approx(weighted, abs=1e-12)

    def test_mixture_sup_dominates_threshold_sup(self):
        # the utility class contains every single-ramp, so its sup-gap weakly
        # exceeds the per-threshold sup of the LPMD objective
        X, grid, utils = random_instance(p=4, T=22, n1=5, n2=3, seed=10)
        support = [0, 1]
        gaps = []
        for u in utils:
            j = max_expected_utility(X, u).value
            k = max_expected_utility(X, u, support=support).value
            gaps.append(j - k)
        thresh_gaps = []
        for z in grid.points:
            from ssdspan.lp import min_weighted_lpm

            j_side, _, _, _ = min_weighted_lpm(X, np.array([z]), np.array([1 / X.shape[0]]))
            k_side, _, _, _ = min_weighted_lpm(X[:, support], np.array([z]),
                                            np.array([1 / X.shape[0]]))
            thresh_gaps.append(k_side - j_side)
        assert max(gaps) >= max(thresh_gaps) - 1e-9


class TestCanonicalInstance:
    def test_size_contract(self):
        X, grid, utils = random_instance(p=4, T=12, seed=11)
        u = utils[3]
        inst = build_instance(X, u, support=[0, 2, 3])
        assert inst.n_constraints == 12 * u.active.size + 1
        assert inst.n_variables == 12 + 3

    def test_lp_format_dump(self):
        X, grid, utils = random_instance(p=2, T=3, seed=12)
        inst = build_instance(X, utils[1])
        text = inst.to_lp_format()
        assert text.startswith("Maximize")
        assert "Subject To" in text and "End" in text
        assert " simplex: " in text
        assert text.count("free") == 3

import numpy as np
import pytest

from ssdspan.errors import BracketError, ParameterError, UndefinedMeasureError
from ssdspan.metrics import (
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

rng = np.random.default_rng(99)


class TestDownsideSharpe:
    def test_hand_example(self):
        r = np.array([0.02, -0.01, 0.03, -0.02])
        # mean 0.005; downside squares sum 0.0005 over T-1=3
        expected = 0.005 / (np.sqrt(2.0) * np.sqrt(0.0005 / 3.0))
        got = downside_sharpe(r, 0.0)
        assert got == pytest.approx(expected, abs=1e-15)
        assert got == pytest.approx(0.2739, abs=2e-4)

    def test_all_positive_undefined(self):
        with pytest.raises(UndefinedMeasureError):
            downside_sharpe(np.array([0.01, 0.02, 0.005]), 0.0)

    def test_symmetric_zero_mean(self):
        r = np.array([0.03, -0.03, 0.01, -0.01])
        assert downside_sharpe(r, 0.0) == pytest.approx(0.0, abs=1e-15)


class TestUpRatio:
    def test_always_above_benchmark_undefined(self):
        with pytest.raises(UndefinedMeasureError):
            up_ratio(np.array([0.02, 0.01]), 0.0)

    def test_equal_to_benchmark_undefined(self):
        r = np.array([0.01, 0.02])
        with pytest.raises(UndefinedMeasureError):
            up_ratio(r, r)

    def test_hand_example(self):
        r = np.array([0.01, -0.01])
        # mean positive part 0.005 over sqrt(mean squared shortfall 0.00005)
        assert up_ratio(r, 0.0) == pytest.approx(0.005 / np.sqrt(0.0001 / 2), abs=1e-15)
        assert up_ratio(r, 0.0) == pytest.approx(0.7071, abs=1e-4)


class TestVarEs:
    def test_single_tail_point(self):
        r = np.concatenate([[-0.10], rng.uniform(-0.05, 0.08, 19)])
        var, es = var_es(r, 0.95)
        assert var == pytest.approx(0.10, abs=1e-15)
        assert es == pytest.approx(0.10, abs=1e-15)

    def test_degenerate_distribution(self):
        r = np.full(25, 0.02)
        var, es = var_es(r)
        assert var == -0.02 and es == -0.02

    def test_bad_level_rejected(self):
        with pytest.raises(ParameterError):
            var_es(rng.normal(0, 1, 30), 1.5)

    def test_es_at_least_var(self):
        for _ in range(25):
            r = rng.standard_t(4, 60) * 0.03
            var, es = var_es(r)
            assert es >= var - 1e-15


class TestCeq:
    def test_constant_returns_equal_ceq(self):
        r = np.full(12, 0.013)
        assert ceq(r, "exponential", 3.0) == pytest.approx(0.013, abs=1e-12)
        assert ceq(r, "power", 4.0) == pytest.approx(0.013, abs=1e-12)

    def test_jensen_bound(self):
        r = rng.normal(0.01, 0.05, 400)
        for kind, a in (("exponential", 2.0), ("power", 5.0)):
            assert ceq(r, kind, a) <= r.mean() + 1e-12

    def test_hand_example_exponential(self):
        r = np.array([0.0, 0.02])
        expected = -0.5 * np.log(0.5 * (np.exp(-2.0) + np.exp(-2.04))) - 1.0
        got = ceq(r, "exponential", 2.0)
        assert got == pytest.approx(expected, abs=1e-15)
        assert got == pytest.approx(0.009900, abs=1e-6)

    def test_monotone_in_aversion(self):
        r = rng.normal(0.01, 0.04, 200)
        exps = [ceq(r, "exponential", a) for a in (1.0, 2.0, 4.0, 8.0)]
        pows = [ceq(r, "power", a) for a in (2.0, 4.0, 8.0)]
        assert all(a > b for a, b in zip(exps, exps[1:]))
        assert all(a > b for a, b in zip(pows, pows[1:]))

    def test_power_rejects_nonpositive_gross(self):
        with pytest.raises(ParameterError):
            ceq(np.array([-1.5, 0.02]), "power", 2.0)


class TestOpportunityCost:
    def test_identical_series_zero(self):
        r = rng.normal(0.01, 0.03, 50)
        for kind in ("exponential", "power"):
            assert abs(opportunity_cost(r, r, kind, 3.0)) < 1e-10

    def test_translation_identity_exact(self):
        bench = rng.normal(0.005, 0.02, 80)
        target = bench + 0.01
        for kind, a in (("exponential", 2.0), ("exponential", 6.0),
                        ("power", 2.0), ("power", 6.0)):
            assert opportunity_cost(bench, target, kind, a) == pytest.approx(0.01, abs=1e-10)

    def test_solver_cross_check(self):
        bench = np.array([0.0, 0.02])
        target = np.array([0.005, 0.025])
        assert opportunity_cost(bench, target, "exponential", 2.0) == pytest.approx(
            0.005, abs=1e-10)

    def test_bracket_error(self):
        bench = np.full(10, 0.0)
        target = np.full(10, 5.0)  # would need theta outside [-0.9, 0.9]
        with pytest.raises(BracketError):
            opportunity_cost(bench, target, "exponential", 2.0)


class TestTurnover:
    def test_constant_weights(self):
        W = np.tile([0.5, 0.5], (6, 1))
        r = rng.normal(0.01, 0.02, 6)
        pt, net, _ = turnover_and_costs(W, r, 0.0035)
        assert pt == 0.0
        assert np.allclose(net, r, atol=1e-15)

    def test_full_switch_each_period(self):
        W = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        r = np.zeros(4)
        pt, net, turns = turnover_and_costs(W, r, 0.001)
        assert pt == pytest.approx(2.0, abs=1e-15)
        assert np.allclose(turns[1:], 2.0)

    def test_zero_cost_identity(self):
        W = rng.dirichlet(np.ones(3), size=8)
        r = rng.normal(0.01, 0.03, 8)
        _, net, _ = turnover_and_costs(W, r, 0.0)
        assert np.allclose(net, r, atol=1e-15)

    def test_off_simplex_rejected(self):
        W = np.array([[0.6, 0.6], [0.5, 0.5]])
        with pytest.raises(ParameterError, match="row 0"):
            turnover_and_costs(W, np.zeros(2))

    def test_return_loss_formula(self):
        s = rng.normal(0.012, 0.03, 100)
        b = rng.normal(0.010, 0.04, 100)
        expected = s.mean() / s.std(ddof=1) * b.std(ddof=1) - b.mean()
        assert return_loss(s, b) == pytest.approx(expected, abs=1e-15)


class TestMoments:
    def test_large_normal_sample(self):
        r = rng.standard_normal(40000)
        mean, sd, skew, kurt = moments(r)
        band = 3.0 / np.sqrt(r.size)
        assert abs(skew) < 3 * band * np.sqrt(6)
        assert abs(kurt) < 3 * band * np.sqrt(24)

    def test_constant_series_undefined(self):
        with pytest.raises(UndefinedMeasureError):
            moments(np.full(10, 0.01))

    def test_two_point_hand_example(self):
        mean, sd, skew, kurt = moments(np.array([-1.0, 1.0, -1.0, 1.0]))
        assert mean == 0.0
        assert sd == pytest.approx(np.sqrt(4.0 / 3.0), abs=1e-15)


class TestScaleEquivariance:
    def test_scaling_behaviour(self):
        r = rng.normal(0.01, 0.05, 300)
        c = 3.7
        m1 = moments(r)
        m2 = moments(c * r)
        assert m2[0] == pytest.approx(c * m1[0], rel=1e-12)
        assert m2[1] == pytest.approx(c * m1[1], rel=1e-12)
        v1, e1 = var_es(r)
        v2, e2 = var_es(c * r)
        assert v2 == pytest.approx(c * v1, rel=1e-12)
        assert e2 == pytest.approx(c * e1, rel=1e-12)
        assert downside_sharpe(c * r, 0.0) == pytest.approx(downside_sharpe(r, 0.0), rel=1e-12)
        assert up_ratio(c * r, 0.0) == pytest.approx(up_ratio(r, 0.0), rel=1e-12)


class TestPerformanceReport:
    def test_report_assembly(self):
        r = rng.normal(0.01, 0.04, 120)
        bench = rng.normal(0.008, 0.05, 120)
        W = rng.dirichlet(np.ones(4), size=120)
        rep = performance_report(r, rf=0.001, weights_history=W, trc=0.0035,
                                 benchmark_returns=bench)
        d = rep.to_dict()
        assert d["es95"] >= d["var95"]
        assert d["turnover"] >= 0
        assert set(d["ceq"]) == {"exponential:2", "exponential:4", "exponential:6",
                                 "power:2", "power:4", "power:6"}
        assert d["opportunity_cost"] is not None
        assert len(d["net_of_cost_series"]) == 120

    def test_undefined_measures_become_none(self):
        r = np.array([0.01, 0.02, 0.015, 0.012])  # no downside
        rep = performance_report(r)
        assert rep.downside_sharpe is None
        assert rep.up_ratio is None

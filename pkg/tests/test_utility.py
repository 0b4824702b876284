import numpy as np
import pytest

from ssdspan.errors import DegenerateSupportError, ParameterError
from ssdspan.panel import SupportBounds
from ssdspan.utility import (
    build_grid,
    enumerate_utilities,
    evaluate_utility,
    min_of_lines,
    utility_count,
)


class TestBuildGrid:
    def test_two_point_grid(self):
        grid = build_grid(SupportBounds(0.0, 1.0), 2)
        assert np.array_equal(grid.points, [0.0, 1.0])

    def test_formula_four_points(self):
        grid = build_grid(SupportBounds(-0.1, 0.2), 4)
        assert np.allclose(grid.points, [-0.1, 0.0, 0.1, 0.2], atol=1e-15)
        assert grid.points[0] == -0.1 and grid.points[-1] == 0.2

    def test_degenerate_bounds_rejected(self):
        with pytest.raises(DegenerateSupportError):
            build_grid(SupportBounds(0.05, 0.05), 4)

    def test_n1_below_two_rejected(self):
        with pytest.raises(ParameterError):
            build_grid(SupportBounds(0.0, 1.0), 1)


class TestEnumeration:
    def test_paper_count_715(self):
        grid = build_grid(SupportBounds(-0.2, 0.3), 10)
        utils = enumerate_utilities(grid, 5)
        assert len(utils) == 715
        assert utility_count(10, 5) == 715

    def test_two_by_two(self):
        grid = build_grid(SupportBounds(0.0, 1.0), 2)
        utils = enumerate_utilities(grid, 2)
        assert [u.numerators for u in utils] == [(0, 1), (1, 0)]

    def test_three_by_three_has_six(self):
        grid = build_grid(SupportBounds(0.0, 1.0), 3)
        utils = enumerate_utilities(grid, 3)
        assert len(utils) == 6
        weights = {u.numerators for u in utils}
        assert weights == {(0, 0, 2), (0, 1, 1), (0, 2, 0), (1, 0, 1), (1, 1, 0), (2, 0, 0)}

    def test_count_formula_matches_enumeration_over_range(self):
        for n1 in range(2, 11):
            grid = build_grid(SupportBounds(-1.0, 1.0), n1)
            for n2 in range(2, 7):
                assert len(enumerate_utilities(grid, n2)) == utility_count(n1, n2)

    def test_lexicographic_order(self):
        grid = build_grid(SupportBounds(0.0, 1.0), 3)
        nums = [u.numerators for u in enumerate_utilities(grid, 3)]
        assert nums == sorted(nums)

    def test_n2_below_two_rejected(self):
        grid = build_grid(SupportBounds(0.0, 1.0), 3)
        with pytest.raises(ParameterError):
            enumerate_utilities(grid, 1)


class TestEvaluate:
    def test_zero_at_top_of_grid(self):
        grid = build_grid(SupportBounds(-0.5, 0.7), 6)
        for u in enumerate_utilities(grid, 3):
            assert evaluate_utility(u, grid.upper) == 0.0

    def test_single_ramp_below_anchor(self):
        grid = build_grid(SupportBounds(0.0, 1.0), 3)
        utils = enumerate_utilities(grid, 2)
        u = next(x for x in utils if x.numerators == (0, 1, 0))  # ramp at z_2 = 0.5
        assert evaluate_utility(u, 0.2) == pytest.approx(0.2 - 0.5, abs=1e-15)

    def test_hand_example_mixture(self):
        grid = build_grid(SupportBounds(0.0, 1.0), 2)
        utils = enumerate_utilities(grid, 3)  # weights over {0, 1/2, 1}
        u = next(x for x in utils if x.numerators == (1, 1))
        # 0.5*(0.5-0)*1(0.5<=0) + 0.5*(0.5-1)*1(0.5<=1) = -0.25
        assert evaluate_utility(u, 0.5) == pytest.approx(-0.25, abs=1e-15)

    def test_vectorized_matches_scalar(self):
        grid = build_grid(SupportBounds(-0.3, 0.4), 5)
        u = enumerate_utilities(grid, 3)[7]
        ys = np.linspace(-0.4, 0.5, 17)
        vec = evaluate_utility(u, ys)
        for y, val in zip(ys, vec):
            assert evaluate_utility(u, float(y)) == pytest.approx(val, abs=1e-15)


class TestInvariants:
    rng = np.random.default_rng(123)

    def test_min_of_lines_identity(self):
        grid = build_grid(SupportBounds(-0.25, 0.55), 6)
        ys = self.rng.uniform(grid.lower, grid.upper, 1000)
        for u in enumerate_utilities(grid, 4):
            assert np.abs(evaluate_utility(u, ys) - min_of_lines(u, ys)).max() < 1e-12

    def test_slopes_structure(self):
        grid = build_grid(SupportBounds(-0.1, 0.9), 7)
        for u in enumerate_utilities(grid, 3):
            c1 = u.slopes
            assert c1[0] == pytest.approx(1.0, abs=1e-15)
            assert (np.diff(c1) <= 1e-15).all()
            assert (c1 >= -1e-15).all() and (c1 <= 1 + 1e-15).all()
            assert u.active[-1] == grid.n1 - 1

    def test_concavity(self):
        grid = build_grid(SupportBounds(-0.5, 0.5), 5)
        utils = enumerate_utilities(grid, 4)
        y1 = self.rng.uniform(-0.5, 0.5, 400)
        y2 = self.rng.uniform(-0.5, 0.5, 400)
        t = self.rng.uniform(0, 1, 400)
        for u in utils[:: max(1, len(utils) // 25)]:
            lhs = evaluate_utility(u, t * y1 + (1 - t) * y2)
            rhs = t * evaluate_utility(u, y1) + (1 - t) * evaluate_utility(u, y2)
            assert (lhs >= rhs - 1e-12).all()

    def test_monotone(self):
        grid = build_grid(SupportBounds(-0.5, 0.5), 5)
        ys = np.sort(self.rng.uniform(-0.6, 0.6, 500))
        for u in enumerate_utilities(grid, 3):
            vals = evaluate_utility(u, ys)
            assert (np.diff(vals) >= -1e-12).all()

    def test_values_nonpositive(self):
        grid = build_grid(SupportBounds(-0.5, 0.5), 4)
        ys = self.rng.uniform(-0.7, 0.7, 200)
        for u in enumerate_utilities(grid, 3):
            assert (evaluate_utility(u, ys) <= 1e-15).all()

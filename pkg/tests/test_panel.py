import numpy as np
import pytest

from ssdspan.errors import (
    DegenerateSupportError,
    EmptyUniverseError,
    PanelParseError,
    PanelValidationError,
    WindowRangeError,
)
from ssdspan.panel import (
    ReturnPanel,
    degenerate_guard,
    load_panel,
    panel_from_array,
    support_bounds,
    window_and_filter,
)


def write(tmp_path, text, name="panel.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadPanel:
    def test_missing_cell_becomes_masked(self, tmp_path):
        path = write(tmp_path, "date,AA,BB\n2001-01,0.01,0.02\n2001-02,,0.03\n2001-03,0.0,-0.01\n")
        panel = load_panel(path)
        assert panel.n_periods == 3 and panel.n_assets == 2
        assert panel.mask.sum() == 5
        assert not panel.mask[1, 0]
        assert np.isnan(panel.values[1, 0])

    def test_unsorted_dates_rejected(self, tmp_path):
        path = write(tmp_path, "date,AA\n2001-02,0.01\n2001-01,0.02\n")
        with pytest.raises(PanelValidationError, match="strictly increasing"):
            load_panel(path)

    def test_value_parsed_at_input_precision(self, tmp_path):
        path = write(tmp_path, "date,AA\n2001-01,0.0129\n")
        panel = load_panel(path)
        assert panel.values[0, 0] == 0.0129

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = write(tmp_path, "date,AA,BB\n2001-01,0.01,0.02\n2001-02,oops,0.03\n")
        with pytest.raises(PanelParseError, match=r"row 3.*'AA'"):
            load_panel(path)

    def test_bad_date_names_row(self, tmp_path):
        path = write(tmp_path, "date,AA\n01/2001,0.01\n")
        with pytest.raises(PanelParseError, match="row 2"):
            load_panel(path)

    def test_duplicate_assets_rejected(self, tmp_path):
        path = write(tmp_path, "date,AA,AA\n2001-01,0.01,0.02\n")
        with pytest.raises(PanelValidationError, match="duplicate"):
            load_panel(path)

    def test_nan_token_rejected(self, tmp_path):
        path = write(tmp_path, "date,AA\n2001-01,nan\n")
        with pytest.raises(PanelParseError, match="non-numeric"):
            load_panel(path)


class TestWindowAndFilter:
    def make_panel(self):
        values = np.array([
            [0.01, 0.02, 0.03],
            [0.00, np.nan, 0.01],
            [0.02, 0.01, np.nan],
            [0.01, 0.02, 0.02],
        ])
        return panel_from_array(values, assets=["X", "Y", "Z"], start="2000-01")

    def test_asset_with_missing_cell_dropped(self):
        panel = self.make_panel()
        win = window_and_filter(panel, "2000-01", 3)
        assert win.assets == ("X",)
        assert win.fully_observed

    def test_no_missing_keeps_universe(self):
        panel = self.make_panel()
        win = window_and_filter(panel, "2000-04", 1)
        assert win.assets == ("X", "Y", "Z")

    def test_length_beyond_range_raises(self):
        panel = self.make_panel()
        with pytest.raises(WindowRangeError):
            window_and_filter(panel, "2000-01", 9)

    def test_idempotent_on_own_output(self):
        panel = self.make_panel()
        win = window_and_filter(panel, "2000-01", 3)
        again = window_and_filter(win, "2000-01", 3)
        assert again.assets == win.assets
        assert np.array_equal(again.values, win.values)

    def test_empty_universe_raises(self):
        values = np.array([[np.nan, 0.01], [0.02, np.nan]])
        panel = panel_from_array(values, assets=["U", "V"])
        with pytest.raises(EmptyUniverseError):
            window_and_filter(panel, "2000-01", 2)


class TestSupportBounds:
    def test_direct_min_max(self):
        panel = panel_from_array(np.array([[-0.1, 0.0], [0.2, 0.1]]))
        b = support_bounds(panel)
        assert b.lower == -0.1 and b.upper == 0.2

    def test_constant_panel_allowed_then_guarded(self):
        panel = panel_from_array(np.full((3, 2), 0.05))
        b = support_bounds(panel)
        assert b.lower == b.upper == 0.05
        with pytest.raises(DegenerateSupportError):
            degenerate_guard(b)

    def test_single_cell(self):
        panel = panel_from_array(np.array([[0.0]]))
        b = support_bounds(panel)
        assert b.lower == 0.0 and b.upper == 0.0

    def test_window_bounds_within_full_bounds(self):
        rng = np.random.default_rng(5)
        panel = panel_from_array(rng.normal(0, 0.05, (12, 4)))
        full = support_bounds(panel)
        win = support_bounds(window_and_filter(panel, "2000-03", 6))
        assert full.lower <= win.lower <= win.upper <= full.upper


class TestPanelInvariants:
    def test_values_immutable(self):
        panel = panel_from_array(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            panel.values[0, 0] = 1.0

    def test_masked_inf_tolerated_observed_inf_not(self):
        values = np.array([[0.01, np.inf], [0.02, np.inf]])
        mask = np.array([[True, False], [True, False]])
        panel = ReturnPanel(dates=("2000-01", "2000-02"), assets=("A", "B"),
                            values=values, mask=mask)
        assert np.isnan(panel.values[0, 1])
        with pytest.raises(PanelValidationError, match="non-finite"):
            ReturnPanel(dates=("2000-01",), assets=("A",), values=np.array([[np.inf]]),
                        mask=np.array([[True]]))

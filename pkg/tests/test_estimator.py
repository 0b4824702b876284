import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import Pipeline

from ssdspan.errors import ParameterError
from ssdspan.spanning import SparseSpanningSelector

rng = np.random.default_rng(55)


def panel_with_dominant(T=30, p=5):
    X = rng.normal(0.01, 0.05, (T, p))
    X[:, 3] = X[:, [0, 1, 2, 4]].max(axis=1) + 0.01
    return X


class TestEstimatorApi:
    def test_get_set_params_roundtrip(self):
        sel = SparseSpanningSelector(q_max=4, n1=6, n2=3)
        params = sel.get_params()
        assert params["q_max"] == 4 and params["n1"] == 6
        sel.set_params(q_max=2)
        assert sel.q_max == 2

    def test_clone_preserves_params(self):
        sel = SparseSpanningSelector(q_max=3, loss_tolerance=1e-8)
        other = clone(sel)
        assert other.get_params() == sel.get_params()

    def test_fit_sets_attributes(self):
        X = panel_with_dominant()
        sel = SparseSpanningSelector(q_max=1, n1=4, n2=3).fit(X)
        assert sel.n_features_in_ == 5
        assert sel.selected_indices_.tolist() == [3]
        assert sel.support_.tolist() == [False, False, False, True, False]
        assert sel.loss_ <= 1e-9
        assert sel.trace_[0][0] == 3

    def test_fit_returns_self(self):
        X = panel_with_dominant()
        sel = SparseSpanningSelector(q_max=1, n1=4, n2=3)
        assert sel.fit(X) is sel

    def test_transform_selects_columns(self):
        X = panel_with_dominant()
        sel = SparseSpanningSelector(q_max=2, n1=4, n2=3).fit(X)
        Xt = sel.transform(X)
        assert Xt.shape == (X.shape[0], sel.support_.sum())
        assert np.array_equal(Xt, X[:, sel.support_])

    def test_transform_before_fit_raises(self):
        with pytest.raises(ParameterError):
            SparseSpanningSelector().transform(panel_with_dominant())

    def test_transform_width_mismatch_raises(self):
        X = panel_with_dominant()
        sel = SparseSpanningSelector(q_max=1, n1=4, n2=3).fit(X)
        with pytest.raises(ParameterError):
            sel.transform(X[:, :3])

    def test_get_support_indices(self):
        X = panel_with_dominant()
        sel = SparseSpanningSelector(q_max=2, n1=4, n2=3).fit(X)
        idx = sel.get_support(indices=True)
        mask = sel.get_support()
        assert sorted(idx.tolist()) == np.nonzero(mask)[0].tolist()

    def test_fit_transform_via_mixin(self):
        X = panel_with_dominant()
        sel = SparseSpanningSelector(q_max=1, n1=4, n2=3)
        Xt = sel.fit_transform(X)
        assert Xt.shape[1] == 1

    def test_composes_in_pipeline(self):
        X = panel_with_dominant()
        pipe = Pipeline([("select", SparseSpanningSelector(q_max=2, n1=4, n2=3))])
        Xt = pipe.fit_transform(X)
        assert Xt.shape[0] == X.shape[0]

    def test_rejects_nonfinite(self):
        X = panel_with_dominant()
        X[0, 0] = np.nan
        with pytest.raises(ParameterError):
            SparseSpanningSelector(q_max=1, n1=4, n2=3).fit(X)

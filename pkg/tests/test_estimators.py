import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lamnrisk import estimators as E
from lamnrisk import losses as L
from lamnrisk.models import Ar1Model, GwModel
from lamnrisk.rng import substream


@pytest.fixture(scope="module")
def gw_paths():
    return GwModel(2).simulate(25, substream(21), size=500).observations


@pytest.fixture(scope="module")
def ar_paths():
    return Ar1Model(2).simulate(25, substream(22), size=500).observations


class TestApi:
    def test_params(self):
        est = E.CorrectedEstimator("ar1", 3.0, L.linex(1, 1))
        assert est.get_params() == {"model": "ar1", "theta0": 3.0, "loss": L.linex(1, 1)}
        assert clone(est).set_params(theta0=2.5).theta0 == 2.5

    def test_not_fitted(self, gw_paths):
        with pytest.raises(NotFittedError):
            E.MLEstimator().predict(gw_paths)

    def test_predict_shape(self, gw_paths):
        est = E.MLEstimator().fit(gw_paths)
        assert est.n_features_in_ == 26
        assert est.predict(gw_paths).shape == (500,)

    def test_invalid(self):
        with pytest.raises(ValueError):
            E.CorrectedEstimator(loss="linex").fit()
        with pytest.raises(ValueError):
            E.ShiftedEstimator(shift=1.0).fit()
        with pytest.raises(ValueError):
            E.MLEstimator().fit().predict(np.ones((3, 1)))


class TestEstimates:
    def test_mle_matches_stats(self, gw_paths):
        est = E.MLEstimator().fit()
        assert_array_equal(est.predict(gw_paths), GwModel(2).local_stats(
            E.Trajectory("gw", 2.0, gw_paths)).mle)

    def test_squared_correction_is_mle(self, gw_paths):
        mle = E.MLEstimator().fit().predict(gw_paths)
        cor = E.CorrectedEstimator(loss=L.squared()).fit().predict(gw_paths)
        assert_allclose(cor, mle, rtol=0, atol=1e-12)

    def test_zero_shift_is_mle(self, ar_paths):
        mle = E.MLEstimator("ar1").fit().predict(ar_paths)
        sh = E.ShiftedEstimator("ar1", 2.0, lambda w: 0.0).fit().predict(ar_paths)
        assert_array_equal(sh, mle)

    @pytest.mark.parametrize("a,b", [(1.0, 1.0), (-2.0, 0.5)])
    def test_linex_closed_form(self, gw_paths, a, b):
        est = E.CorrectedEstimator(loss=L.linex(a, b)).fit()
        st = est.local_stats(gw_paths)
        shift = (est.predict(gw_paths) - st.mle) / st.delta_n
        assert_allclose(shift, -a / (2 * st.W_n), rtol=1e-7)

    @pytest.mark.parametrize("a", [1.0, -1.0])
    def test_direction(self, ar_paths, a):
        mle = E.MLEstimator("ar1").fit().predict(ar_paths)
        cor = E.CorrectedEstimator("ar1", 2.0, L.linex(a, 1)).fit().predict(ar_paths)
        assert np.all(np.sign(a) * (cor - mle) < 0)

    def test_estimate_at_other_point(self, ar_paths):
        traj = E.Trajectory("ar1", 2.0, ar_paths)
        est = E.MLEstimator("ar1", 2.0).fit()
        # the AR(1) MLE does not depend on the evaluation point
        assert_allclose(E.estimate(est, traj, 2.2), est.predict(ar_paths), rtol=1e-13)
        cor = E.CorrectedEstimator("ar1", 2.0, L.linex(1, 1)).fit()
        st = Ar1Model(2.2).local_stats(traj)
        shift = (E.estimate(cor, traj, 2.2) - st.mle) / st.delta_n
        assert_allclose(shift, -1 / (2 * st.W_n), rtol=1e-7)


class TestNormalisedError:
    def test_ar1_mle_pivot(self, ar_paths):
        est = E.MLEstimator("ar1").fit()
        st = est.local_stats(ar_paths)
        assert_allclose(est.normalized_error(ar_paths, 2.0), st.Z_n / st.W_n, rtol=1e-9)

    def test_gw_mle_pivot(self, gw_paths):
        # at theta0 = 2 the offspring-mean error equals Z_n / W_n
        est = E.MLEstimator().fit()
        st = est.local_stats(gw_paths)
        assert_allclose(est.normalized_error(gw_paths, 2.0), st.Z_n / st.W_n, rtol=1e-9)

    def test_linex_decomposition(self, gw_paths):
        mle = E.MLEstimator().fit()
        cor = E.CorrectedEstimator(loss=L.linex(1, 1)).fit()
        st = mle.local_stats(gw_paths)
        diff = cor.normalized_error(gw_paths, 2.01) - mle.normalized_error(gw_paths, 2.01)
        assert_allclose(diff, -1 / (2 * st.W_n), rtol=1e-7)

    def test_check_decomposition(self, gw_paths):
        loss = L.check(4, 1, 50.0)
        cor = E.CorrectedEstimator(loss=loss).fit()
        st = cor.local_stats(gw_paths)
        diff = cor.normalized_error(gw_paths, 2.0) - E.MLEstimator().fit().normalized_error(gw_paths, 2.0)
        assert_allclose(diff, cor.table_(st.W_n) / np.sqrt(st.W_n), rtol=1e-12)

    def test_zero_at_estimate(self, gw_paths):
        est = E.CorrectedEstimator(loss=L.linex(1, 1)).fit()
        t = est.predict(gw_paths[:1])[0]
        assert_allclose(est.normalized_error(gw_paths[:1], t), 0.0, atol=1e-9)


class TestFactories:
    def test_sweep_midpoint_is_corrected(self, gw_paths):
        loss = L.check(4, 1, 50.0)
        sweep = E.sweep_estimators("gw", 2.0, loss, ks=(0, 4))
        cor = E.CorrectedEstimator(loss=loss).fit()
        assert_array_equal(sweep[4].predict(gw_paths), cor.predict(gw_paths))
        assert_array_equal(sweep[0].predict(gw_paths), E.MLEstimator().fit().predict(gw_paths))

    def test_from_dict(self):
        assert isinstance(E.from_dict("mle", "gw", 2.0), E.MLEstimator)
        cor = E.from_dict({"estimator": "corrected", "loss": "linex:a=1,b=1"}, "gw", 2.0)
        assert cor.loss == L.linex(1, 1)
        sh = E.from_dict({"estimator": "shifted", "c": -0.25}, "gw", 2.0)
        assert_allclose(sh.correction(np.array([1.0, 4.0])), [-0.25, -0.25])
        with pytest.raises(ValueError):
            E.from_dict({"estimator": "bayes"}, "gw", 2.0)

    def test_table_is_shared(self):
        assert E.beta0_table(L.linex(1, 1)) is E.beta0_table(L.linex(1, 1))

"""Estimators of the model parameter built on the maximum likelihood estimate.

Every estimator here has the form

    T_n = mle + delta_n * c(W_n)

for a correction ``c`` of the information level: ``c = 0`` for the plain
MLE, ``c(w) = w**-0.5 * beta0(w)`` for the loss-optimal estimator, and any
user-supplied ``c`` for shifted estimators. On the normalised scale the error
is ``(T_n - theta) / delta_n = (mle - theta) / delta_n + c(W_n)``.

The estimators follow the scikit-learn estimator API. ``X`` is an array of
paths with shape ``(n_paths, n + 1)``, and ``predict`` returns one estimate
per path.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_array, check_is_fitted

from .bias import Beta0Transformer
from .losses import LossSpec
from .models import Trajectory, make_model

TABLE_RANGE = (1e-8, 1e3)
TABLE_DENSITY = 32


@lru_cache(maxsize=32)
def beta0_table(loss, w_min=TABLE_RANGE[0], w_max=TABLE_RANGE[1], points_per_decade=TABLE_DENSITY):
    """Fitted :class:`Beta0Transformer` for ``loss``, shared within a process."""
    return Beta0Transformer(loss, w_min, w_max, points_per_decade).fit()


class ScaledCorrection:
    """``scale * w**-0.5 * beta0(w)`` from a fitted table; picklable."""

    def __init__(self, table, scale=1.0):
        self.table = table
        self.scale = float(scale)

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        return self.scale * self.table(w) / np.sqrt(w)

    def __repr__(self):
        return f"ScaledCorrection(loss={self.table.loss}, scale={self.scale:g})"


class PathEstimator(BaseEstimator):
    """Base class: the MLE with a zero correction.

    Parameters
    ----------
    model : {"ar1", "gw"}
    theta0 : float
        Point at which the local statistics are evaluated.
    """

    kind = "mle"

    def __init__(self, model="gw", theta0=2.0):
        self.model = model
        self.theta0 = theta0

    def correction(self, w):
        """Normalised shift ``c(w)`` added to the MLE error."""
        return np.zeros_like(np.asarray(w, dtype=float))

    def _validate(self, X):
        dtype = np.int64 if str(self.model).lower() == "gw" else float
        x = check_array(X, dtype=dtype, ensure_min_features=2)
        return Trajectory(self.model_.name, self.model_.theta0, x)

    def fit(self, X=None, y=None):
        self.model_ = make_model(self.model, self.theta0)
        if X is not None:
            self.n_features_in_ = self._validate(X).observations.shape[1]
        return self

    def local_stats(self, X):
        check_is_fitted(self, "model_")
        return self.model_.local_stats(self._validate(X))

    def predict(self, X):
        st = self.local_stats(X)
        return st.mle + st.delta_n * self.correction(st.W_n)

    def normalized_error(self, X, theta_true):
        """``(T_n - theta_true) / delta_n`` for each path."""
        st = self.local_stats(X)
        h = (float(theta_true) - float(self.theta0)) / st.delta_n
        return normalized_from_stats(self, st, h)


class MLEstimator(PathEstimator):
    """The maximum likelihood estimator (``c = 0``)."""


class CorrectedEstimator(PathEstimator):
    """The loss-optimal estimator ``mle + delta_n W_n^{-1/2} beta0(W_n)``.

    ``beta0`` is solved under ``loss`` once on a grid of ``w`` at ``fit`` and
    interpolated afterwards.
    """

    kind = "corrected"

    def __init__(self, model="gw", theta0=2.0, loss=None):
        super().__init__(model, theta0)
        self.loss = loss

    def fit(self, X=None, y=None):
        if not isinstance(self.loss, LossSpec):
            raise ValueError("CorrectedEstimator needs a LossSpec")
        super().fit(X)
        self.table_ = beta0_table(self.loss)
        self.correction_ = ScaledCorrection(self.table_, 1.0)
        return self

    def correction(self, w):
        check_is_fitted(self, "correction_")
        return self.correction_(w)


class ShiftedEstimator(PathEstimator):
    """``mle + delta_n c(W_n)`` for a user-supplied correction ``shift``."""

    kind = "shifted"

    def __init__(self, model="gw", theta0=2.0, shift=None):
        super().__init__(model, theta0)
        self.shift = shift

    def fit(self, X=None, y=None):
        if not callable(self.shift):
            raise ValueError("ShiftedEstimator needs a callable shift")
        return super().fit(X)

    def correction(self, w):
        w = np.asarray(w, dtype=float)
        return np.broadcast_to(np.asarray(self.shift(w), dtype=float), w.shape).copy()


def normalized_from_stats(est, st, h):
    """Normalised error at ``theta = theta0 + delta_n h`` from precomputed statistics."""
    return st.offset / st.delta_n - h + est.correction(st.W_n)


def sweep_estimators(model, theta0, loss, ks=range(9)):
    """Shifted estimators with ``c_k(w) = (k / 4) w^{-1/2} beta0(w)``."""
    table = beta0_table(loss)
    return {k: ShiftedEstimator(model, theta0, ScaledCorrection(table, k / 4.0)).fit() for k in ks}


def from_dict(d, model, theta0, default_loss=None):
    """Build an estimator from ``{"estimator": "mle" | "corrected" | "shifted", ...}``."""
    from . import losses

    d = dict(d) if isinstance(d, dict) else {"estimator": d}
    kind = str(d.pop("estimator", d.pop("kind", "mle"))).lower()
    if kind == "mle":
        return MLEstimator(model, theta0).fit()
    if kind == "corrected":
        spec = d.get("loss")
        loss = losses.from_dict(spec) if isinstance(spec, dict) else (losses.parse(spec) if spec else default_loss)
        return CorrectedEstimator(model, theta0, loss).fit()
    if kind == "shifted":
        if "scale" in d:
            loss = default_loss if d.get("loss") is None else losses.parse(d["loss"])
            return ShiftedEstimator(model, theta0, ScaledCorrection(beta0_table(loss), d["scale"])).fit()
        c = float(d.get("c", 0.0))
        return ShiftedEstimator(model, theta0, _Constant(c)).fit()
    raise ValueError(f"unknown estimator {kind!r}")


class _Constant:
    def __init__(self, c):
        self.c = c

    def __call__(self, w):
        return np.full(np.shape(w), self.c)

    def __repr__(self):
        return f"constant({self.c:g})"


def estimate(est, traj, theta0_eval=None):
    """``T_n`` for each path of ``traj`` with statistics at ``theta0_eval``."""
    if theta0_eval is not None and not math.isclose(float(theta0_eval), float(est.theta0)):
        est = clone(est).set_params(theta0=float(theta0_eval)).fit()
    return est.predict(np.asarray(traj.observations))

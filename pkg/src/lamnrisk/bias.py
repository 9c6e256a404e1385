"""Conditional expected loss and its minimiser, the optimal bias correction.

For an information level ``w > 0`` the conditional risk of reporting
``w**-0.5 * beta`` when the centred error is ``Y ~ N(0, 1/w)`` is

    h(beta, w) = E[ l(w**-0.5 * beta - Y) ].

Its minimiser ``beta0(w)`` is the shift that turns the plain estimator into
the risk-optimal one under an asymmetric loss. Only the loss is needed; the
solver never differentiates it. Minimisation is golden-section search on a
bracket that doubles until the minimiser is interior. It is then polished
with the Gaussian-smoothing identity

    d/dbeta h(beta, w) = E[ l(w**-0.5 * (beta + Z)) * Z ],   Z ~ N(0, 1),

which is itself just another Gaussian expectation of the loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .mixing import expect
from .optimize import bracket_minimum, golden_section
from .quadrature import EvaluationError, gaussian_expectation

__all__ = [
    "Beta0Config",
    "Beta0Result",
    "Beta0Transformer",
    "EvaluationError",
    "SolverError",
    "expected_beta0",
    "h_tilde_value",
    "h_value",
    "solve_beta0",
    "solve_beta_tilde",
]


class SolverError(RuntimeError):
    """The minimiser could not be located inside the widest allowed bracket."""


@dataclass(frozen=True)
class Beta0Config:
    quad_nodes: int = 64
    bracket_halfwidth: float = 50.0
    bracket_step: float = 0.5
    min_tol: float = 1e-10
    max_iter: int = 200
    max_doublings: int = 40

    def __post_init__(self):
        if self.quad_nodes < 16:
            raise ValueError("quad_nodes must be at least 16")
        if not self.min_tol > 0:
            raise ValueError("min_tol must be positive")


DEFAULT_CONFIG = Beta0Config()


@dataclass(frozen=True)
class Beta0Result:
    beta0: float
    h_min: float
    iterations: int
    converged: bool


def _check_w(w):
    w = float(w)
    if not w > 0 or not math.isfinite(w):
        raise ValueError(f"w must be positive and finite, got {w}")
    return w


def h_value(loss, beta, w, cfg=DEFAULT_CONFIG):
    """``E[l(w^{-1/2} beta - Y)]`` with ``Y ~ N(0, 1/w)``."""
    s = _check_w(w) ** -0.5
    return gaussian_expectation(loss, s * beta, s)


def log_h_value(loss, beta, w, cfg=DEFAULT_CONFIG):
    """``log h(beta, w)``; finite even where ``h`` itself overflows."""
    s = _check_w(w) ** -0.5
    return gaussian_expectation(loss, s * beta, s, log=True)


def h_gradient(loss, beta, w, cfg=DEFAULT_CONFIG):
    """Derivative of :func:`h_value` in ``beta``."""
    s = _check_w(w) ** -0.5
    return gaussian_expectation(loss, s * beta, s, moment=1)


def _la(loss, a):
    return loss.truncated(min(a, loss.truncation) if loss.truncation else a)


def h_tilde_value(loss, beta, w, a, b, lam, cfg=DEFAULT_CONFIG):
    """Window-restricted risk under the loss truncated at ``a``.

    Integrates ``min(l, a)(w^{-1/2} beta - y)`` against the ``N(0, 1/((1+lam) w))``
    density over ``|y| <= sqrt(b)``, without renormalising the window.
    """
    w = _check_w(w)
    if not (a > 0 and b > 0 and lam >= 0):
        raise ValueError("need a > 0, b > 0 and lam >= 0")
    la = _la(loss, a)
    sd = ((1.0 + lam) * w) ** -0.5
    zmax = math.sqrt(b) / sd
    return gaussian_expectation(la, w**-0.5 * beta, sd, -zmax, zmax)


def h_tilde_gradient(loss, beta, w, a, b, lam, cfg=DEFAULT_CONFIG):
    w = _check_w(w)
    la = _la(loss, a)
    sd = ((1.0 + lam) * w) ** -0.5
    zmax = math.sqrt(b) / sd
    # boundary terms of the window show up once the range is finite
    s = w**-0.5
    lo, hi = -zmax, zmax
    inner = gaussian_expectation(la, s * beta, sd, lo, hi, moment=1) / sd
    phi = math.exp(-0.5 * zmax * zmax) / math.sqrt(2.0 * math.pi)
    edge = (float(la(s * beta + sd * hi)) - float(la(s * beta + sd * lo))) * phi / sd
    return s * (inner + edge)


def _minimise(objective, gradient, cfg, value=None):
    """Bracket, golden-section, then polish on the gradient's sign change.

    ``objective`` may be any increasing transform of the risk (the log is
    used for untruncated losses); ``value`` maps the minimiser to the risk.
    """
    value = value or objective
    lo, hi, ok = bracket_minimum(objective, 0.0, cfg.bracket_step, 2.0, cfg.max_doublings)
    if not ok or max(abs(lo), abs(hi)) > cfg.bracket_halfwidth * 2.0**cfg.max_doublings:
        x = 0.5 * (lo + hi)
        return Beta0Result(x, value(x), 0, False)
    # a coarse search is enough when the gradient polish succeeds
    coarse = max(cfg.min_tol, 1e-4) if gradient is not None else cfg.min_tol
    x, fx, a, b, it = golden_section(objective, lo, hi, coarse, cfg.max_iter)
    polished = _polish(objective, gradient, x, a, b, cfg)
    if polished is None:
        x, fx, a, b, more = golden_section(objective, a, b, cfg.min_tol, cfg.max_iter - it)
        it += more
    else:
        x = polished
    return Beta0Result(x, value(x), it, it < cfg.max_iter)


def _polish(objective, gradient, x, a, b, cfg):
    """Root of the gradient near ``x``, or None if it cannot be bracketed."""
    # golden-section stalls where h is flat to rounding; the gradient does not
    span = max(b - a, 1e-9 * max(1.0, abs(x)))
    try:
        for _ in range(40):
            lo, hi = x - span, x + span
            glo, ghi = gradient(lo), gradient(hi)
            if glo < 0 < ghi:
                break
            if glo > 0 and ghi < 0:
                return None
            span *= 2.0
        else:
            return None
        root = brentq(gradient, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=100)
    except (EvaluationError, ValueError):
        return None
    fx, fr = objective(x), objective(root)
    # keep the polished point only if it is no worse than the search result
    return root if fr <= fx + 1e-13 * abs(fx) else None


def solve_beta0(loss, w, cfg=DEFAULT_CONFIG):
    """Minimise ``h(., w)``.

    ``converged`` is False only if the minimiser still sits on the bracket
    edge after ``cfg.max_doublings`` widenings, or the iteration cap was hit.
    """
    w = _check_w(w)
    return _minimise(
        lambda b: log_h_value(loss, b, w, cfg),
        lambda b: h_gradient(loss, b, w, cfg),
        cfg,
        lambda b: h_value(loss, b, w, cfg),
    )


def solve_beta_tilde(loss, w, a, b, lam, cfg=DEFAULT_CONFIG):
    """Minimise the window-restricted, truncated risk ``h_tilde(., w)``."""
    w = _check_w(w)
    return _minimise(
        lambda beta: h_tilde_value(loss, beta, w, a, b, lam, cfg),
        lambda beta: h_tilde_gradient(loss, beta, w, a, b, lam, cfg),
        cfg,
    )


def expected_beta0(loss, g, cfg=DEFAULT_CONFIG):
    """``E[beta0(W)]`` under the mixing law ``g``; may come back divergent."""

    def f(w):
        r = solve_beta0(loss, w, cfg)
        if not r.converged:
            raise SolverError(f"beta0 solver did not converge at w={w:g}")
        return r.beta0

    return expect(g, f)


class Beta0Transformer(TransformerMixin, BaseEstimator):
    """Map information levels ``W`` to ``beta0(W)`` through a fitted table.

    ``fit`` solves the minimisation on a log-spaced grid of ``w`` and builds a
    cubic spline in ``log w``. ``transform`` interpolates inside
    the grid and solves directly outside it. Passing ``X`` to ``fit`` widens
    the grid to cover the observed values.

    Parameters
    ----------
    loss : LossSpec
    w_min, w_max : float
        Default grid range.
    points_per_decade : int
    cfg : Beta0Config, optional
    """

    def __init__(self, loss=None, w_min=1e-6, w_max=1e3, points_per_decade=24, cfg=None):
        self.loss = loss
        self.w_min = w_min
        self.w_max = w_max
        self.points_per_decade = points_per_decade
        self.cfg = cfg

    def fit(self, X=None, y=None):
        if self.loss is None:
            raise ValueError("loss must be set before fitting")
        lo, hi = float(self.w_min), float(self.w_max)
        if X is not None:
            w = check_array(X, ensure_2d=False, dtype=float).ravel()
            if np.any(w <= 0):
                raise ValueError("information levels must be positive")
            lo, hi = min(lo, w.min()), max(hi, w.max())
        cfg = self.cfg or DEFAULT_CONFIG
        n = max(4, int(math.ceil(math.log10(hi / lo) * self.points_per_decade)) + 1)
        log_w = np.linspace(math.log(lo), math.log(hi), n)
        beta = np.empty(n)
        hmin = np.empty(n)
        for i, lw in enumerate(log_w):
            r = solve_beta0(self.loss, math.exp(lw), cfg)
            if not r.converged:
                raise SolverError(f"beta0 solver did not converge at w={math.exp(lw):g}")
            beta[i], hmin[i] = r.beta0, r.h_min
        self.log_w_ = log_w
        self.beta0_ = beta
        self.h_min_ = hmin
        self.interpolator_ = CubicSpline(log_w, beta, extrapolate=False)
        return self

    def transform(self, X):
        check_is_fitted(self, "interpolator_")
        arr = check_array(X, ensure_2d=False, dtype=float)
        w = arr.ravel()
        if np.any(w <= 0):
            raise ValueError("information levels must be positive")
        out = self.interpolator_(np.log(w))
        miss = np.isnan(out)
        if np.any(miss):
            cfg = self.cfg or DEFAULT_CONFIG
            out[miss] = [solve_beta0(self.loss, v, cfg).beta0 for v in w[miss]]
        return out.reshape(arr.shape)

    def __call__(self, w):
        """Scalar or array lookup; same as ``transform``."""
        w_arr = np.asarray(w, dtype=float)
        return self.transform(w_arr.reshape(-1)).reshape(w_arr.shape)

"""The Gaussian limit experiment.

Given ``W = w`` one observes ``Z ~ N(theta sqrt(w) + beta0(w), 1)``. Under a
``N(0, sigma^2)`` prior the posterior of ``theta`` is normal with precision
``r(w, sigma) = w + 1 / sigma^2``. Randomised estimators are callables
``xi(z, w, u)`` that receive an explicit uniform ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .bias import solve_beta0
from .estimators import beta0_table

__all__ = [
    "LimitSample",
    "PosteriorParams",
    "RiskEstimate",
    "bayes_estimator",
    "bayes_risk_mc",
    "beta0_of",
    "marginal_density",
    "posterior",
    "posterior_mean_estimator",
    "precision",
    "sample_limit",
]


@dataclass(frozen=True)
class LimitSample:
    """Arrays of draws; ``u`` is an independent uniform for randomisation."""

    theta: np.ndarray
    w: np.ndarray
    z: np.ndarray
    u: np.ndarray

    def __len__(self):
        return self.w.size


@dataclass(frozen=True)
class PosteriorParams:
    mean: float | np.ndarray
    variance: float | np.ndarray


@dataclass(frozen=True)
class RiskEstimate:
    risk: float
    stderr: float
    reps: int


def precision(w, sigma):
    """``r(w, sigma) = w + 1 / sigma^2``; ``sigma = inf`` gives the diffuse limit."""
    return np.asarray(w, dtype=float) + (0.0 if math.isinf(sigma) else 1.0 / (sigma * sigma))


def beta0_of(loss, w):
    """``beta0`` at each ``w``; one exact solve when all values coincide."""
    w = np.asarray(w, dtype=float)
    if w.size and np.all(w == w.flat[0]):
        return np.full(w.shape, solve_beta0(loss, float(w.flat[0])).beta0)
    return beta0_table(loss)(w)


def sample_limit(g, loss, rng, size, sigma=None, theta=None):
    """``size`` draws of ``(theta, W, Z, U)``.

    Exactly one of ``sigma`` (normal prior scale) and ``theta`` (a fixed
    parameter) must be given.
    """
    if (sigma is None) == (theta is None):
        raise ValueError("give exactly one of sigma and theta")
    if size < 1:
        raise ValueError("size must be at least 1")
    if sigma is not None:
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        th = sigma * rng.standard_normal(size)
    else:
        th = np.full(size, float(theta))
    w = g.sample(rng, size)
    z = th * np.sqrt(w) + beta0_of(loss, w) + rng.standard_normal(size)
    u = rng.random(size)
    return LimitSample(th, w, z, u)


def posterior(w, z, sigma, loss=None, beta0=None):
    """Posterior of ``theta`` given ``(w, z)`` under the ``N(0, sigma^2)`` prior."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("w must be positive")
    b = beta0_of(loss, w) if beta0 is None else np.asarray(beta0, dtype=float)
    r = precision(w, sigma)
    mean = np.sqrt(w) * (np.asarray(z, dtype=float) - b) / r
    out = PosteriorParams(mean, 1.0 / r)
    if np.ndim(mean) == 0:
        return PosteriorParams(float(mean), float(1.0 / r))
    return out


def marginal_density(z, w, sigma, g, loss=None, beta0=None):
    """Joint density of ``(Z, W)`` with ``theta`` integrated out.

    ``Z | W = w`` is ``N(beta0(w), sigma^2 w + 1)``. For a point-mass law only
    the density of ``Z`` is returned.
    """
    w = np.asarray(w, dtype=float)
    b = beta0_of(loss, w) if beta0 is None else np.asarray(beta0, dtype=float)
    sd = np.sqrt(sigma * sigma * w + 1.0)
    dz = stats.norm.pdf(z, loc=b, scale=sd)
    return dz if g.degenerate else dz * g.density(w)


def posterior_mean_estimator(loss, sigma=math.inf):
    """``xi(z, w, u) = sqrt(w) (z - beta0(w)) / r(w, sigma)``.

    With ``sigma = inf`` this is ``w^{-1/2} (z - beta0(w))``.
    """

    def xi(z, w, u=None):
        w = np.asarray(w, dtype=float)
        return np.sqrt(w) * (np.asarray(z) - beta0_of(loss, w)) / precision(w, sigma)

    return xi


def bayes_estimator(loss, sigma=math.inf):
    """The Bayes rule under ``loss``: posterior mean plus ``r^{-1/2} beta0(r)``.

    A normal posterior with precision ``r`` has posterior expected loss
    ``h(.,r)`` around its mean, so the optimal action shifts the mean by the
    conditional-risk minimiser. For ``sigma = inf`` this is ``w^{-1/2} z``.
    """
    mean = posterior_mean_estimator(loss, sigma)

    def xi(z, w, u=None):
        r = precision(w, sigma)
        return mean(z, w, u) + beta0_of(loss, r) / np.sqrt(r)

    return xi


def bayes_risk_mc(xi, g, loss, reps, rng, sigma=None, theta=None, beta0_loss=None):
    """Monte Carlo average of ``loss(xi(Z, W, U) - theta)`` with its standard error.

    Draws come from :func:`sample_limit`; ``beta0_loss`` sets the loss whose
    ``beta0`` centres ``Z`` (default: ``loss`` without truncation).
    """
    if reps < 1000:
        raise ValueError("reps must be at least 1000")
    center = loss.untruncated() if beta0_loss is None else beta0_loss
    s = sample_limit(g, center, rng, reps, sigma=sigma, theta=theta)
    vals = np.asarray(loss(xi(s.z, s.w, s.u) - s.theta), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ArithmeticError("non-finite loss in Bayes risk")
    mean = math.fsum(vals) / reps
    sd = float(np.std(vals, ddof=1))
    return RiskEstimate(mean, sd / math.sqrt(reps), reps)

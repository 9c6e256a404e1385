"""The two LAMN example processes: explosive AR(1) and a Galton-Watson tree.

Both models simulate many independent paths at once; a path batch is an
array of shape ``(size, n + 1)`` whose first column is ``X_0``. Local
statistics are computed at an evaluation point ``theta0`` that may differ
from the parameter the paths were simulated under.

AR(1)
    ``X_j = theta X_{j-1} + eps_j``, ``X_0 = 0``, ``eps_j ~ N(0, 1)``, ``|theta| > 1``.
Galton-Watson
    ``X_0 = 1``; each individual has a geometric number of offspring on
    ``{1, 2, ...}`` with mean ``theta > 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# largest population for which float64 generation sums stay exact
EXACT_CAP = 2**53


class DegeneratePathError(ValueError):
    """A path on which the statistics are undefined (zero information)."""


class ParameterRegionError(ValueError):
    """A parameter value outside the model's region."""


class PopulationOverflowError(OverflowError):
    """A Galton-Watson generation exceeded the exact-arithmetic cap."""


@dataclass(frozen=True)
class LocalStats:
    """Per-path statistics at ``theta0``; each field is an array over paths.

    ``offset`` is ``mle - theta0`` computed without cancellation.
    """

    delta_n: float
    W_n: np.ndarray
    Z_n: np.ndarray
    G_n: np.ndarray
    mle: np.ndarray
    offset: np.ndarray

    def __len__(self):
        return np.size(self.W_n)


@dataclass(frozen=True)
class Trajectory:
    """Simulated paths; ``observations`` has shape ``(size, n + 1)``."""

    model: str
    theta: float
    observations: np.ndarray

    @property
    def n(self):
        return self.observations.shape[-1] - 1

    def __len__(self):
        return self.observations.shape[0]


class _Model:
    name = ""

    def __init__(self, theta0):
        self.theta0 = float(theta0)
        self._check(self.theta0)

    def __repr__(self):
        return f"{type(self).__name__}(theta0={self.theta0!r})"

    def __eq__(self, other):
        return type(self) is type(other) and self.theta0 == other.theta0

    def __hash__(self):
        return hash((type(self).__name__, self.theta0))

    def to_dict(self):
        return {"model": self.name, "theta0": self.theta0}

    def _theta(self, theta):
        theta = self.theta0 if theta is None else float(theta)
        self._check(theta)
        return theta

    def norming_constant(self, n, theta0=None):
        """``delta_n`` at ``theta0`` (the model's own by default)."""
        if n < 1:
            raise ValueError("n must be at least 1")
        theta0 = self._theta(theta0)
        val = math.exp(self._log_delta(n, theta0))
        if val == 0.0:
            raise ArithmeticError(f"norming constant underflows at n={n}")
        return val

    def log_likelihood_ratio(self, traj, h, theta0=None):
        """Exact ``log dP_{theta0 + delta_n h} / dP_{theta0}`` for each path."""
        theta0 = self._theta(theta0)
        d = self.norming_constant(traj.n, theta0) * float(h)
        theta_n = theta0 + d
        if not self._valid(theta_n):
            raise ParameterRegionError(f"local alternative {theta_n!r} is outside the parameter region")
        return self._llr(np.asarray(traj.observations), theta0, theta_n, d)

    def lamn_remainder(self, traj, h, theta0=None):
        """``Lambda_n - (h Z_n - h^2 W_n / 2)`` for each path."""
        st = self.local_stats(traj, theta0)
        lam = self.log_likelihood_ratio(traj, h, theta0)
        return lam - (h * st.Z_n - 0.5 * h * h * st.W_n)

    def _check(self, theta):
        if not self._valid(theta):
            raise ParameterRegionError(f"{self.name} needs {self._region}, got theta={theta!r}")


class Ar1Model(_Model):
    """Explosive Gaussian autoregression with unit innovation variance."""

    name = "ar1"
    _region = "|theta| > 1"

    @staticmethod
    def _valid(theta):
        return math.isfinite(theta) and abs(theta) > 1.0

    def _log_delta(self, n, theta0):
        return math.log(theta0 * theta0 - 1.0) - n * math.log(abs(theta0))

    def simulate(self, n, rng, size=1, theta=None):
        """``size`` paths of length ``n`` under ``theta`` (default ``theta0``)."""
        if n < 1 or size < 1:
            raise ValueError("n and size must be at least 1")
        theta = self._theta(theta)
        eps = rng.standard_normal((size, n))
        x = np.zeros((size, n + 1))
        for j in range(n):
            x[:, j + 1] = theta * x[:, j] + eps[:, j]
        return Trajectory(self.name, theta, x)

    def local_stats(self, traj, theta0=None, mask_degenerate=False):
        """Statistics at ``theta0``.

        A path with no lagged signal raises :class:`DegeneratePathError`, or
        gets NaN statistics when ``mask_degenerate`` is set.
        """
        theta0 = self._theta(theta0)
        x = np.atleast_2d(np.asarray(traj.observations, dtype=float))
        prev, cur = x[:, :-1], x[:, 1:]
        n = x.shape[1] - 1
        delta = self.norming_constant(n, theta0)
        ssq = np.sum(prev * prev, axis=1)
        if np.any(ssq == 0):
            if not mask_degenerate:
                raise DegeneratePathError("AR(1) path with sum of squared lags equal to zero")
            ssq = np.where(ssq == 0, np.nan, ssq)
        eps = cur - theta0 * prev
        score = np.sum(prev * eps, axis=1)
        W = delta * delta * ssq
        Z = delta * score
        offset = score / ssq
        return LocalStats(delta, W, Z, Z / np.sqrt(W), theta0 + offset, offset)

    def _llr(self, x, theta0, theta_n, d):
        x = np.atleast_2d(x)
        prev, cur = x[:, :-1], x[:, 1:]
        e = cur - theta0 * prev
        # e^2 - (e - d x)^2, expanded so no large squares cancel
        return np.sum(d * prev * (e - 0.5 * d * prev), axis=1)


class GwModel(_Model):
    """Super-critical Galton-Watson process with geometric offspring on {1, 2, ...}."""

    name = "gw"
    _region = "theta > 1"

    @staticmethod
    def _valid(theta):
        return math.isfinite(theta) and theta > 1.0

    def _log_delta(self, n, theta0):
        return 0.5 * math.log(theta0 * (theta0 - 1.0)) - 0.5 * n * math.log(theta0)

    def simulate(self, n, rng, size=1, theta=None):
        """``size`` paths of length ``n`` under ``theta`` (default ``theta0``).

        A generation of ``m`` individuals has ``m + NegBin(m, 1/theta)``
        children, which is exactly the sum of ``m`` geometric counts.
        """
        if n < 1 or size < 1:
            raise ValueError("n and size must be at least 1")
        theta = self._theta(theta)
        p = 1.0 / theta
        x = np.empty((size, n + 1), dtype=np.int64)
        x[:, 0] = 1
        for j in range(n):
            m = x[:, j]
            nxt = m + rng.negative_binomial(m, p)
            if np.any(nxt > EXACT_CAP):
                raise PopulationOverflowError(f"population exceeds 2**53 in generation {j + 1}")
            x[:, j + 1] = nxt
        return Trajectory(self.name, theta, x)

    def local_stats(self, traj, theta0=None, mask_degenerate=False):
        """Statistics at ``theta0``; paths always carry information here."""
        theta0 = self._theta(theta0)
        x = np.atleast_2d(np.asarray(traj.observations))
        if np.any(x[:, 0] != 1) or np.any(np.diff(x, axis=1) < 0):
            raise ValueError("Galton-Watson paths start at 1 and never decrease")
        xf = x.astype(float)
        prev, cur = xf[:, :-1], xf[:, 1:]
        n = x.shape[1] - 1
        delta = self.norming_constant(n, theta0)
        total = np.sum(prev, axis=1)
        centred = np.sum(cur - theta0 * prev, axis=1)
        W = (theta0 - 1.0) * total * math.exp(-n * math.log(theta0))
        G = centred / np.sqrt(theta0 * (theta0 - 1.0) * total)
        offset = centred / total
        return LocalStats(delta, W, np.sqrt(W) * G, G, theta0 + offset, offset)

    def _llr(self, x, theta0, theta_n, d):
        x = np.atleast_2d(np.asarray(x)).astype(float)
        parents = np.sum(x[:, :-1], axis=1)
        extra = np.sum(x[:, 1:] - x[:, :-1], axis=1)
        # log(theta0 / theta_n) and log((1 - 1/theta_n) / (1 - 1/theta0)) via log1p
        lp = -math.log1p(d / theta0)
        lq = math.log1p(d / (theta0 - 1.0)) + lp
        return parents * lp + extra * lq


MODELS = {"ar1": Ar1Model, "gw": GwModel}


def make_model(name, theta0):
    try:
        return MODELS[str(name).lower()](theta0)
    except KeyError:
        raise ValueError(f"unknown model {name!r}") from None

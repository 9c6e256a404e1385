"""Gaussian expectations of loss functions.

``gaussian_expectation(loss, m, s)`` returns ``E[l(m + s Z) Z^k]`` for a
standard normal ``Z``. Smooth untruncated losses use Gauss-Hermite nodes,
accepted only when two rule sizes agree. Everything else goes through a
composite Gauss-Legendre rule with panel edges at the loss breakpoints. That
rule works on ``log l`` so exponential losses at huge scales do not overflow.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize_scalar

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_LOG_SQRT_2PI = math.log(_SQRT_2PI)

_GH_SIZES = (64, 100)
_GH = {}
for _n in _GH_SIZES:
    _x, _w = np.polynomial.hermite_e.hermegauss(_n)
    _GH[_n] = (_x, _w / _SQRT_2PI)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)

HALF_WINDOW = 12.0
PANEL_WIDTH = 1.0
_FAR_GRID = 12.0 * 2.0 ** np.arange(1, 46)


class EvaluationError(ArithmeticError):
    """A quadrature or integrand produced a non-finite value."""


def _gauss_hermite(loss, m, s, moment):
    out = []
    for n in _GH_SIZES:
        x, w = _GH[n]
        with np.errstate(over="ignore", invalid="ignore"):
            f = loss(m + s * x) * (x**moment if moment else 1.0)
        if not np.all(np.isfinite(f)):
            return None
        out.append((float(np.dot(w, f)), float(np.dot(w, np.abs(f)))))
    (r0, _), (r1, scale) = out
    if abs(r1 - r0) <= 1e-13 * scale:
        return r1
    return None


def _log_integrand(loss, m, s, z):
    with np.errstate(over="ignore", invalid="ignore"):
        return loss.log(m + s * z) - 0.5 * z * z


def _windows(loss, m, s, lower, upper):
    """Intervals in z that carry all but a negligible part of the mass."""
    lin = np.linspace(-HALF_WINDOW, HALF_WINDOW, 97)
    grid = np.concatenate([-_FAR_GRID[::-1], lin, _FAR_GRID])
    grid = grid[(grid >= lower) & (grid <= upper)]
    extra = [v for v in (lower, upper) if math.isfinite(v)]
    if loss.exp_rate is not None:
        # an exponential tail tilts the Gaussian to a unit-width bump at z = a s
        extra.extend(loss.exp_rate * s + np.arange(-3.0, 4.0))
    grid = np.unique(np.concatenate([grid, extra]))
    g = _log_integrand(loss, m, s, grid)
    g = np.where(np.isnan(g), -np.inf, g)
    peak = float(np.max(g))
    wins = [(max(lower, -HALF_WINDOW), min(upper, HALF_WINDOW))]
    if not math.isfinite(peak):
        return wins, peak
    modes = []
    left = np.concatenate([[-np.inf], g[:-1]])
    right = np.concatenate([g[1:], [-np.inf]])
    cand = np.flatnonzero(np.isfinite(g) & (g >= left) & (g >= right) & (np.abs(grid) > 2.0))
    for i in cand:
        lo = grid[i - 1] if i > 0 else grid[i]
        hi = grid[i + 1] if i + 1 < grid.size else grid[i]
        zc, gc = float(grid[i]), float(g[i])
        # unit spacing already pins a unit-width bump well inside its window
        if hi - lo > 2.0:
            res = minimize_scalar(
                lambda t: -float(_log_integrand(loss, m, s, np.array([t]))[0]),
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-6 * max(1.0, abs(grid[i]))},
            )
            if -float(res.fun) >= gc:
                zc, gc = float(res.x), -float(res.fun)
        if abs(zc) > 2.0:
            modes.append((zc, gc))
    for zc, gc in modes:
        peak = max(peak, gc)
    for zc, gc in modes:
        if gc >= peak - 80.0:
            wins.append((max(lower, zc - HALF_WINDOW), min(upper, zc + HALF_WINDOW)))
    return wins, peak


def _merge(intervals):
    out = []
    for a, b in sorted(i for i in intervals if i[1] > i[0]):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _composite(loss, m, s, lower, upper, moment, wins, peak, log=False):
    if not math.isfinite(peak):
        return -math.inf if log else 0.0
    cuts = [(bp - m) / s for bp in loss.breakpoints()]
    edges = []
    for a, b in _merge(wins):
        pts = [a, b] + [c for c in cuts if a < c < b]
        pts.sort()
        for lo, hi in zip(pts[:-1], pts[1:]):
            k = max(1, math.ceil((hi - lo) / PANEL_WIDTH))
            edges.append(np.linspace(lo, hi, k + 1))
    if not edges:
        return -math.inf if log else 0.0
    lo = np.concatenate([e[:-1] for e in edges])
    hi = np.concatenate([e[1:] for e in edges])
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    z = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    wts = (half[:, None] * _GL_W[None, :]).ravel()
    g = _log_integrand(loss, m, s, z)
    with np.errstate(invalid="ignore", under="ignore"):
        f = np.exp(g - peak)
    f = np.where(np.isnan(g), np.nan, f)
    if moment:
        f = f * z**moment
    if not np.all(np.isfinite(f)):
        bad = z[~np.isfinite(f)][0]
        raise EvaluationError(f"non-finite integrand at error value {m + s * bad:.6g}")
    total = float(np.dot(wts, f))
    log_scale = peak - _LOG_SQRT_2PI
    if log:
        return log_scale + math.log(total) if total > 0 else -math.inf
    if log_scale > 709.0:
        if total == 0.0:
            return 0.0
        raise EvaluationError(f"Gaussian expectation overflows (log scale {log_scale:.1f})")
    return math.exp(log_scale) * total


def gaussian_expectation(loss, mean, sd, lower=-math.inf, upper=math.inf, moment=0, log=False):
    """``E[loss(mean + sd*Z) * Z**moment; lower <= Z <= upper]``, ``Z ~ N(0, 1)``.

    With ``log=True`` (only for ``moment=0``) the logarithm is returned, which
    stays finite when the expectation itself is beyond double range.
    """
    if log and moment:
        raise ValueError("log output needs moment=0")
    if not sd > 0:
        raise ValueError("sd must be positive")
    wins, peak = _windows(loss, mean, sd, lower, upper)
    # Hermite nodes only reach |z| ~ 13, so mass found further out rules them out
    if loss.smooth and len(wins) == 1 and math.isinf(lower) and math.isinf(upper):
        r = _gauss_hermite(loss, mean, sd, moment)
        if r is not None:
            return (math.log(r) if r > 0 else -math.inf) if log else r
    r = _composite(loss, mean, sd, lower, upper, moment, wins, peak, log)
    if log:
        return r
    if not math.isfinite(r):
        raise EvaluationError(f"non-finite Gaussian expectation at mean {mean:.6g}")
    return r

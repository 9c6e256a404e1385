"""Asymmetric loss functions and their truncations.

A loss is an immutable :class:`LossSpec`. Every loss maps an estimation error
``delta = estimate - truth`` to a nonnegative number, vectorised over numpy
arrays. Truncation ``min(l(delta), a)`` is a property of the loss specification rather than
a separate type, so truncated and untruncated losses flow through the same
solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

KINDS = ("linex", "check", "wasym", "squared", "tabulated")


@dataclass(frozen=True)
class LossSpec:
    """An asymmetric loss, optionally truncated at ``truncation``.

    Use the constructors :func:`linex`, :func:`check`, :func:`weighted_asym`,
    :func:`squared` and :func:`tabulated` rather than building this directly.
    """

    kind: str
    params: tuple = ()
    truncation: float | None = None
    _param_dict: dict = field(default=None, init=False, repr=False, compare=False, hash=False)
    _breaks: tuple = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        p = dict(self.params)
        object.__setattr__(self, "_param_dict", p)
        if self.kind == "linex":
            if p["a"] == 0 or not math.isfinite(p["a"]):
                raise ValueError("LINEX requires a != 0")
            if not p["b"] > 0:
                raise ValueError("LINEX requires b > 0")
        elif self.kind == "check":
            if not (p["c1"] > 0 and p["c2"] > 0):
                raise ValueError("check loss requires c1 > 0 and c2 > 0")
        elif self.kind == "wasym":
            if not (p["lam"] > 0 and p["weight"] > 0):
                raise ValueError("weighted asymmetric loss requires lambda > 0 and weight > 0")
        elif self.kind == "tabulated":
            x, y = np.asarray(p["x"]), np.asarray(p["y"])
            if x.ndim != 1 or x.shape != y.shape or x.size < 2 or np.any(np.diff(x) <= 0):
                raise ValueError("tabulated loss needs strictly increasing nodes and matching values")
        if self.truncation is not None and not self.truncation > 0:
            raise ValueError("truncation level must be positive")

    def __getitem__(self, name):
        return self._param_dict[name]

    # -- evaluation -------------------------------------------------------

    def raw(self, delta):
        """Untruncated loss value."""
        d = np.asarray(delta, dtype=float)
        p = self._param_dict
        if self.kind == "linex":
            x = p["a"] * d
            with np.errstate(over="ignore"):
                # expm1(x) - x cancels for small x; switch to the series there
                series = 0.5 * x * x * (1.0 + x / 3.0 * (1.0 + x / 4.0 * (1.0 + x / 5.0)))
                out = p["b"] * np.where(np.abs(x) < 1e-3, series, np.expm1(x) - x)
        elif self.kind == "check":
            out = np.where(d >= 0, p["c1"] * d, -p["c2"] * d)
        elif self.kind == "wasym":
            out = np.where(d >= 0, p["lam"] * p["weight"], p["weight"]) * d * d
        elif self.kind == "squared":
            out = d * d
        else:
            out = np.interp(d, p["x"], p["y"])
        return out

    def __call__(self, delta):
        out = self.raw(delta)
        if self.truncation is not None:
            out = np.minimum(out, self.truncation)
        return out

    def log(self, delta):
        """``log l(delta)`` without overflow; ``-inf`` where the loss is zero."""
        d = np.asarray(delta, dtype=float)
        p = self._param_dict
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if self.kind == "linex":
                x = p["a"] * d
                big = x > 30.0
                xs = np.where(big, 0.0, x)
                small = np.log(np.expm1(xs) - xs)
                # x + log(1 - (1 + x) e^{-x}) once e^x dominates
                xb = np.where(big, x, 31.0)
                large = xb + np.log1p(-(1.0 + xb) * np.exp(-xb))
                tiny = np.abs(x) < 1e-4
                series = 2.0 * np.log(np.abs(x)) - math.log(2.0) + np.log1p(x / 3.0)
                out = np.where(big, large, np.where(tiny, series, small)) + math.log(p["b"])
            elif self.kind == "check":
                out = np.log(np.where(d >= 0, p["c1"], p["c2"]) * np.abs(d))
            elif self.kind == "wasym":
                out = np.log(np.where(d >= 0, p["lam"] * p["weight"], p["weight"])) + 2.0 * np.log(np.abs(d))
            elif self.kind == "squared":
                out = 2.0 * np.log(np.abs(d))
            else:
                out = np.log(self.raw(d))
        if self.truncation is not None:
            out = np.minimum(out, math.log(self.truncation))
        return out

    # -- structure used by the quadrature ----------------------------------

    @property
    def smooth(self):
        """True when the loss is analytic on the whole line."""
        return self.kind in ("linex", "squared") and self.truncation is None

    @property
    def exp_rate(self):
        """Rate ``a`` of exponential growth of the loss, or None if it grows slower."""
        if self.kind == "linex" and self.truncation is None:
            return self["a"]
        return None

    def breakpoints(self):
        """Error values where the loss is not analytic."""
        if self._breaks is None:
            object.__setattr__(self, "_breaks", tuple(self._find_breakpoints()))
        return list(self._breaks)

    def _find_breakpoints(self):
        pts = []
        if self.kind in ("check", "wasym"):
            pts.append(0.0)
        elif self.kind == "tabulated":
            pts.extend(float(v) for v in self["x"])
        if self.truncation is not None:
            pts.extend(self._level_crossings(self.truncation))
        return sorted(set(pts))

    def _level_crossings(self, level):
        """Points where the untruncated loss reaches ``level`` on each side of 0."""
        out = []
        for sign in (-1.0, 1.0):
            hi = 1.0
            while float(self.raw(sign * hi)) < level:
                hi *= 2.0
                if hi > 1e300:
                    break
            else:
                root = brentq(lambda t: float(self.raw(sign * t)) - level, 0.0, hi, xtol=1e-15, rtol=1e-15)
                out.append(sign * root)
        return out

    # -- conveniences -------------------------------------------------------

    def truncated(self, level):
        return replace(self, truncation=None if level is None else float(level))

    def untruncated(self):
        return replace(self, truncation=None)

    def to_dict(self):
        d = {"kind": self.kind}
        for k, v in self.params:
            d[k] = list(v) if isinstance(v, tuple) else v
        if self.truncation is not None:
            d["truncation"] = self.truncation
        return d

    def __str__(self):
        body = ",".join(f"{k}={v:g}" for k, v in self.params if not isinstance(v, tuple))
        s = self.kind + (":" + body if body else "")
        if self.truncation is not None:
            s += f"[trunc={self.truncation:g}]"
        return s


def linex(a=1.0, b=1.0, truncation=None):
    """``b (exp(a d) - a d - 1)``; ``a > 0`` penalises over-estimation more."""
    return LossSpec("linex", (("a", float(a)), ("b", float(b))), truncation)


def check(c1, c2, truncation=None):
    """``c1 d`` for ``d >= 0`` and ``-c2 d`` for ``d < 0``."""
    return LossSpec("check", (("c1", float(c1)), ("c2", float(c2))), truncation)


def weighted_asym(lam, weight=1.0, truncation=None):
    """Squared-error base loss with over-estimation scaled by ``lam``.

    The parameter-dependent weight is taken as the constant ``weight``.
    """
    return LossSpec("wasym", (("lam", float(lam)), ("weight", float(weight))), truncation)


def squared(truncation=None):
    return LossSpec("squared", (), truncation)


def tabulated(x, y, truncation=None):
    """Piecewise-linear loss through ``(x, y)``, constant beyond the end nodes."""
    return LossSpec("tabulated", (("x", tuple(map(float, x))), ("y", tuple(map(float, y)))), truncation)


_ALIASES = {
    "linex": "linex",
    "check": "check",
    "wasym": "wasym",
    "weighted_asym": "wasym",
    "squared": "squared",
    "squared_error": "squared",
    "tabulated": "tabulated",
}


def from_dict(d):
    """Build a loss from its JSON form, e.g. ``{"kind": "linex", "a": 1, "b": 1}``."""
    d = dict(d)
    kind = _ALIASES.get(str(d.pop("kind")).lower())
    trunc = d.pop("truncation", d.pop("trunc", None))
    if kind == "linex":
        spec = linex(d.pop("a"), d.pop("b", 1.0))
    elif kind == "check":
        spec = check(d.pop("c1"), d.pop("c2"))
    elif kind == "wasym":
        spec = weighted_asym(d.pop("lambda", d.pop("lam", None)), d.pop("weight", 1.0))
    elif kind == "squared":
        spec = squared()
    elif kind == "tabulated":
        spec = tabulated(d.pop("x"), d.pop("y"))
    else:
        raise ValueError(f"unknown loss kind in {d!r}")
    if d:
        raise ValueError(f"unexpected loss parameters {sorted(d)}")
    return spec.truncated(trunc)


def parse(text):
    """Parse the CLI form ``kind:key=value,key=value`` (e.g. ``linex:a=1,b=1``)."""
    kind, _, rest = text.partition(":")
    d = {"kind": kind}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        d[k.strip().lower()] = float(v)
    return from_dict(d)


@dataclass
class AssumptionReport:
    nonnegative: bool
    zero_at_origin: bool
    monotone: bool
    witnesses: dict

    @property
    def passed(self):
        return self.nonnegative and self.zero_at_origin and self.monotone


def check_assumptions(loss, grid):
    """Check nonnegativity, ``l(0) = 0`` and one-sided monotonicity on ``grid``.

    Returns an :class:`AssumptionReport`; the first violating points are kept
    in ``witnesses``.
    """
    g = np.unique(np.asarray(grid, dtype=float))
    if not (np.any(g < 0) and np.any(g > 0) and np.any(g == 0)):
        raise ValueError("grid must contain 0 and points of both signs")
    v = np.asarray(loss(g), dtype=float)
    witnesses = {}
    neg_bad = g[(v < 0) | ~np.isfinite(v)]
    if neg_bad.size:
        witnesses["nonnegative"] = float(neg_bad[0])
    zero_ok = float(loss(0.0)) == 0.0
    if not zero_ok:
        witnesses["zero_at_origin"] = 0.0
    mono_ok = True
    left, right = g <= 0, g >= 0
    # non-increasing on the left half, non-decreasing on the right half
    dl = np.diff(v[left])
    dr = np.diff(v[right])
    if np.any(dl > 0):
        mono_ok = False
        witnesses["monotone"] = float(g[left][1:][dl > 0][0])
    elif np.any(dr < 0):
        mono_ok = False
        witnesses["monotone"] = float(g[right][1:][dr < 0][0])
    return AssumptionReport(not neg_bad.size, zero_ok, mono_ok, witnesses)

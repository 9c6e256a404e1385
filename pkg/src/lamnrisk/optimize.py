"""Derivative-free one-dimensional minimisation."""

from __future__ import annotations

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol=1e-10, max_iter=200, rel=True):
    """Minimise a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, fx, lo, hi, iterations)``; ``lo, hi`` is the final bracket.
    The stopping width is ``tol * max(1, |x|)`` when ``rel`` is set.
    """
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    it = 0
    while it < max_iter:
        scale = max(1.0, abs(x1)) if rel else 1.0
        if hi - lo <= tol * scale:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
        it += 1
    x, fx = (x1, f1) if f1 <= f2 else (x2, f2)
    return x, fx, lo, hi, it


def bracket_minimum(f, x0=0.0, step=1.0, grow=2.0, max_steps=60):
    """Walk downhill from ``x0`` with growing steps until ``f`` turns up.

    Returns ``(lo, hi, ok)``: a bracket around a local minimum, and whether
    one was found within ``max_steps`` expansions.
    """
    f0 = f(x0)
    fl, fr = f(x0 - step), f(x0 + step)
    if fl >= f0 and fr >= f0:
        return x0 - step, x0 + step, True
    direction = -1.0 if fl < fr else 1.0
    prev, best, fbest = x0, x0 + direction * step, min(fl, fr)
    h = step
    for _ in range(max_steps):
        h *= grow
        nxt = best + direction * h
        fn = f(nxt)
        if fn >= fbest:
            lo, hi = sorted((prev, nxt))
            return lo, hi, True
        prev, best, fbest = best, nxt, fn
    lo, hi = sorted((prev, best))
    return lo, hi, False

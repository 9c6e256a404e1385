"""Local asymptotic minimax lower bound for a loss and a mixing law.

The bound is the conditional minimum risk ``min_beta h(beta, w)`` averaged
over the law of ``W``. Divergence is a legitimate outcome; it happens, for
instance, for LINEX under a chi-squared mixing law.
"""

from __future__ import annotations

from .bias import DEFAULT_CONFIG, SolverError, solve_beta0
from .mixing import expect


def conditional_minimum(loss, w, cfg=DEFAULT_CONFIG):
    r = solve_beta0(loss, w, cfg)
    if not r.converged:
        raise SolverError(f"beta0 solver did not converge at w={w:g}")
    return r.h_min


def minimax_bound(loss, g, cfg=DEFAULT_CONFIG):
    """``E_g[h(beta0(W), W)]`` as an :class:`~lamnrisk.mixing.Integral`."""
    return expect(g, lambda w: conditional_minimum(loss, w, cfg))


def minimax_bound_truncated(loss, a_trunc, g, cfg=DEFAULT_CONFIG):
    """The bound under ``min(l, a_trunc)``, with ``beta0`` re-solved for it.

    The integrand never exceeds ``a_trunc``, so the result is always finite.
    """
    if not a_trunc > 0:
        raise ValueError("a_trunc must be positive")
    return minimax_bound(loss.truncated(a_trunc), g, cfg)

"""Counter-based random streams.

A stream is a Philox generator keyed by a tuple of nonnegative integers, e.g.
``(seed, h_index, chunk)``. Any key can be materialised independently of
every other, so work can be split across processes without changing results.
"""

from __future__ import annotations

import numpy as np


def substream(*key):
    """Independent ``numpy.random.Generator`` for the integer ``key``."""
    if not key or any(int(k) < 0 for k in key):
        raise ValueError("stream keys must be nonnegative integers")
    ss = np.random.SeedSequence([int(k) for k in key])
    return np.random.Generator(np.random.Philox(ss))


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return seed

import math

import pytest
from numpy.testing import assert_allclose

from lamnrisk.optimize import bracket_minimum, golden_section
from lamnrisk.rng import check_seed, substream


class TestGoldenSection:
    def test_quadratic(self):
        x, fx, lo, hi, it = golden_section(lambda t: (t - 1.3) ** 2, -5, 5, tol=1e-10)
        assert_allclose(x, 1.3, atol=1e-9)
        assert lo <= x <= hi and hi - lo <= 1e-9
        assert it < 200

    def test_kink(self):
        x, *_ = golden_section(lambda t: abs(t + 0.25), -3, 2, tol=1e-12)
        assert_allclose(x, -0.25, atol=1e-11)

    def test_iteration_cap(self):
        *_, it = golden_section(lambda t: t * t, -1, 1, tol=1e-15, max_iter=10)
        assert it == 10


class TestBracket:
    def test_far_minimum(self):
        lo, hi, ok = bracket_minimum(lambda t: (t - 1000.0) ** 2, step=0.5)
        assert ok and lo < 1000.0 < hi

    def test_minimum_at_start(self):
        lo, hi, ok = bracket_minimum(lambda t: t * t, step=0.5)
        assert ok and (lo, hi) == (-0.5, 0.5)

    def test_unbounded_reports_failure(self):
        _, _, ok = bracket_minimum(lambda t: -t, max_steps=5)
        assert not ok


class TestStreams:
    def test_reproducible(self):
        a = substream(7, 1, 2).standard_normal(5)
        b = substream(7, 1, 2).standard_normal(5)
        assert (a == b).all()

    def test_distinct_keys(self):
        assert substream(7, 1, 2).random() != substream(7, 1, 3).random()

    def test_invalid(self):
        with pytest.raises(ValueError):
            substream(-1)
        with pytest.raises(ValueError):
            check_seed(2**64)
        assert check_seed(2**64 - 1) == 2**64 - 1

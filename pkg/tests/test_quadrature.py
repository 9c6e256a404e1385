import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from lamnrisk import losses as L
from lamnrisk.quadrature import gaussian_expectation

import oracles


class TestGaussianExpectation:
    @pytest.mark.parametrize("m,s", [(0.0, 1.0), (-0.5, 1.0), (0.3, 2.0), (-10.0, 10.0), (-5e3, 100.0)])
    def test_linex_closed_form(self, m, s):
        # E[b(exp(a(m + sZ)) - a(m + sZ) - 1)] = b(exp(a m + a^2 s^2 / 2) - a m - 1)
        got = gaussian_expectation(L.linex(1, 1), m, s)
        want = math.exp(m + 0.5 * s * s) - m - 1.0
        assert_allclose(got, want, rtol=1e-10)

    def test_squared(self):
        assert_allclose(gaussian_expectation(L.squared(), 0.7, 2.0), 0.49 + 4.0, rtol=1e-13)

    @pytest.mark.parametrize("m,s,cap", [(0.0, 1.0, None), (-0.8, 3.0, None), (1.0, 30.0, 50.0), (-20.0, 1e3, 50.0)])
    def test_check_closed_form(self, m, s, cap):
        got = gaussian_expectation(L.check(4, 1, cap), m, s)
        want = oracles.check_risk(m / s, s**-2, 4.0, 1.0, cap)
        assert_allclose(got, want, rtol=1e-10, atol=1e-13)

    def test_window_matches_quad(self):
        loss = L.check(1, 1, 3.0)
        f = lambda z: float(loss(0.2 + 1.5 * z)) * stats.norm.pdf(z)
        kinks = [(-3.0 - 0.2) / 1.5, -0.2 / 1.5, (3.0 - 0.2) / 1.5]
        want = integrate.quad(f, -1.0, 2.0, points=kinks, epsabs=1e-14, epsrel=1e-13)[0]
        assert_allclose(gaussian_expectation(loss, 0.2, 1.5, -1.0, 2.0), want, rtol=1e-10)

    def test_first_moment(self):
        # E[(m + sZ)^2 Z] = 2 m s
        assert_allclose(gaussian_expectation(L.squared(), 0.4, 2.0, moment=1), 1.6, rtol=1e-12)

    def test_log_beyond_double_range(self):
        s = 1e3
        got = gaussian_expectation(L.linex(1, 1), -0.5 * s * s, s, log=True)
        assert_allclose(got, math.log(0.5 * s * s - 1.0 + 1.0), rtol=1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            gaussian_expectation(L.squared(), 0.0, 0.0)
        with pytest.raises(ValueError):
            gaussian_expectation(L.squared(), 0.0, 1.0, moment=1, log=True)

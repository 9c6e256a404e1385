import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats
from sklearn.base import clone

from lamnrisk import losses as L
from lamnrisk import mixing as M
from lamnrisk.bias import (
    DEFAULT_CONFIG,
    Beta0Config,
    Beta0Transformer,
    expected_beta0,
    h_tilde_value,
    h_value,
    solve_beta0,
    solve_beta_tilde,
)

import oracles

# brute-force grid minimisers of the check risk at w = 1 (1e5 points on [-4, 4])
CHECK_GRID = {(2, 1): -0.43071999999999955, (4, 1): -0.8415999999999997, (1, 3): 0.67448}
CHECK_GRID_STEP = 8e-05


class TestHValue:
    def test_linex(self):
        assert_allclose(h_value(L.linex(1, 1), 0.0, 1.0), math.exp(0.5) - 1.0, atol=1e-8)
        assert_allclose(h_value(L.linex(1, 1), -0.5, 1.0), 0.5, atol=1e-8)

    def test_squared(self):
        assert_allclose(h_value(L.squared(), 0.0, 1.0), 1.0, rtol=1e-13)

    @pytest.mark.parametrize("beta,w", [(0.0, 1.0), (-0.3, 0.01), (2.0, 50.0)])
    def test_linex_oracle(self, beta, w):
        assert_allclose(h_value(L.linex(2, 3), beta, w), oracles.linex_h(beta, w, 2.0, 3.0), rtol=1e-10)

    @pytest.mark.parametrize("beta,w,cap", [(-0.8, 1.0, None), (0.4, 1e-4, 50.0), (-3.0, 1e-6, 50.0)])
    def test_check_oracle(self, beta, w, cap):
        assert_allclose(h_value(L.check(4, 1, cap), beta, w), oracles.check_risk(beta, w, 4, 1, cap), rtol=1e-10)

    def test_invalid_w(self):
        with pytest.raises(ValueError):
            h_value(L.squared(), 0.0, 0.0)


class TestSolveBeta0:
    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("b", [1.0, 3.0])
    @pytest.mark.parametrize("w", [0.25, 1.0, 4.0])
    def test_linex_closed_form(self, a, b, w):
        r = solve_beta0(L.linex(a, b), w)
        assert r.converged
        assert abs(r.beta0 + a / (2 * math.sqrt(w))) <= 1e-8
        assert abs(r.h_min - b * a * a / (2 * w)) <= 1e-8

    @pytest.mark.parametrize("w", [1e-12, 1e-6, 3e-4, 1e2, 1e4])
    def test_linex_extreme_w(self, w):
        r = solve_beta0(L.linex(1, 1), w)
        assert_allclose(r.beta0, -0.5 / math.sqrt(w), rtol=1e-9)

    @pytest.mark.parametrize("c", [(2, 1), (4, 1), (1, 3)])
    def test_check_quantile(self, c):
        q = stats.norm.ppf(c[1] / sum(c))
        assert abs(CHECK_GRID[c] - q) <= CHECK_GRID_STEP
        for w in (0.25, 1.0, 4.0):
            assert abs(solve_beta0(L.check(*c), w).beta0 - q) <= 1e-6

    def test_squared(self):
        for w in (0.1, 1.0, 7.0):
            assert abs(solve_beta0(L.squared(), w).beta0) <= 1e-8

    @pytest.mark.parametrize("w", [1e-4, 0.01, 1.0, 100.0])
    def test_truncated_check_oracle(self, w):
        # the truncated minimum scales as s m(cap / s) with s = w^{-1/2}
        s = w**-0.5
        r = solve_beta0(L.check(4, 1, 50.0), w)
        assert_allclose(r.h_min, s * oracles.unit_check_min(50.0 / s, 4.0, 1.0), rtol=1e-8)

    def test_direction(self):
        assert solve_beta0(L.linex(1, 1), 1.0).beta0 < 0
        assert solve_beta0(L.linex(-1, 1), 1.0).beta0 > 0
        assert solve_beta0(L.check(3, 1), 2.0).beta0 < 0
        assert solve_beta0(L.check(1, 3), 2.0).beta0 > 0

    @pytest.mark.parametrize("loss", [L.linex(1, 1), L.check(2, 1), L.check(4, 1, 50.0), L.weighted_asym(3.0)])
    def test_local_optimality(self, loss):
        r = solve_beta0(loss, 0.5)
        probe = 10 * DEFAULT_CONFIG.min_tol
        for d in (-probe, probe):
            assert h_value(loss, r.beta0 + d, 0.5) >= r.h_min - 1e-12

    @pytest.mark.parametrize("loss", [L.linex(1, 1), L.check(2, 1)])
    def test_midpoint_convexity(self, loss):
        grid = np.linspace(-3, 2, 21)
        h = np.array([h_value(loss, b, 1.0) for b in grid])
        assert np.all(h[1:-1] <= 0.5 * (h[:-2] + h[2:]) + 1e-12)

    def test_h_min_consistent(self):
        r = solve_beta0(L.check(4, 1), 2.0)
        assert_allclose(r.h_min, h_value(L.check(4, 1), r.beta0, 2.0), rtol=1e-12)

    def test_iteration_cap_reported(self):
        r = solve_beta0(L.check(2, 1), 1.0, Beta0Config(max_iter=3, min_tol=1e-14))
        assert not r.converged

    def test_config_validation(self):
        with pytest.raises(ValueError):
            Beta0Config(quad_nodes=8)
        with pytest.raises(ValueError):
            Beta0Config(min_tol=0.0)


class TestTruncatedWindow:
    def test_recovers_h(self):
        for loss in (L.linex(1, 1), L.check(2, 1)):
            got = h_tilde_value(loss, -0.3, 1.0, 1e6, 400.0, 1e-6)
            assert_allclose(got, h_value(loss, -0.3, 1.0), atol=1e-6)

    def test_check_exact(self):
        got = h_tilde_value(L.check(1, 1), 0.0, 1.0, 1e6, 400.0, 0.0)
        assert_allclose(got, h_value(L.check(1, 1), 0.0, 1.0), atol=1e-8)

    def test_bounded_by_level(self):
        for beta in (-5.0, 0.0, 3.0):
            assert h_tilde_value(L.linex(1, 1), beta, 0.2, 0.1, 9.0, 0.5) <= 0.1

    def test_limit(self):
        r = solve_beta_tilde(L.linex(1, 1), 1.0, 1e6, 400.0, 1e-6)
        assert abs(r.beta0 + 0.5) <= 1e-4

    def test_squared(self):
        for a, b, lam in ((5.0, 4.0, 0.3), (1e3, 100.0, 0.0)):
            assert abs(solve_beta_tilde(L.squared(), 0.7, a, b, lam).beta0) <= 1e-8

    def test_monotone_approach(self):
        gaps = [abs(solve_beta_tilde(L.linex(1, 1), 1.0, a, 400.0, 1e-6).beta0 + 0.5) for a in (10.0, 1e2, 1e6)]
        assert gaps[0] >= gaps[1] >= gaps[2]

    def test_invalid(self):
        with pytest.raises(ValueError):
            h_tilde_value(L.squared(), 0.0, 1.0, 0.0, 1.0, 0.0)


class TestExpectedBeta0:
    def test_point(self):
        assert_allclose(expected_beta0(L.linex(1, 1), M.point(1.0)).value, -0.5, atol=1e-9)

    def test_chi2_divergent(self):
        assert expected_beta0(L.linex(1, 1), M.chi2_1()).divergent

    @pytest.mark.slow
    def test_exp(self):
        assert_allclose(expected_beta0(L.linex(1, 1), M.exp1()).value, -0.5 * math.sqrt(math.pi), atol=1e-6)


class TestTransformer:
    def test_interpolates(self):
        t = Beta0Transformer(L.linex(1, 1), w_min=1e-2, w_max=1e2, points_per_decade=8).fit()
        w = np.array([0.013, 0.5, 3.3, 77.0])
        assert_allclose(t.transform(w), -0.5 / np.sqrt(w), rtol=1e-4)

    def test_outside_grid_solves(self):
        t = Beta0Transformer(L.linex(1, 1), w_min=1.0, w_max=10.0, points_per_decade=4).fit()
        assert_allclose(t(np.array([1e-3, 1e3])), -0.5 / np.sqrt([1e-3, 1e3]), rtol=1e-9)

    def test_fit_widens_to_data(self):
        t = Beta0Transformer(L.squared(), w_min=1.0, w_max=2.0, points_per_decade=2).fit(np.array([0.1, 5.0]))
        assert_allclose(np.exp(t.log_w_[[0, -1]]), [0.1, 5.0], rtol=1e-14)

    def test_sklearn_protocol(self):
        t = Beta0Transformer(L.squared(), points_per_decade=2)
        assert clone(t).get_params()["points_per_decade"] == 2
        with pytest.raises(ValueError):
            Beta0Transformer().fit()
        with pytest.raises(ValueError):
            t.fit().transform(np.array([0.0]))

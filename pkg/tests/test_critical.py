"""Critical manifold limit: envelope bound, O(eps) convergence, invariances."""

import numpy as np
import pytest

from slowfold.critical import (
    epsilon_sweep,
    make_unit_noise_path,
    s_bound,
    s_envelope,
    solve_breve_manifold,
    solve_critical_manifold,
)
from slowfold.models import make_parabolic_ode, make_scalar_linear, scalar_linear_slope, with_cutoff


def _mk_scalar(eps):
    return make_scalar_linear(1.0, 0.4, 0.3, 0.0, epsilon=eps, mu=0.5)


class TestSBound:
    def test_envelope_below_bound_on_grid(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            g1 = rng.uniform(0.5, 3.0)
            g2 = rng.uniform(0.05, 1.0)
            mu = rng.uniform(0.1, 0.9) * g1
            eps = rng.uniform(0.01, 0.9) * min(mu, g1) / g2
            t_star, bound = s_bound(g1, g2, mu, eps)
            t = np.linspace(-max(5.0 * abs(t_star), 50.0 / mu), 0.0, 100_000)
            assert float(np.max(s_envelope(t, g1, g2, mu, eps))) <= bound + 1e-8

    def test_stationary_point(self):
        g1, g2, mu, eps = 2.0, 0.5, 0.8, 0.3
        t_star, bound = s_bound(g1, g2, mu, eps)
        dt = 1e-6
        s0 = s_envelope(np.array([t_star]), g1, g2, mu, eps)[0]
        s1 = s_envelope(np.array([t_star + dt]), g1, g2, mu, eps)[0]
        assert abs(s1 - s0) / dt < 1e-4
        assert s0 <= bound

    def test_gamma2_zero_degenerates(self):
        assert s_bound(2.0, 0.0, 0.8, 0.3) == (0.0, 0.0)
        t = np.linspace(-10, 0, 100)
        assert np.allclose(s_envelope(t, 2.0, 0.0, 0.8, 0.3), 0.0, atol=1e-15)

    def test_bound_vanishes_linearly(self):
        b1 = s_bound(2.0, 0.5, 0.8, 0.1)[1]
        b2 = s_bound(2.0, 0.5, 0.8, 0.05)[1]
        assert 1.8 < b1 / b2 < 2.2

    def test_gate_violation(self):
        with pytest.raises(ValueError):
            s_bound(2.0, 1.0, 0.5, 1.0)  # eps*gamma2 >= mu


class TestScalarSweep:
    def test_critical_slope_is_k_over_a(self):
        sys = _mk_scalar(0.1)
        h = solve_critical_manifold(sys, np.array([[1.0]]), tol=1e-12)
        assert abs(h[0, 0] - 0.4) < 1e-10

    def test_breve_equals_slow_scaling(self):
        # the rescaled construction reproduces the original manifold exactly
        for eps in (0.1, 0.02):
            sys = _mk_scalar(eps)
            hb = solve_breve_manifold(sys, np.array([[1.0]]), tol=1e-10)
            assert abs(hb[0, 0] - scalar_linear_slope(1.0, 0.4, 0.3, eps)) < 1e-7

    def test_sweep_matches_expansion(self):
        sweep = epsilon_sweep(
            _mk_scalar, [0.1, 0.05, 0.025, 0.0125], np.array([[1.0]]), tol=1e-11
        )
        assert 0.9 <= sweep.slope <= 1.1
        assert sweep.r_squared > 0.999
        a, k, c = 1.0, 0.4, 0.3
        for eps, err in zip(sweep.epsilons, sweep.mean_errors):
            pred = k * k * c * eps / a**3
            assert abs(err - pred) / pred < 0.05


class TestNoisySweep:
    def test_cutoff_model_order_eps(self):
        def mk(eps):
            return with_cutoff(
                make_parabolic_ode(4, 2, 0.12, 0.12, sigma=0.3, epsilon=eps,
                                   mu=0.3, m_noise=2),
                1.0,
            )

        y0 = 0.3 * np.ones((2, 1))
        sweep = epsilon_sweep(mk, [0.1, 0.05, 0.025], y0, seeds=range(5), tol=1e-8)
        assert 0.8 <= sweep.slope <= 1.2

    def test_critical_value_epsilon_independent(self):
        def mk(eps):
            return make_parabolic_ode(4, 2, 0.2, 0.2, sigma=0.4, epsilon=eps,
                                      mu=0.5, m_noise=2)

        path = make_unit_noise_path(mk(0.1), seed=3, tol=1e-9)
        y0 = 0.5 * np.ones((2, 1))
        h1 = solve_critical_manifold(mk(0.1), y0, path=path, tol=1e-9)
        h2 = solve_critical_manifold(mk(0.025), y0, path=path, tol=1e-9)
        assert np.allclose(h1, h2, atol=1e-12)

    def test_common_noise_shared_between_solves(self):
        sys = make_parabolic_ode(4, 2, 0.2, 0.2, sigma=0.4, epsilon=0.05,
                                 mu=0.5, m_noise=2)
        path = make_unit_noise_path(sys, seed=9, tol=1e-8)
        y0 = 0.5 * np.ones((2, 1))
        hb = solve_breve_manifold(sys, y0, path=path, tol=1e-8)
        hc = solve_critical_manifold(sys, y0, path=path, tol=1e-8)
        # same xi: the gap is the O(eps) effect, far below the noise scale
        gap = float(sys.fast.norm(hb - hc))
        assert 0 < gap < 0.1 * float(sys.fast.norm(hc))

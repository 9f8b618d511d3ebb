"""Backward fixed-point solver: contraction constants, oracles, windows."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slowfold.errors import NoContractionError, WindowError
from slowfold.lp import (
    BackwardSolver,
    choose_window,
    contraction_factor,
    empirical_lipschitz,
    evaluate_manifold,
    manifold_graph,
    manifold_lipschitz_bound,
)
from slowfold.models import make_parabolic_hyperbolic, make_scalar_linear, scalar_linear_slope
from slowfold.noise import TimeGrid, ou_stationary_path, sample_wiener_path


class TestContractionFactor:
    def test_closed_form(self):
        kappa = contraction_factor(0.4, 1.0, 0.0, 0.5, 0.01)
        assert np.isclose(kappa, 0.4 / 0.5 + 0.01 * 0.4 / 0.5)

    def test_critical_mode_drops_slow_term(self):
        assert np.isclose(contraction_factor(0.4, 1.0, 0.3, 0.5, 0.1, "critical"), 0.8)

    def test_error_names_admissible_epsilon(self):
        with pytest.raises(NoContractionError, match="largest admissible epsilon"):
            contraction_factor(0.45, 1.0, 0.0, 0.5, 2.0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=0.001, max_value=0.2), st.floats(min_value=0.001, max_value=0.2))
    def test_monotone_in_epsilon(self, e1, e2):
        lo, hi = sorted((e1, e2))
        k_lo = contraction_factor(0.4, 1.0, 0.3, 0.5, lo)
        k_hi = contraction_factor(0.4, 1.0, 0.3, 0.5, hi)
        assert k_lo <= k_hi + 1e-12

    def test_lipschitz_bound(self):
        kappa = contraction_factor(0.4, 1.0, 0.0, 0.5, 0.01)
        bound = manifold_lipschitz_bound(0.4, 1.0, 0.5, kappa)
        assert np.isclose(bound, 0.4 / (0.5 * (1 - kappa)))


class TestScalarOracle:
    def test_slope_matches_eigen_oracle(self):
        sys = make_scalar_linear(1.0, 0.4, 0.3, 0.0, epsilon=0.01, mu=0.5)
        h = evaluate_manifold(sys, np.array([[1.0]]), tol=1e-10)
        assert abs(h[0, 0] - scalar_linear_slope(1.0, 0.4, 0.3, 0.01)) < 1e-6

    def test_linearity_in_y0(self):
        sys = make_scalar_linear(1.0, 0.4, 0.3, 0.0, epsilon=0.01, mu=0.5)
        solver = BackwardSolver(sys, tol=1e-10)
        h1 = solver.solve(np.array([[1.0]])).fast_at_zero
        h2 = solver.solve(np.array([[-2.5]])).fast_at_zero
        assert np.isclose(h2[0, 0], -2.5 * h1[0, 0], atol=1e-8)

    def test_zero_maps_to_zero(self):
        sys = make_scalar_linear(1.0, 0.4, 0.3, 0.0, epsilon=0.01, mu=0.5)
        h = evaluate_manifold(sys, np.array([[0.0]]), tol=1e-10)
        assert abs(h[0, 0]) < 1e-12


class TestPicardDiagnostics:
    def test_ratios_below_kappa(self):
        sys = make_parabolic_hyperbolic(2.0, 1.0, 5, 0.4, 0.4, epsilon=0.05, mu=0.7)
        solver = BackwardSolver(sys, tol=1e-9)
        res = solver.solve(0.3 * np.ones(sys.state_shapes[1]))
        d = res.diffs
        valid = (d[:-1] > 1e-7) & (d[1:] > 1e-7)
        assert np.all(d[1:][valid] / d[:-1][valid] <= res.kappa + 0.05)
        assert res.converged and res.residual <= 2e-9

    def test_terminal_slow_value_is_y0(self):
        sys = make_parabolic_hyperbolic(2.0, 1.0, 4, 0.4, 0.4, epsilon=0.05, mu=0.7)
        Y0 = 0.2 * np.ones(sys.state_shapes[1])
        res = BackwardSolver(sys, tol=1e-9).solve(Y0)
        assert np.allclose(res.slow_at_zero, Y0, atol=1e-12)


class TestLipschitz:
    def test_empirical_below_bound(self):
        sys = make_scalar_linear(1.0, 0.4, 0.3, 0.0, epsilon=0.01, mu=0.5)
        y0s = [np.array([[v]]) for v in np.linspace(-2, 2, 9)]
        hs = manifold_graph(sys, y0s, tol=1e-9)
        emp = empirical_lipschitz(sys, y0s, hs)
        kappa = contraction_factor(sys.K, sys.gamma1, sys.gamma2, sys.mu, sys.epsilon)
        assert emp <= manifold_lipschitz_bound(sys.K, sys.gamma1, sys.mu, kappa)
        # the scalar model's true Lipschitz constant is the slope itself
        assert np.isclose(emp, scalar_linear_slope(1.0, 0.4, 0.3, 0.01), atol=1e-6)


class TestNoiseHandling:
    def _noisy(self, tol=1e-8):
        sys = make_scalar_linear(1.0, 0.4, 0.3, 0.1, epsilon=0.01, mu=0.5)
        T, dt = choose_window(sys, "slow", tol)
        n = int(np.ceil(T * 1.3 / dt)) + 1
        grid = TimeGrid(-n * dt, 0.0, dt)
        path = ou_stationary_path(sample_wiener_path(grid, 1, 21), sys.fast, 0.1, 0.01)
        return sys, path

    def test_deterministic_given_path(self):
        sys, path = self._noisy()
        Y0 = np.array([[0.5]])
        h1 = evaluate_manifold(sys, Y0, path=path)
        h2 = evaluate_manifold(sys, Y0, path=path)
        assert np.array_equal(h1, h2)

    def test_noise_shifts_manifold(self):
        sys, path = self._noisy()
        h = evaluate_manifold(sys, np.array([[0.5]]), path=path)
        h0 = evaluate_manifold(
            make_scalar_linear(1.0, 0.4, 0.3, 0.0, epsilon=0.01, mu=0.5),
            np.array([[0.5]]),
        )
        assert not np.isclose(h[0, 0], h0[0, 0], atol=1e-6)

    def test_missing_path_rejected(self):
        sys, _ = self._noisy()
        with pytest.raises(ValueError, match="noise path"):
            evaluate_manifold(sys, np.array([[0.5]]))

    def test_short_window_rejected(self):
        sys, _ = self._noisy()
        grid = TimeGrid(-0.05, 0.0, 0.001)
        path = ou_stationary_path(sample_wiener_path(grid, 1, 3), sys.fast, 0.1, 0.01)
        with pytest.raises(WindowError, match="window"):
            BackwardSolver(sys, path=path)

    def test_coarse_step_rejected(self):
        sys, _ = self._noisy()
        grid = TimeGrid(-2.0, 0.0, 0.05)
        path = ou_stationary_path(sample_wiener_path(grid, 1, 3), sys.fast, 0.1, 0.01)
        with pytest.raises(WindowError, match="coarse"):
            BackwardSolver(sys, path=path)

    def test_wrong_ou_scale_rejected(self):
        sys, _ = self._noisy()
        grid = TimeGrid(-1.0, 0.0, 0.001)
        path = ou_stationary_path(sample_wiener_path(grid, 1, 3), sys.fast, 0.1, 1.0)
        with pytest.raises(ValueError, match="OU scale"):
            BackwardSolver(sys, path=path)


class TestWindowRule:
    def test_tail_below_tenth_of_tol(self):
        sys = make_scalar_linear(1.0, 0.4, 0.3, 0.0, epsilon=0.01, mu=0.5)
        for tol in (1e-6, 1e-9):
            T, dt = choose_window(sys, "slow", tol)
            gap = sys.gamma1 - sys.mu
            tail = (sys.K / gap) * np.exp(-gap * T / sys.epsilon)
            assert tail < tol / 10.0 * (1.0 + 1e-9)
            assert dt <= sys.epsilon / 10.0

"""Model constructors, structural gates, cutoff, and Lipschitz honesty."""

import numpy as np
import pytest

from slowfold.errors import AssumptionError
from slowfold.models import (
    apply_cutoff,
    estimate_lipschitz,
    largest_admissible_epsilon,
    make_parabolic_hyperbolic,
    make_parabolic_ode,
    make_scalar_linear,
    make_wave_wave,
    scalar_linear_slope,
    validate_system,
    wave_fast_eigenvalues,
    with_cutoff,
)


class TestGates:
    def test_lipschitz_gap_violation(self):
        with pytest.raises(AssumptionError, match=r"K < gamma1 violated \(A3\)"):
            make_scalar_linear(a=1.0, k=1.1, c=0.3, sigma=0.0)

    def test_mu_gap_violation_message(self):
        with pytest.raises(AssumptionError, match="gamma1 - mu > K violated: 0.2 <= 0.5"):
            make_scalar_linear(a=2.0, k=0.5, c=0.5, sigma=0.0, mu=1.8)

    def test_kappa_violation_names_admissible_epsilon(self):
        with pytest.raises(AssumptionError, match="largest admissible epsilon"):
            make_scalar_linear(a=1.0, k=0.45, c=0.45, sigma=0.0, epsilon=5.0, mu=0.5)

    def test_largest_admissible_epsilon(self):
        K, g1, g2, mu = 0.4, 1.0, 0.3, 0.5
        eps = largest_admissible_epsilon(K, g1, g2, mu)
        kappa = K / (g1 - mu) + eps * K / (mu - eps * g2)
        assert np.isclose(kappa, 1.0)

    def test_valid_system_no_violations(self):
        sys = make_scalar_linear(a=1.0, k=0.4, c=0.3, sigma=0.1)
        assert validate_system(sys) == []


class TestScalarLinear:
    def test_slope_limits(self):
        assert np.isclose(scalar_linear_slope(2.0, 0.5, 0.0, 0.1), 0.25)
        # eps -> 0 recovers the critical slope k/a
        assert np.isclose(scalar_linear_slope(1.0, 0.4, 0.3, 1e-12), 0.4, atol=1e-9)

    def test_slope_is_slow_eigendirection(self):
        a, k, c, eps = 1.0, 0.4, 0.3, 0.01
        M = np.array([[-a / eps, k / eps], [c, 0.0]])
        lams, vecs = np.linalg.eig(M)
        slow = np.argmax(lams.real)
        v = vecs[:, slow]
        assert np.isclose(v[0] / v[1], scalar_linear_slope(a, k, c, eps))


class TestLipschitzHonesty:
    @pytest.mark.parametrize(
        "sys",
        [
            make_scalar_linear(1.0, 0.4, 0.3, 0.0),
            make_parabolic_hyperbolic(2.0, 1.0, 6, 0.4, 0.4),
            make_parabolic_ode(6, 3, 0.3, 0.3),
            make_wave_wave(0.2, 1.0, 0.05, 4, 0.04, 0.04),
        ],
        ids=["scalar", "heat_wave", "heat_ode", "wave_wave"],
    )
    def test_sampled_quotient_below_declared_K(self, sys):
        est = estimate_lipschitz(sys.nonlin, sys.fast, sys.slow, n_samples=150, seed=1)
        assert est <= sys.K * (1.0 + 1e-9)


class TestWaveWave:
    def test_effective_gamma1_from_eigenvalues(self):
        nu, eps, n = 0.2, 0.05, 5
        sys = make_wave_wave(nu, 1.0, eps, n, 0.04, 0.04)
        decays = []
        for k in range(1, n + 1):
            lam = wave_fast_eigenvalues(nu, eps, k)
            decays.append(-max(l.real for l in lam))
        assert np.isclose(sys.gamma1, min(decays), atol=1e-10)
        assert sys.params["nominal_gamma1"] == nu
        # underdamped modes (nu^2 < 4 eps k^2) all decay at nu / 2
        assert np.isclose(sys.gamma1, nu / 2, atol=1e-12)

    def test_overdamped_rate_far_below_nominal(self):
        # strong damping makes the slowest root ~ eps k^2 / nu, not nu
        nu, eps = 2.0, 0.02
        sys = make_wave_wave(nu, 1.0, eps, 4, 0.004, 0.004)
        assert sys.gamma1 < nu / 20
        lam_slow, _ = wave_fast_eigenvalues(nu, eps, 1)
        assert np.isclose(sys.gamma1, -lam_slow.real, atol=1e-12)

    def test_too_strong_coupling_rejected(self):
        with pytest.raises(AssumptionError, match="measured fast decay"):
            make_wave_wave(2.0, 1.0, 0.02, 5, 0.5, 0.5)

    def test_noise_rejected(self):
        with pytest.raises(AssumptionError, match="sigma = 0"):
            make_wave_wave(0.2, 1.0, 0.05, 4, 0.04, 0.04, sigma=0.5)


class TestCutoff:
    def _sys(self):
        return make_parabolic_ode(4, 2, 0.12, 0.12, mu=0.3)

    def test_agrees_inside_radius(self):
        sys = self._sys()
        cut = apply_cutoff(sys.nonlin, 1.0, sys.fast, sys.slow)
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = 0.1 * rng.standard_normal(sys.state_shapes[0])
            y = 0.1 * rng.standard_normal(sys.state_shapes[1])
            assert sys.fast.norm(x) + sys.slow.norm(y) < 1.0
            assert np.array_equal(cut.f(x, y), sys.nonlin.f(x, y))
            assert np.array_equal(cut.g(x, y), sys.nonlin.g(x, y))

    def test_vanishes_outside_twice_radius(self):
        sys = self._sys()
        cut = apply_cutoff(sys.nonlin, 1.0, sys.fast, sys.slow)
        x = 3.0 * np.ones(sys.state_shapes[0])
        y = 3.0 * np.ones(sys.state_shapes[1])
        assert np.all(cut.f(x, y) == 0.0) and np.all(cut.g(x, y) == 0.0)

    def test_declared_constants(self):
        sys = self._sys()
        cut_sys = with_cutoff(sys, 1.0)
        assert cut_sys.K == 4.0 * sys.K
        assert cut_sys.nonlin.g_bound == 2.0 * sys.K
        assert cut_sys.name.endswith("_cutoff")

    def test_g_bound_holds_sampled(self):
        sys = self._sys()
        cut = apply_cutoff(sys.nonlin, 1.0, sys.fast, sys.slow)
        rng = np.random.default_rng(5)
        worst = 0.0
        for scale in (0.5, 1.0, 2.0, 5.0):
            for _ in range(50):
                x = scale * rng.standard_normal(sys.state_shapes[0])
                y = scale * rng.standard_normal(sys.state_shapes[1])
                worst = max(worst, float(sys.slow.norm(cut.g(x, y))))
        assert worst <= cut.g_bound + 1e-12

    def test_sampled_lipschitz_below_4K(self):
        sys = self._sys()
        cut = apply_cutoff(sys.nonlin, 1.0, sys.fast, sys.slow)
        est = estimate_lipschitz(cut, sys.fast, sys.slow, n_samples=200, scale=1.0, seed=2)
        assert est <= cut.K * (1.0 + 1e-9)

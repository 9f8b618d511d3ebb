"""Recursion kernels: correctness of both backends and their agreement."""

import numpy as np
import pytest

from slowfold import kernels
from slowfold.spectral import step_weights


def _setup(seed=0, nt=50, n=3, d=2, dt=0.05):
    rng = np.random.default_rng(seed)
    gen = rng.standard_normal((n, d, d))
    P, W0, W1 = step_weights(gen, dt, forcing_scale=1.3)
    Pinv = step_weights(-gen, dt)[0]
    F = rng.standard_normal((nt, n, d))
    z0 = rng.standard_normal((n, d))
    return gen, dt, P, W0, W1, Pinv, F, z0


class TestNumpyKernels:
    def test_forward_solves_ode_exactly(self):
        # piecewise-linear forcing is integrated without time-stepping error
        from scipy.integrate import solve_ivp

        gen, dt, P, W0, W1, _, F, z0 = _setup(nt=20, n=2)
        out = kernels.conv_forward_numpy(P, W0, W1, F, z0)
        times = dt * np.arange(len(F))
        for m in range(2):
            def rhs(t, z):
                j = min(int(t / dt), len(F) - 2)
                lam = (t - times[j]) / dt
                Ft = (1 - lam) * F[j, m] + lam * F[j + 1, m]
                return gen[m] @ z + 1.3 * Ft

            sol = solve_ivp(rhs, (0.0, times[-1]), z0[m], t_eval=times,
                            rtol=1e-10, atol=1e-12, max_step=dt)
            assert np.allclose(out[:, m, :], sol.y.T, atol=1e-6)

    def test_backward_inverts_forward(self):
        _, _, P, W0, W1, Pinv, F, z0 = _setup(seed=1)
        fwd = kernels.conv_forward_numpy(P, W0, W1, F, z0)
        back = kernels.conv_backward_terminal_numpy(Pinv, W0, W1, F, fwd[-1])
        assert np.allclose(back, fwd, atol=1e-9)


@pytest.mark.skipif(kernels.BACKEND != "numba", reason="numba backend not active")
class TestBackendAgreement:
    def test_forward_matches(self):
        _, _, P, W0, W1, _, F, z0 = _setup(seed=2, nt=120)
        a = kernels.conv_forward(P, W0, W1, F, z0)
        b = kernels.conv_forward_numpy(P, W0, W1, F, z0)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-13)

    def test_backward_matches(self):
        _, _, P, W0, W1, Pinv, F, z0 = _setup(seed=3, nt=120)
        a = kernels.conv_backward_terminal(Pinv, W0, W1, F, z0)
        b = kernels.conv_backward_terminal_numpy(Pinv, W0, W1, F, z0)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


class TestBackendSelection:
    def test_backend_is_declared(self):
        assert kernels.BACKEND in ("numba", "numpy")

    def test_env_forces_numpy(self):
        import subprocess
        import sys

        out = subprocess.run(
            [sys.executable, "-c", "from slowfold.kernels import BACKEND; print(BACKEND)"],
            env={"SLOWFOLD_KERNELS": "numpy", "PATH": "/usr/bin:/bin"},
            capture_output=True,
            text=True,
        )
        assert out.stdout.strip() == "numpy"

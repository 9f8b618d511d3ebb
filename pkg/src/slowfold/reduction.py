"""Forward integration of the full transformed system and of the reduced
slow equation on the manifold, plus the positive-invariance residual.

The full system in transformed coordinates reads

    X' = (1/eps) A X + (1/eps) f(X + eta(t), Y)
    Y' = B Y + g(X + eta(t), Y)

with eta the attached stationary process.  Integration is exponential
Euler with the forcing frozen at the left node, which is exact for the
linear part at any step size; the step must still resolve the forcing,
hence the dt <= eps / 10 gate.

The reduced equation replaces X by the manifold value along the moving
fiber:  Y' = B Y + g(H(theta_t omega, Y) + eta(t), Y).  Each step performs
a fresh backward solve at the shifted noise, so the stored window must
extend far enough into the past.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import WindowError
from .lp import BackwardSolver
from .models import SystemSpec
from .noise import NoisePath
from .spectral import step_weights

__all__ = [
    "Trajectory",
    "integrate_full",
    "integrate_reduced",
    "invariance_residual",
]


@dataclass(frozen=True)
class Trajectory:
    """Nodal trajectory: times (nt,), fast (nt, n1, d1), slow (nt, n2, d2)."""

    times: np.ndarray
    fast: np.ndarray
    slow: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def state_at(self, j: int):
        return self.fast[j], self.slow[j]


def _ou_window(sys: SystemSpec, path: NoisePath | None, t0: float, n_steps: int):
    n1, _ = sys.state_shapes[0]
    if path is None or sys.sigma == 0.0 or path.ou_samples is None:
        if sys.sigma != 0.0:
            raise ValueError("sigma != 0 requires a noise path with OU samples")
        return np.zeros((n_steps + 1, n1, 1))
    if path.epsilon is None or abs(path.epsilon - sys.epsilon) > 1e-12:
        raise ValueError(
            f"noise path OU scale epsilon={path.epsilon} does not match the "
            f"system epsilon={sys.epsilon}"
        )
    j0 = path.grid.index_of(t0)
    if j0 + n_steps >= path.grid.n_nodes:
        raise WindowError(
            f"stored noise window ends at {path.grid.t_plus:.6g}, need "
            f"{t0 + n_steps * path.grid.dt:.6g}"
        )
    return path.ou_samples[j0 : j0 + n_steps + 1]


def integrate_full(
    sys: SystemSpec,
    x0: np.ndarray,
    y0: np.ndarray,
    t_final: float,
    path: NoisePath | None = None,
    dt: float | None = None,
    add_stationary: bool = False,
) -> Trajectory:
    """Exponential-Euler solution of the transformed system on [0, t_final].

    The step is taken from the noise path when one is given, otherwise from
    ``dt``; either way it must satisfy dt <= eps / 10.  With
    ``add_stationary`` the returned fast component is X + eta, i.e. the
    solution of the original (untransformed) fast equation.
    """
    eps = sys.epsilon
    if path is not None:
        dt = path.grid.dt
    if dt is None:
        dt = eps / 20.0
    if dt > eps / 10.0 + 1e-12:
        raise WindowError(
            f"dt={dt:.6g} too coarse for epsilon={eps:.6g}; use dt <= {eps / 10.0:.6g}"
        )
    n = max(int(round(t_final / dt)), 1)
    ou = _ou_window(sys, path, 0.0, n)

    Pf, W0f, _ = step_weights(sys.fast.generator / eps, dt, forcing_scale=1.0 / eps)
    Ps, W0s, _ = step_weights(sys.slow.generator, dt, forcing_scale=1.0)

    (n1, d1), (n2, d2) = sys.state_shapes
    fast = np.empty((n + 1, n1, d1))
    slow = np.empty((n + 1, n2, d2))
    fast[0] = x0
    slow[0] = y0
    for j in range(n):
        F = sys.nonlin.f(fast[j] + ou[j], slow[j])
        G = sys.nonlin.g(fast[j] + ou[j], slow[j])
        fast[j + 1] = np.einsum("nij,nj->ni", Pf, fast[j]) + np.einsum(
            "nij,nj->ni", W0f, F
        )
        slow[j + 1] = np.einsum("nij,nj->ni", Ps, slow[j]) + np.einsum(
            "nij,nj->ni", W0s, G
        )
    if add_stationary:
        fast = fast + ou
    return Trajectory(times=dt * np.arange(n + 1), fast=fast, slow=slow)


def integrate_reduced(
    sys: SystemSpec,
    y0: np.ndarray,
    t_final: float,
    path: NoisePath | None = None,
    dt_slow: float | None = None,
    tol: float = 1e-8,
) -> Trajectory:
    """Reduced slow dynamics on the manifold over [0, t_final].

    At each node the manifold is evaluated at the noise shifted to that
    time (one backward fixed-point solve per node), then the slow state
    advances one exponential-Euler step.  ``dt_slow`` defaults to the noise
    step and must be an integer multiple of it.
    """
    base_dt = path.grid.dt if path is not None else sys.epsilon / 10.0
    if dt_slow is None:
        dt_slow = base_dt
    stride = round(dt_slow / base_dt)
    if stride < 1 or abs(dt_slow - stride * base_dt) > 1e-9:
        raise WindowError(
            f"dt_slow={dt_slow:.6g} must be a positive multiple of the noise "
            f"step {base_dt:.6g}"
        )
    n = max(int(round(t_final / dt_slow)), 1)
    solver = BackwardSolver(sys, mode="slow", tol=tol, path=path)
    Ps, W0s, _ = step_weights(sys.slow.generator, dt_slow, forcing_scale=1.0)

    (n1, d1), (n2, d2) = sys.state_shapes
    fast = np.empty((n + 1, n1, d1))
    slow = np.empty((n + 1, n2, d2))
    slow[0] = y0
    for j in range(n + 1):
        t_j = j * dt_slow
        if path is not None:
            solver.shift_origin(path, t_j)
        h = solver.solve(slow[j]).fast_at_zero
        fast[j] = h
        if j == n:
            break
        eta0 = solver.ou[-1]
        G = sys.nonlin.g(h + eta0, slow[j])
        slow[j + 1] = np.einsum("nij,nj->ni", Ps, slow[j]) + np.einsum(
            "nij,nj->ni", W0s, G
        )
    return Trajectory(times=dt_slow * np.arange(n + 1), fast=fast, slow=slow)


def invariance_residual(
    sys: SystemSpec,
    y0: np.ndarray,
    t_final: float,
    path: NoisePath | None = None,
    n_checks: int = 5,
    tol: float = 1e-8,
    dt: float | None = None,
) -> np.ndarray:
    """Positive-invariance residuals ||X(t) - H(theta_t omega, Y(t))||_1.

    Starts the full transformed system exactly on the manifold and measures
    the gap to the manifold along the moving fiber at n_checks interior
    times.  For an exact solution this vanishes identically.
    """
    solver = BackwardSolver(sys, mode="slow", tol=tol, path=path)
    if path is not None:
        solver.shift_origin(path, 0.0)
    x0 = solver.solve(np.asarray(y0, dtype=float)).fast_at_zero
    traj = integrate_full(sys, x0, y0, t_final, path=path, dt=dt)
    idx = np.unique(
        np.round(np.linspace(0, len(traj.times) - 1, n_checks + 1)).astype(int)[1:]
    )
    out = np.empty(len(idx))
    for i, j in enumerate(idx):
        t_j = float(traj.times[j])
        if path is not None:
            solver.shift_origin(path, t_j)
        h = solver.solve(traj.slow[j]).fast_at_zero
        out[i] = float(sys.fast.norm(traj.fast[j] - h))
    return out

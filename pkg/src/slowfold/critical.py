"""Critical-manifold limit: the rescaled manifold and its epsilon -> 0
approximation.

In the rescaled time tau = t / eps the system reads

    X' = A X + f(X + xi(theta_tau omega), Y)
    Y' = eps B Y + eps g(X + xi(theta_tau omega), Y)

with xi the unit-scale stationary process.  Freezing Y at Y_0 gives the
critical system, whose graph map is the eps -> 0 limit of the rescaled
one: for Y_0 in D(B) and bounded g the gap is O(eps).  The slow-variable
drift over the relevant window is itself O(eps), and the fast-variable
gap is controlled through the weighted envelope

    S(t, eps) = e^{mu t} (e^{-eps gamma2 t} / (gamma1 - eps gamma2) - 1 / gamma1)

whose supremum over t <= 0 is below mu / (gamma1 (mu - eps gamma2)) - 1 / gamma1,
decreasing to 0 linearly in eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lp import BackwardSolver, choose_window
from .models import SystemSpec
from .noise import NoisePath, TimeGrid, ou_stationary_path, sample_wiener_path

__all__ = [
    "solve_breve_manifold",
    "solve_critical_manifold",
    "s_envelope",
    "s_bound",
    "make_unit_noise_path",
    "EpsilonSweep",
    "epsilon_sweep",
]


def solve_breve_manifold(
    sys: SystemSpec, Y0: np.ndarray, path: NoisePath | None = None, tol: float = 1e-8
) -> np.ndarray:
    """Graph value of the rescaled manifold at Y0 (fast component at 0)."""
    return BackwardSolver(sys, mode="breve", tol=tol, path=path).solve(Y0).fast_at_zero


def solve_critical_manifold(
    sys: SystemSpec, Y0: np.ndarray, path: NoisePath | None = None, tol: float = 1e-8
) -> np.ndarray:
    """Graph value of the critical (frozen slow variable) manifold at Y0.

    Independent of eps: only A, f, the noise and Y0 enter.
    """
    return BackwardSolver(sys, mode="critical", tol=tol, path=path).solve(Y0).fast_at_zero


def s_envelope(t: np.ndarray, gamma1: float, gamma2: float, mu: float, epsilon: float):
    """S(t, eps) for t <= 0."""
    t = np.asarray(t, dtype=float)
    return np.exp(mu * t) * (
        np.exp(-epsilon * gamma2 * t) / (gamma1 - epsilon * gamma2) - 1.0 / gamma1
    )


def s_bound(gamma1: float, gamma2: float, mu: float, epsilon: float) -> tuple[float, float]:
    """(argmax, upper bound) of S(t, eps) over t <= 0.

    The supremum sits at t* = -ln[mu (gamma1 - eps gamma2) / (gamma1 (mu -
    eps gamma2))] / (eps gamma2) and is bounded by mu / (gamma1 (mu - eps
    gamma2)) - 1 / gamma1, which vanishes linearly in eps.  For gamma2 = 0
    the envelope is identically zero.
    """
    eg = epsilon * gamma2
    if not 0 <= eg < min(mu, gamma1):
        raise ValueError(f"need 0 <= eps*gamma2 < min(mu, gamma1), got {eg:.6g}")
    bound = mu / (gamma1 * (mu - eg)) - 1.0 / gamma1
    if eg == 0.0:
        return 0.0, 0.0
    t_star = -math.log(mu * (gamma1 - eg) / (gamma1 * (mu - eg))) / eg
    return t_star, bound


def make_unit_noise_path(
    sys: SystemSpec, seed: int, tol: float = 1e-8, margin: float = 0.0
) -> NoisePath | None:
    """Unit-scale stationary path covering the rescaled backward window.

    Shared by the rescaled and critical solves so both see the same xi
    (common random numbers); None for noise-free systems.
    """
    if sys.sigma == 0.0:
        return None
    T, dt = choose_window(sys, "breve", tol)
    n = int(math.ceil((T + margin) / dt)) + 2
    grid = TimeGrid(-n * dt, 0.0, dt)
    path = sample_wiener_path(grid, sys.m_noise, seed)
    return ou_stationary_path(path, sys.fast, sys.sigma, epsilon=1.0)


@dataclass(frozen=True)
class EpsilonSweep:
    """Gap ||H_rescaled(eps) - H_critical||_1 across eps and noise seeds,
    with the fitted log-log rate (expected slope ~ 1)."""

    epsilons: np.ndarray
    errors: np.ndarray  # (n_eps, n_seeds)
    slope: float
    intercept: float
    r_squared: float

    @property
    def mean_errors(self) -> np.ndarray:
        return self.errors.mean(axis=1)


def epsilon_sweep(
    make_system,
    epsilons,
    Y0: np.ndarray,
    seeds=(0,),
    tol: float = 1e-8,
) -> EpsilonSweep:
    """Measure the eps -> 0 convergence of the rescaled manifold.

    ``make_system(eps)`` must return the same model at scale eps.  Per seed
    one xi path is drawn and shared by every solve; the critical value is
    eps-independent, so it is computed once per seed.
    """
    epsilons = np.asarray(sorted(epsilons, reverse=True), dtype=float)
    Y0 = np.asarray(Y0, dtype=float)
    sys_ref = make_system(float(epsilons[-1]))
    errors = np.empty((len(epsilons), len(seeds)))
    for s, seed in enumerate(seeds):
        path = make_unit_noise_path(sys_ref, seed, tol=tol)
        h_bar = solve_critical_manifold(sys_ref, Y0, path=path, tol=tol)
        for i, eps in enumerate(epsilons):
            sys_e = make_system(float(eps))
            h_breve = solve_breve_manifold(sys_e, Y0, path=path, tol=tol)
            errors[i, s] = float(sys_e.fast.norm(h_breve - h_bar))
    x = np.log(epsilons)
    y = np.log(np.maximum(errors.mean(axis=1), 1e-300))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return EpsilonSweep(
        epsilons=epsilons,
        errors=errors,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
    )

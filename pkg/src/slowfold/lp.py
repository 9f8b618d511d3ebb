"""Backward fixed-point construction of random slow manifolds.

The manifold value H(omega, Y0) is the fast component at t = 0 of the
fixed point of an integral operator acting on trajectories over (-inf, 0]:
the fast part is a weighted convolution against the fast semigroup, the
slow part flows backward from the terminal condition Y(0) = Y0.  With the
exponential weight e^{w t} the operator contracts at rate

    kappa = K / (gamma1 - mu) + eps * K / (mu - eps * gamma2)

and Picard iteration from the zero trajectory converges geometrically.

Three operator modes share one solver:

    "slow"      original scaling; fast generator A/eps, weight mu/eps,
                driven by the stationary process of intensity sigma/sqrt(eps)
    "breve"     rescaled (tau = t/eps) system; fast generator A, slow
                generator eps*B with forcing eps*g, weight mu, driven by the
                unit-scale stationary process
    "critical"  breve system with the slow variable frozen at Y0;
                kappa reduces to K / (gamma1 - mu)

Truncation windows and steps follow explicit tail bounds: the dropped tail
of the fast convolution stays below a tenth of the solve tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoContractionError, SolverError, WindowError
from .kernels import conv_backward_terminal, conv_forward
from .models import SystemSpec, largest_admissible_epsilon
from .noise import NoisePath
from .spectral import step_weights

__all__ = [
    "contraction_factor",
    "manifold_lipschitz_bound",
    "choose_window",
    "BackwardSolver",
    "FixedPointResult",
    "evaluate_manifold",
    "manifold_graph",
    "empirical_lipschitz",
]

_MODES = ("slow", "breve", "critical")


def contraction_factor(
    K: float, gamma1: float, gamma2: float, mu: float, epsilon: float, mode: str = "slow"
) -> float:
    """Contraction factor kappa of the backward operator.

    Raises NoContractionError when kappa >= 1, naming the largest epsilon
    that would restore contraction at the same (K, gamma1, gamma2, mu).
    """
    if mode not in _MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if gamma1 - mu <= 0 or (mode != "critical" and mu - epsilon * gamma2 <= 0):
        raise NoContractionError(
            f"weight mu={mu:.6g} outside the admissible range for "
            f"gamma1={gamma1:.6g}, eps*gamma2={epsilon * gamma2:.6g}"
        )
    kappa = K / (gamma1 - mu)
    if mode != "critical":
        kappa += epsilon * K / (mu - epsilon * gamma2)
    if kappa >= 1.0:
        raise NoContractionError(
            f"kappa={kappa:.6g} >= 1 at epsilon={epsilon:.6g}; largest admissible "
            f"epsilon is {largest_admissible_epsilon(K, gamma1, gamma2, mu):.6g}"
        )
    return kappa


def manifold_lipschitz_bound(K: float, gamma1: float, mu: float, kappa: float) -> float:
    """Bound on Lip H in the slow variable: K / ((gamma1 - mu) (1 - kappa))."""
    return K / ((gamma1 - mu) * (1.0 - kappa))


def choose_window(sys: SystemSpec, mode: str, tol: float) -> tuple[float, float]:
    """Truncation horizon T and step dt for the backward solve.

    T makes the dropped fast-convolution tail (K / (gamma1 - mu)) *
    e^{-(gamma1 - mu) T / eps_eff} smaller than tol / 10; dt resolves the
    fast scale, dt = min(eps_eff / 10, T / 100).
    """
    eps_eff = sys.epsilon if mode == "slow" else 1.0
    gap = sys.gamma1 - sys.mu
    gain = max(sys.K / gap, 1.0)
    T = eps_eff * math.log(10.0 * gain / tol) / gap
    dt = min(eps_eff / 10.0, T / 100.0)
    return T, dt


@dataclass(frozen=True)
class FixedPointResult:
    """Converged backward fixed point on the nodes of [-T, 0].

    ``fast``/``slow`` have shape (nt, n_modes, d); ``slow`` is the frozen
    constant in critical mode.  ``diffs`` are the weighted Picard increments
    and ``ratios`` their successive quotients (each should stay near kappa).
    """

    times: np.ndarray
    fast: np.ndarray
    slow: np.ndarray
    weight: float
    kappa: float
    mode: str
    iterations: int
    diffs: np.ndarray
    residual: float
    converged: bool

    @property
    def ratios(self) -> np.ndarray:
        d = self.diffs
        return d[1:] / np.maximum(d[:-1], 1e-300)

    @property
    def fast_at_zero(self) -> np.ndarray:
        return self.fast[-1]

    @property
    def slow_at_zero(self) -> np.ndarray:
        return self.slow[-1]


class BackwardSolver:
    """Shared Picard solver for the three backward operator modes.

    Precomputes the exact one-step propagators and quadrature weights once,
    then iterates the operator from the zero trajectory until the weighted
    increment guarantees a fixed-point error below ``tol``.
    """

    def __init__(
        self,
        sys: SystemSpec,
        mode: str = "slow",
        tol: float = 1e-8,
        path: NoisePath | None = None,
        dt: float | None = None,
        horizon: float | None = None,
        max_iter: int = 400,
    ):
        if mode not in _MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.sys = sys
        self.mode = mode
        self.tol = float(tol)
        self.max_iter = max_iter
        self.kappa = contraction_factor(
            sys.K, sys.gamma1, sys.gamma2, sys.mu, sys.epsilon, mode
        )
        eps = sys.epsilon
        eps_eff = eps if mode == "slow" else 1.0
        self.weight = sys.mu / eps_eff

        T_req, dt_req = choose_window(sys, mode, tol)
        if horizon is not None:
            T_req = max(T_req, horizon)
        if dt is not None:
            dt_req = dt
        if path is not None:
            if path.grid.dt > dt_req * (1.0 + 1e-9):
                raise WindowError(
                    f"noise step {path.grid.dt:.6g} is too coarse; the backward "
                    f"solve needs dt <= {dt_req:.6g}"
                )
            dt_req = path.grid.dt
        n = max(int(math.ceil(T_req / dt_req - 1e-9)), 2)
        self.dt = dt_req
        self.n_steps = n
        self.times = self.dt * (np.arange(n + 1) - n)

        # OU values on the nodes; zeros when noise-free
        n1, d1 = sys.state_shapes[0]
        if path is not None and path.ou_samples is not None and sys.sigma != 0.0:
            want_eps = eps if mode == "slow" else 1.0
            if path.epsilon is None or abs(path.epsilon - want_eps) > 1e-12:
                raise ValueError(
                    f"noise path OU scale epsilon={path.epsilon} does not match "
                    f"the {mode!r} operator (expected {want_eps})"
                )
            j0 = path.grid.index_of(0.0)
            if j0 - n < 0:
                raise WindowError(
                    f"noise window starts at {path.grid.t_minus:.6g} but the "
                    f"backward solve needs {self.times[0]:.6g}"
                )
            self.ou = path.ou_samples[j0 - n : j0 + 1]
        else:
            if sys.sigma != 0.0 and path is None:
                raise ValueError("sigma != 0 requires a noise path with OU samples")
            self.ou = np.zeros((n + 1, n1, 1))

        # exact step operators: fast forward, slow backward
        fscale = 1.0 / eps_eff if mode == "slow" else 1.0
        self.Pf, self.W0f, self.W1f = step_weights(
            sys.fast.generator * fscale, self.dt, forcing_scale=fscale
        )
        if mode != "critical":
            sscale = 1.0 if mode == "slow" else eps
            gen_s = sys.slow.generator * sscale
            Ps, W0s, W1s = step_weights(gen_s, self.dt, forcing_scale=sscale)
            self.Pinv_s = step_weights(-gen_s, self.dt)[0]
            self.W0s, self.W1s = W0s, W1s

    def shift_origin(self, path: NoisePath, t0: float) -> None:
        """Re-point the solver's noise window at the path shifted by t0, so
        subsequent solves evaluate the manifold along the moving fiber.

        Cheap relabeling: the step operators are unchanged, only the OU node
        slice moves.  Requires the stored window to reach t0 - T.
        """
        if path.ou_samples is None or self.sys.sigma == 0.0:
            return
        j0 = path.grid.index_of(t0)
        if j0 - self.n_steps < 0:
            raise WindowError(
                f"noise window [{path.grid.t_minus:.6g}, {path.grid.t_plus:.6g}] "
                f"does not reach {t0:.6g} - {-self.times[0]:.6g}"
            )
        self.ou = path.ou_samples[j0 - self.n_steps : j0 + 1]

    def weighted_norm(self, fast: np.ndarray, slow: np.ndarray) -> float:
        w = np.exp(self.weight * self.times)
        vals = self.sys.fast.norm(fast) + self.sys.slow.norm(slow)
        return float(np.max(w * vals))

    def apply(self, fast: np.ndarray, slow: np.ndarray, Y0: np.ndarray):
        """One application of the backward operator to nodal trajectories."""
        x_in = fast + self.ou
        F = self.sys.nonlin.f(x_in, slow)
        new_fast = conv_forward(self.Pf, self.W0f, self.W1f, F, np.zeros_like(fast[0]))
        if self.mode == "critical":
            return new_fast, slow
        G = self.sys.nonlin.g(x_in, slow)
        new_slow = conv_backward_terminal(self.Pinv_s, self.W0s, self.W1s, G, Y0)
        return new_fast, new_slow

    def solve(self, Y0: np.ndarray) -> FixedPointResult:
        """Picard iteration from the zero trajectory."""
        Y0 = np.asarray(Y0, dtype=float)
        nt = self.n_steps + 1
        (n1, d1), (n2, d2) = self.sys.state_shapes
        fast = np.zeros((nt, n1, d1))
        if self.mode == "critical":
            slow = np.broadcast_to(Y0, (nt, n2, d2)).copy()
        else:
            slow = np.zeros((nt, n2, d2))
        # stop when the increment bounds the fixed-point error below tol
        stop = self.tol * (1.0 - self.kappa) / max(self.kappa, 1e-3)
        diffs = []
        converged = False
        for _ in range(self.max_iter):
            new_fast, new_slow = self.apply(fast, slow, Y0)
            d = self.weighted_norm(new_fast - fast, new_slow - slow)
            diffs.append(d)
            fast, slow = new_fast, new_slow
            if d <= stop:
                converged = True
                break
        if not converged:
            raise SolverError(
                f"backward fixed point not converged in {self.max_iter} iterations "
                f"(kappa={self.kappa:.4g}, last increment {diffs[-1]:.3g})"
            )
        return FixedPointResult(
            times=self.times,
            fast=fast,
            slow=slow,
            weight=self.weight,
            kappa=self.kappa,
            mode=self.mode,
            iterations=len(diffs),
            diffs=np.array(diffs),
            residual=diffs[-1],
            converged=converged,
        )


def evaluate_manifold(
    sys: SystemSpec,
    Y0: np.ndarray,
    path: NoisePath | None = None,
    mode: str = "slow",
    tol: float = 1e-8,
    add_stationary: bool = False,
    solver: BackwardSolver | None = None,
) -> np.ndarray:
    """Manifold value H(omega, Y0): fast component of the fixed point at 0.

    ``add_stationary`` adds back the stationary process value at t = 0,
    mapping the transformed graph to the original coordinates.  Passing a
    prebuilt ``solver`` reuses its precomputed step operators and noise.
    """
    if solver is None:
        solver = BackwardSolver(sys, mode=mode, tol=tol, path=path)
    res = solver.solve(Y0)
    h = res.fast_at_zero
    if add_stationary:
        h = h + solver.ou[-1]
    return h


def manifold_graph(
    sys: SystemSpec,
    Y0_list,
    path: NoisePath | None = None,
    mode: str = "slow",
    tol: float = 1e-8,
) -> np.ndarray:
    """Stack of manifold values for a family of slow states; shape
    (len(Y0_list), n1, d1).  One solver is shared across the family."""
    solver = BackwardSolver(sys, mode=mode, tol=tol, path=path)
    return np.stack([solver.solve(Y0).fast_at_zero for Y0 in Y0_list])


def empirical_lipschitz(sys: SystemSpec, Y0_list, h_values: np.ndarray) -> float:
    """All-pairs Lipschitz quotient max ||H(Y) - H(Y')||_1 / ||Y - Y'||_2."""
    best = 0.0
    m = len(Y0_list)
    for i in range(m):
        for j in range(i + 1, m):
            dy = float(sys.slow.norm(np.asarray(Y0_list[i]) - np.asarray(Y0_list[j])))
            if dy < 1e-12:
                continue
            dh = float(sys.fast.norm(h_values[i] - h_values[j]))
            best = max(best, dh / dy)
    return best

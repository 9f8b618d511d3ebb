"""Galerkin sine bases, exact per-mode propagators and norms.

All states live in truncated sine expansions on an interval [0, L] with
Dirichlet boundary conditions.  A coefficient block is an array of shape
``(n_modes, d)`` where ``d`` is 1 for scalar modes (heat-type equations)
and 2 for position/velocity pairs (wave-type equations written as first
order systems).  Leading batch axes are allowed everywhere.

The linear parts are diagonal in mode space, so semigroups and groups are
applied through exact per-mode exponentials: a scalar decay factor for
diagonal parts, a closed-form 2x2 matrix exponential for block parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

__all__ = [
    "ModeBasis",
    "FastLinearPart",
    "SlowLinearPart",
    "StateVector",
    "NonlinearityPair",
    "apply_fast_semigroup",
    "apply_slow_group",
    "eval_nonlinearity",
    "expm2x2",
    "step_weights",
]


@dataclass(frozen=True)
class ModeBasis:
    """Dirichlet sine basis on [0, L].

    Basis functions are orthonormal in L^2:  phi_k(s) = sqrt(2/L) sin(k pi s / L),
    k = 1..n_modes.  Collocation uses the 2*n_modes+1 point grid on which the
    discrete sine transform is exactly orthogonal, so a forward/inverse round
    trip reproduces coefficients to machine precision.
    """

    n_modes: int
    domain_length: float = math.pi

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")
        if self.domain_length <= 0:
            raise ValueError("domain_length must be positive")

    @property
    def n_grid(self) -> int:
        return 2 * self.n_modes + 1

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """k pi / L for k = 1..n_modes."""
        k = np.arange(1, self.n_modes + 1, dtype=float)
        return k * math.pi / self.domain_length

    @cached_property
    def laplacian_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of -Laplacian on the modes: (k pi / L)^2."""
        return self.wavenumbers**2

    @cached_property
    def grid(self) -> np.ndarray:
        j = np.arange(1, self.n_grid + 1, dtype=float)
        return j * self.domain_length / (self.n_grid + 1)

    @cached_property
    def _synthesis(self) -> np.ndarray:
        # (n_grid, n_modes), S[j, k] = phi_k(grid_j)
        k = np.arange(1, self.n_modes + 1, dtype=float)
        return math.sqrt(2.0 / self.domain_length) * np.sin(
            np.outer(self.grid, k * math.pi / self.domain_length)
        )

    def to_grid(self, coeffs: np.ndarray) -> np.ndarray:
        """Evaluate a coefficient block on the collocation grid.

        ``coeffs`` has shape (..., n_modes); returns (..., n_grid).
        """
        return coeffs @ self._synthesis.T

    def to_coeffs(self, values: np.ndarray) -> np.ndarray:
        """Project grid values back onto the modes (exact inverse of to_grid)."""
        w = self.domain_length / (self.n_grid + 1)
        return w * (values @ self._synthesis)


def expm2x2(blocks: np.ndarray) -> np.ndarray:
    """Closed-form matrix exponential of an array of 2x2 blocks.

    Uses the trace/deviator split: for M = s*I + N with N traceless,
    exp(M) = e^s (cosh(q) I + sinh(q)/q N) where q^2 = -det(N), with the
    trigonometric branch for q^2 < 0 and a series near q^2 = 0.
    """
    blocks = np.asarray(blocks, dtype=float)
    s = 0.5 * (blocks[..., 0, 0] + blocks[..., 1, 1])
    eye = np.eye(2)
    dev = blocks - s[..., None, None] * eye
    q2 = dev[..., 0, 0] ** 2 + dev[..., 0, 1] * dev[..., 1, 0]

    small = np.abs(q2) < 1e-12
    # hyperbolic branch
    qp = np.sqrt(np.where(q2 > 0, q2, 1.0))
    ch = np.cosh(qp)
    sh = np.sinh(qp) / qp
    # trigonometric branch
    qm = np.sqrt(np.where(q2 < 0, -q2, 1.0))
    cs = np.cos(qm)
    sn = np.sin(qm) / qm
    # series branch, |q2| tiny
    c0 = 1.0 + q2 / 2.0 + q2**2 / 24.0
    s0 = 1.0 + q2 / 6.0 + q2**2 / 120.0

    c = np.where(small, c0, np.where(q2 > 0, ch, cs))
    m = np.where(small, s0, np.where(q2 > 0, sh, sn))
    out = c[..., None, None] * eye + m[..., None, None] * dev
    return np.exp(s)[..., None, None] * out


def _block_norm(weights: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Weighted l2 norm sqrt(sum w * c^2) over the last two axes."""
    c = np.asarray(coeffs, dtype=float)
    return np.sqrt(np.sum(weights * c * c, axis=(-2, -1)))


@dataclass(frozen=True)
class FastLinearPart:
    """Linear operator of the fast equation, diagonal in mode space.

    Either ``rates`` is set (scalar modes, generator -diag(rates)) or
    ``blocks`` is set (per-mode 2x2 generator blocks, e.g. damped wave
    operators).  ``gamma1`` is the decay rate used in all contraction
    estimates; for block parts it is the measured minimal spectral decay.
    ``norm_weights`` defines the per-mode quadratic form of the H1-norm.
    """

    gamma1: float
    rates: np.ndarray | None = None
    blocks: np.ndarray | None = None
    norm_weights: np.ndarray | None = None

    def __post_init__(self):
        if (self.rates is None) == (self.blocks is None):
            raise ValueError("exactly one of rates/blocks must be given")
        if self.gamma1 <= 0:
            raise ValueError(f"gamma1 must be positive, got {self.gamma1}")
        if self.rates is not None and np.any(np.asarray(self.rates) < self.gamma1 - 1e-12):
            raise ValueError("every scalar mode rate must be >= gamma1")
        if self.norm_weights is None:
            object.__setattr__(self, "norm_weights", np.ones((self.n_modes, self.block_dim)))

    @property
    def kind(self) -> str:
        return "diagonal" if self.rates is not None else "blocks"

    @property
    def n_modes(self) -> int:
        return len(self.rates) if self.rates is not None else len(self.blocks)

    @property
    def block_dim(self) -> int:
        return 1 if self.rates is not None else 2

    @cached_property
    def generator(self) -> np.ndarray:
        """Generator as (n_modes, d, d) blocks (unscaled, i.e. A not A/eps)."""
        if self.rates is not None:
            return -np.asarray(self.rates, dtype=float)[:, None, None]
        return np.asarray(self.blocks, dtype=float)

    def propagator(self, t: float, epsilon: float = 1.0) -> np.ndarray:
        """Exact per-mode blocks of exp(A t / eps), shape (n_modes, d, d)."""
        if self.rates is not None:
            return np.exp(-np.asarray(self.rates) * t / epsilon)[:, None, None]
        return expm2x2(self.generator * (t / epsilon))

    def spectral_decay_rates(self) -> np.ndarray:
        """Per-mode decay rate: -max Re(lambda) of the generator block."""
        if self.rates is not None:
            return np.asarray(self.rates, dtype=float)
        out = np.empty(self.n_modes)
        for i, b in enumerate(self.generator):
            out[i] = -np.max(np.linalg.eigvals(b).real)
        return out

    def norm(self, coeffs: np.ndarray) -> np.ndarray:
        return _block_norm(self.norm_weights, coeffs)


@dataclass(frozen=True)
class SlowLinearPart:
    """Linear operator of the slow equation: zero (identity group) or an
    array of wave frequencies (rotation group per mode).

    Wave blocks act on (position, velocity) pairs; the rotation at
    frequency w is [[cos wt, sin wt / w], [-w sin wt, cos wt]], which is an
    isometry of the w-weighted energy norm, so gamma2 = 0 exactly.
    """

    gamma2: float
    n_modes: int
    omegas: np.ndarray | None = None
    norm_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.gamma2 < 0:
            raise ValueError("gamma2 must be >= 0")
        if self.omegas is not None and len(self.omegas) != self.n_modes:
            raise ValueError("omegas length must equal n_modes")
        if self.norm_weights is None:
            if self.omegas is None:
                w = np.ones((self.n_modes, 1))
            else:
                w = np.stack(
                    [np.asarray(self.omegas, dtype=float) ** 2, np.ones(self.n_modes)], axis=1
                )
            object.__setattr__(self, "norm_weights", w)

    @property
    def kind(self) -> str:
        return "zero" if self.omegas is None else "wave"

    @property
    def block_dim(self) -> int:
        return 1 if self.omegas is None else 2

    @cached_property
    def generator(self) -> np.ndarray:
        if self.omegas is None:
            return np.zeros((self.n_modes, 1, 1))
        w2 = np.asarray(self.omegas, dtype=float) ** 2
        gen = np.zeros((self.n_modes, 2, 2))
        gen[:, 0, 1] = 1.0
        gen[:, 1, 0] = -w2
        return gen

    def propagator(self, t: float) -> np.ndarray:
        """Exact per-mode blocks of exp(B t), any sign of t."""
        if self.omegas is None:
            return np.ones((self.n_modes, 1, 1))
        w = np.asarray(self.omegas, dtype=float)
        c, s = np.cos(w * t), np.sin(w * t)
        out = np.empty((self.n_modes, 2, 2))
        out[:, 0, 0] = c
        out[:, 0, 1] = s / w
        out[:, 1, 0] = -w * s
        out[:, 1, 1] = c
        return out

    def norm(self, coeffs: np.ndarray) -> np.ndarray:
        return _block_norm(self.norm_weights, coeffs)


def apply_blocks(blocks: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Apply per-mode (n, d, d) blocks to (..., n, d) coefficients."""
    return np.einsum("nij,...nj->...ni", blocks, coeffs)


def apply_fast_semigroup(
    part: FastLinearPart, coeffs: np.ndarray, t: float, epsilon: float = 1.0
) -> np.ndarray:
    """Apply exp(A t / eps) to a fast coefficient block.  Requires t >= 0."""
    if t < 0:
        raise ValueError(f"fast semigroup is one-sided, got t = {t}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return apply_blocks(part.propagator(t, epsilon), coeffs)


def apply_slow_group(part: SlowLinearPart, coeffs: np.ndarray, t: float) -> np.ndarray:
    """Apply exp(B t) to a slow coefficient block; t may have any sign."""
    return apply_blocks(part.propagator(t), coeffs)


@dataclass(frozen=True)
class StateVector:
    """Fast + slow coefficient blocks; product norm ||z|| = ||x||_1 + ||y||_2."""

    fast: np.ndarray
    slow: np.ndarray

    def norm(self, fast_part: FastLinearPart, slow_part: SlowLinearPart) -> float:
        return float(fast_part.norm(self.fast) + slow_part.norm(self.slow))

    def __add__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.fast + other.fast, self.slow + other.slow)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.fast - other.fast, self.slow - other.slow)


@dataclass(frozen=True)
class NonlinearityPair:
    """Coupling nonlinearities f: H1 x H2 -> H1 and g: H1 x H2 -> H2 in
    coefficient space, with joint Lipschitz constant K w.r.t. the sum norm
    ||dx||_1 + ||dy||_2.  Callables accept leading batch axes.
    """

    f: callable
    g: callable
    K: float
    g_bound: float | None = None


def eval_nonlinearity(
    pair: NonlinearityPair,
    x: np.ndarray,
    y: np.ndarray,
    expect_shapes: tuple | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (f(x, y), g(x, y)) on coefficient blocks.

    ``expect_shapes`` = ((n1, d1), (n2, d2)) enables a trailing-shape check;
    mismatched blocks are rejected.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if expect_shapes is not None:
        (n1, d1), (n2, d2) = expect_shapes
        if x.shape[-2:] != (n1, d1) or y.shape[-2:] != (n2, d2):
            raise ValueError(
                f"coefficient blocks {x.shape[-2:]}, {y.shape[-2:]} do not match "
                f"the basis layout {(n1, d1)}, {(n2, d2)}"
            )
    return pair.f(x, y), pair.g(x, y)


def step_weights(
    generator: np.ndarray, dt: float, forcing_scale: float = 1.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact one-step propagator and ETD quadrature weights per mode.

    For each d x d generator block M returns

        P  = exp(M dt)
        W0 = c * int_0^dt exp(M (dt - s)) ds
        W1 = c * int_0^dt exp(M (dt - s)) (s / dt) ds,     c = forcing_scale

    so that a step of  z' = M z + c * F(t)  with F piecewise linear on the
    step is advanced exactly by  z1 = P z0 + W0 F0 + W1 (F1 - F0).

    The integrals are evaluated with the Van Loan augmented-matrix trick,
    which is exact up to the accuracy of scipy's expm on a (3d x 3d) block.
    """
    gen = np.asarray(generator, dtype=float)
    n, d, _ = gen.shape
    P = np.empty((n, d, d))
    W0 = np.empty((n, d, d))
    W1 = np.empty((n, d, d))
    eye = np.eye(d)
    zero = np.zeros((d, d))
    for m in range(n):
        aug = np.block(
            [
                [gen[m], eye, zero],
                [zero, zero, eye],
                [zero, zero, zero],
            ]
        )
        E = scipy.linalg.expm(aug * dt)
        P[m] = E[:d, :d]
        W0[m] = forcing_scale * E[:d, d : 2 * d]
        W1[m] = forcing_scale * E[:d, 2 * d : 3 * d] / dt
    return P, W0, W1

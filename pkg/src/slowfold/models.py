"""Concrete fast-slow systems: the PDE example models, the scalar linear
benchmark, and the cutoff machinery for locally Lipschitz nonlinearities.

Every constructor returns a :class:`SystemSpec` that has already passed the
structural gates: positive decay rates, Lipschitz constant K below the fast
decay rate gamma1 (the spectral-gap assumption), and a valid weight
exponent mu.  Nonlinearities are built from pointwise Lipschitz functions
(sin/tanh flavored) applied by collocation, with coupling constants scaled
so the declared K is an honest bound in the energy norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import AssumptionError
from .spectral import (
    FastLinearPart,
    ModeBasis,
    NonlinearityPair,
    SlowLinearPart,
    StateVector,
)

__all__ = [
    "SystemSpec",
    "validate_system",
    "make_scalar_linear",
    "make_parabolic_hyperbolic",
    "make_parabolic_ode",
    "make_wave_wave",
    "apply_cutoff",
    "with_cutoff",
    "estimate_lipschitz",
    "scalar_linear_slope",
    "largest_admissible_epsilon",
]


@dataclass(frozen=True)
class SystemSpec:
    """Full description of a fast-slow system instance.

    Immutable; operations elsewhere treat specs as read-only shared data.
    """

    name: str
    basis: ModeBasis
    fast: FastLinearPart
    slow: SlowLinearPart
    nonlin: NonlinearityPair
    epsilon: float
    mu: float
    sigma: float = 0.0
    m_noise: int = 0
    params: dict = field(default_factory=dict)

    @property
    def gamma1(self) -> float:
        return self.fast.gamma1

    @property
    def gamma2(self) -> float:
        return self.slow.gamma2

    @property
    def K(self) -> float:
        return self.nonlin.K

    @property
    def state_shapes(self):
        return (
            (self.fast.n_modes, self.fast.block_dim),
            (self.slow.n_modes, self.slow.block_dim),
        )

    def zero_fast(self) -> np.ndarray:
        return np.zeros(self.state_shapes[0])

    def zero_slow(self) -> np.ndarray:
        return np.zeros(self.state_shapes[1])

    def fast_norm(self, x: np.ndarray) -> np.ndarray:
        return self.fast.norm(x)

    def slow_norm(self, y: np.ndarray) -> np.ndarray:
        return self.slow.norm(y)

    def state_norm(self, z: StateVector) -> float:
        return z.norm(self.fast, self.slow)


def largest_admissible_epsilon(K: float, gamma1: float, gamma2: float, mu: float) -> float:
    """Largest epsilon with kappa(K, gamma1, gamma2, mu, eps) < 1."""
    q = K / (gamma1 - mu)
    if q >= 1.0:
        return 0.0
    return (1.0 - q) * mu / (K + (1.0 - q) * gamma2)


def validate_system(sys: SystemSpec) -> list[str]:
    """Check the structural assumptions; returns human-readable violations.

    Gates: fast decay (per-mode rate >= gamma1), Lipschitz gap K < gamma1,
    weight condition gamma1 - mu > K, positivity of mu - eps*gamma2, and
    contraction kappa < 1 at the configured epsilon.
    """
    v = []
    g1, g2, K, mu, eps = sys.gamma1, sys.gamma2, sys.K, sys.mu, sys.epsilon
    rates = sys.fast.spectral_decay_rates()
    if np.any(rates < g1 - 1e-9):
        k = int(np.argmin(rates))
        v.append(
            f"fast decay below gamma1: mode {k + 1} decays at {rates[k]:.6g} < {g1:.6g}"
        )
    if not K < g1:
        v.append(f"K < gamma1 violated (A3): {K:.6g} >= {g1:.6g}")
    if not g1 - mu > K:
        v.append(f"gamma1 - mu > K violated: {g1 - mu:.6g} <= {K:.6g}")
    if not mu - eps * g2 > 0:
        v.append(f"mu - eps*gamma2 <= 0: {mu:.6g} - {eps:.6g}*{g2:.6g}")
    elif g1 - mu > K:
        kappa = K / (g1 - mu) + eps * K / (mu - eps * g2)
        if kappa >= 1.0:
            v.append(
                f"kappa >= 1 at epsilon={eps:.6g} (kappa={kappa:.6g}); largest "
                f"admissible epsilon is {largest_admissible_epsilon(K, g1, g2, mu):.6g}"
            )
    if sys.sigma != 0.0 and sys.fast.kind != "diagonal":
        v.append("additive noise requires a diagonal fast part (set sigma = 0)")
    if sys.m_noise > sys.fast.n_modes:
        v.append(f"m_noise={sys.m_noise} exceeds n_modes={sys.fast.n_modes}")
    return v


def _checked(sys: SystemSpec) -> SystemSpec:
    violations = validate_system(sys)
    if violations:
        raise AssumptionError("; ".join(violations))
    return sys


# ---------------------------------------------------------------------------
# scalar linear benchmark


def scalar_linear_slope(a: float, k: float, c: float, epsilon: float) -> float:
    """Manifold slope of the scalar linear benchmark: lambda_s / c, where
    lambda_s is the slow eigenvalue of [[-a/eps, k/eps], [c, 0]].

    For c = 0 the convolution closes in one step and the slope is k / a.
    """
    # rationalized form of (-a + sqrt(a^2 + 4 eps k c)) / (2 eps c):
    # stable as eps -> 0 and covers c = 0 (slope k / a)
    return 2.0 * k / (a + math.sqrt(a * a + 4.0 * epsilon * k * c))


def make_scalar_linear(
    a: float,
    k: float,
    c: float,
    sigma: float,
    epsilon: float = 0.01,
    mu: float = 0.5,
) -> SystemSpec:
    """H1 = H2 = R benchmark: fast rate a, slow B = 0, f = k*y, g = c*x.

    The manifold is the exact line x = slope * y with slope lambda_s / c
    from the 2x2 eigenvalue problem, which makes this the main oracle model.
    """
    if a <= 0:
        raise AssumptionError(f"fast rate a must be positive, got {a}")
    K = max(abs(k), abs(c))
    basis = ModeBasis(n_modes=1)
    fast = FastLinearPart(gamma1=a, rates=np.array([a]))
    slow = SlowLinearPart(gamma2=0.0, n_modes=1)
    nonlin = NonlinearityPair(
        f=lambda x, y: k * y,
        g=lambda x, y: c * x,
        K=K,
    )
    return _checked(
        SystemSpec(
            name="scalar_linear",
            basis=basis,
            fast=fast,
            slow=slow,
            nonlin=nonlin,
            epsilon=epsilon,
            mu=mu,
            sigma=sigma,
            m_noise=1 if sigma != 0.0 else 0,
            params={"a": a, "k": k, "c": c},
        )
    )


# ---------------------------------------------------------------------------
# PDE examples on [0, pi]


def make_parabolic_hyperbolic(
    alpha: float,
    beta: float,
    n_modes: int,
    cf: float,
    cg: float,
    sigma: float = 0.0,
    epsilon: float = 0.1,
    mu: float | None = None,
    m_noise: int = 1,
) -> SystemSpec:
    """Stochastic heat equation (fast) coupled to a damped-free wave
    equation (slow) on [0, pi].

    Fast part A = Laplacian - alpha with per-mode rates k^2 + alpha; the
    conservative decay rate gamma1 = alpha is used in all constants.  The
    slow wave block is measured in the beta-weighted energy norm, under
    which the group is an exact isometry (gamma2 = 0).  Nonlinearities are
    f = cf sin(u + v), g = cg sin(u + v) applied by collocation, giving
    K = max(cf, cg).
    """
    if alpha <= 0 or beta <= 0:
        raise AssumptionError("alpha and beta must be positive")
    basis = ModeBasis(n_modes=n_modes)
    lam = basis.laplacian_eigenvalues
    fast = FastLinearPart(gamma1=alpha, rates=lam + alpha)
    omegas = np.sqrt(lam + beta)
    slow = SlowLinearPart(gamma2=0.0, n_modes=n_modes, omegas=omegas)
    K = max(abs(cf), abs(cg))

    def f(x, y):
        u = basis.to_grid(x[..., 0])
        v = basis.to_grid(y[..., 0])
        return basis.to_coeffs(cf * np.sin(u + v))[..., None]

    def g(x, y):
        u = basis.to_grid(x[..., 0])
        v = basis.to_grid(y[..., 0])
        gv = basis.to_coeffs(cg * np.sin(u + v))
        out = np.zeros(np.broadcast_shapes(x.shape[:-2], y.shape[:-2]) + y.shape[-2:])
        out[..., 1] = gv
        return out

    nonlin = NonlinearityPair(f=f, g=g, K=K)
    mu = mu if mu is not None else (alpha - K) / 2
    return _checked(
        SystemSpec(
            name="parabolic_hyperbolic",
            basis=basis,
            fast=fast,
            slow=slow,
            nonlin=nonlin,
            epsilon=epsilon,
            mu=mu,
            sigma=sigma,
            m_noise=m_noise if sigma != 0.0 else 0,
            params={"alpha": alpha, "beta": beta, "cf": cf, "cg": cg},
        )
    )


def make_parabolic_ode(
    n_modes: int,
    m_slow: int,
    cf: float,
    cg: float,
    sigma: float = 0.0,
    epsilon: float = 0.1,
    mu: float = 0.5,
    m_noise: int = 1,
) -> SystemSpec:
    """Heat equation (fast, A = Laplacian on [0, pi], gamma1 = 1) coupled to
    an m-dimensional slow ODE block with B = 0 (FitzHugh-Nagumo shape).

    Coupling: f = cf sin(u + mean-field of v) pointwise, g_i = (cg/sqrt(m))
    sin(<u, e1> + v_i).  Constants are scaled so K = max(cf, cg) bounds both
    maps in the product norm.
    """
    basis = ModeBasis(n_modes=n_modes)
    fast = FastLinearPart(gamma1=float(basis.laplacian_eigenvalues[0]), rates=basis.laplacian_eigenvalues)
    slow = SlowLinearPart(gamma2=0.0, n_modes=m_slow)
    K = max(abs(cf), abs(cg))
    c0 = 1.0 / math.sqrt(basis.domain_length)
    rm = 1.0 / math.sqrt(m_slow)

    def f(x, y):
        u = basis.to_grid(x[..., 0])
        vbar = rm * np.sum(y[..., 0], axis=-1, keepdims=True)
        return basis.to_coeffs(cf * np.sin(u + c0 * vbar))[..., None]

    def g(x, y):
        u1 = x[..., 0:1, 0]
        return (cg * rm) * np.sin(u1 + y[..., 0])[..., None]

    nonlin = NonlinearityPair(f=f, g=g, K=K)
    return _checked(
        SystemSpec(
            name="parabolic_ode",
            basis=basis,
            fast=fast,
            slow=slow,
            nonlin=nonlin,
            epsilon=epsilon,
            mu=mu,
            sigma=sigma,
            m_noise=m_noise if sigma != 0.0 else 0,
            params={"m_slow": m_slow, "cf": cf, "cg": cg},
        )
    )


def wave_fast_blocks(nu: float, epsilon: float, n_modes: int) -> np.ndarray:
    """Per-mode generator blocks [[0, eps], [-k^2, -nu]] of the damped wave
    operator in first-order (position, velocity) form."""
    lam = ModeBasis(n_modes=n_modes).laplacian_eigenvalues
    blocks = np.zeros((n_modes, 2, 2))
    blocks[:, 0, 1] = epsilon
    blocks[:, 1, 0] = -lam
    blocks[:, 1, 1] = -nu
    return blocks


def wave_fast_eigenvalues(nu: float, epsilon: float, k: int) -> tuple[complex, complex]:
    """Eigenvalues of the mode-k damped wave block: roots of
    lambda^2 + nu lambda + eps k^2 = 0, i.e. (-nu +- sqrt(nu^2 - 4 k^2 eps))/2.

    Both have negative real part; overdamped modes split into a fast root
    near -nu and a slow root near -eps k^2 / nu, so the true uniform decay
    rate can be far below nu.
    """
    disc = nu * nu - 4.0 * k * k * epsilon
    s = np.sqrt(complex(disc))
    return ((-nu + s) / 2.0, (-nu - s) / 2.0)


def make_wave_wave(
    nu: float,
    beta: float,
    epsilon: float,
    n_modes: int,
    cf: float,
    cg: float,
    mu: float | None = None,
    sigma: float = 0.0,
) -> SystemSpec:
    """Two coupled wave equations on [0, pi]: damped fast wave block and a
    free slow wave block, both in first-order form with energy norms.

    The fast propagator is the exact 2x2 block exponential.  The effective
    gamma1 is the measured minimal spectral decay rate of the blocks, which
    for overdamped modes is much smaller than the nominal damping nu; the
    nominal value is kept in ``params`` for reference.  Additive noise is
    not supported for block fast parts, so sigma must be 0.
    """
    if nu <= 0 or beta <= 0:
        raise AssumptionError("nu and beta must be positive")
    if sigma != 0.0:
        raise AssumptionError("wave-wave fast part supports sigma = 0 only")
    basis = ModeBasis(n_modes=n_modes)
    blocks = wave_fast_blocks(nu, epsilon, n_modes)
    lam = basis.laplacian_eigenvalues
    weights_fast = np.stack([lam, np.ones(n_modes)], axis=1)
    decay = np.array(
        [-max(np.linalg.eigvals(b).real) for b in blocks]
    )
    gamma1_eff = float(decay.min())
    K = max(abs(cf), abs(cg))
    if gamma1_eff <= K:
        k_lim = int(np.argmin(decay)) + 1
        raise AssumptionError(
            f"measured fast decay {gamma1_eff:.6g} (limited by mode {k_lim}) "
            f"does not exceed K={K:.6g}"
        )
    fast = FastLinearPart(gamma1=gamma1_eff, blocks=blocks, norm_weights=weights_fast)
    slow = SlowLinearPart(gamma2=0.0, n_modes=n_modes, omegas=np.sqrt(lam + beta))

    def f(x, y):
        u = basis.to_grid(x[..., 0])
        v = basis.to_grid(y[..., 0])
        fv = basis.to_coeffs(cf * np.sin(u + v))
        out = np.zeros(np.broadcast_shapes(x.shape[:-2], y.shape[:-2]) + x.shape[-2:])
        out[..., 1] = fv
        return out

    def g(x, y):
        u = basis.to_grid(x[..., 0])
        v = basis.to_grid(y[..., 0])
        gv = basis.to_coeffs(cg * np.sin(u + v))
        out = np.zeros(np.broadcast_shapes(x.shape[:-2], y.shape[:-2]) + y.shape[-2:])
        out[..., 1] = gv
        return out

    nonlin = NonlinearityPair(f=f, g=g, K=K)
    mu = mu if mu is not None else (gamma1_eff - K) / 2
    return _checked(
        SystemSpec(
            name="wave_wave",
            basis=basis,
            fast=fast,
            slow=slow,
            nonlin=nonlin,
            epsilon=epsilon,
            mu=mu,
            sigma=0.0,
            m_noise=0,
            params={
                "nu": nu,
                "beta": beta,
                "cf": cf,
                "cg": cg,
                "nominal_gamma1": nu,
                "effective_gamma1": gamma1_eff,
            },
        )
    )


# ---------------------------------------------------------------------------
# cutoff


def _smoothstep_outer(rho: np.ndarray, radius: float) -> np.ndarray:
    """C^1 cutoff profile: 1 for rho <= R, 0 for rho >= 2R, cubic smoothstep
    (descending) in between."""
    t = np.clip((rho - radius) / radius, 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


def apply_cutoff(
    pair: NonlinearityPair,
    radius: float,
    fast_part: FastLinearPart,
    slow_part: SlowLinearPart,
) -> NonlinearityPair:
    """Truncate a nonlinearity pair outside the ball of radius 2R:
    f_R = chi_R * f, g_R = chi_R * g with chi_R a C^1 smoothstep of
    rho = ||x||_1 + ||y||_2.

    Inside B_R the cut and uncut pairs agree exactly; beyond 2R both vanish,
    so g_R is uniformly bounded by 2*R*K.  The declared Lipschitz constant
    is the product-rule bound 4K (sampling gives much tighter estimates).
    """
    if radius <= 0:
        raise ValueError("cutoff radius must be positive")

    def factor(x, y):
        rho = fast_part.norm(x) + slow_part.norm(y)
        return _smoothstep_outer(rho, radius)

    def f_cut(x, y):
        return factor(x, y)[..., None, None] * pair.f(x, y)

    def g_cut(x, y):
        return factor(x, y)[..., None, None] * pair.g(x, y)

    return NonlinearityPair(
        f=f_cut,
        g=g_cut,
        K=4.0 * pair.K,
        g_bound=2.0 * radius * pair.K,
    )


def with_cutoff(sys: SystemSpec, radius: float) -> SystemSpec:
    """System with the cutoff nonlinearity; re-runs the structural gates
    against the cutoff constant K_R = 4K."""
    pair = apply_cutoff(sys.nonlin, radius, sys.fast, sys.slow)
    out = replace(
        sys,
        nonlin=pair,
        name=sys.name + "_cutoff",
        params={**sys.params, "cutoff_radius": radius},
    )
    return _checked(out)


def estimate_lipschitz(
    pair: NonlinearityPair,
    fast_part: FastLinearPart,
    slow_part: SlowLinearPart,
    n_samples: int = 200,
    scale: float = 1.0,
    seed: int = 0,
) -> float:
    """Sampled Lipschitz quotient max ||dF|| / (||dx||_1 + ||dy||_2) over
    random pairs of bounded inputs, where ||dF|| = ||df||_1 + ||dg||_2."""
    rng = np.random.default_rng(seed)
    s1 = (fast_part.n_modes, fast_part.block_dim)
    s2 = (slow_part.n_modes, slow_part.block_dim)
    best = 0.0
    for _ in range(n_samples):
        x1, x2 = scale * rng.standard_normal((2,) + s1)
        y1, y2 = scale * rng.standard_normal((2,) + s2)
        dz = fast_part.norm(x1 - x2) + slow_part.norm(y1 - y2)
        if dz < 1e-12:
            continue
        df = fast_part.norm(pair.f(x1, y1) - pair.f(x2, y2))
        dg = slow_part.norm(pair.g(x1, y1) - pair.g(x2, y2))
        best = max(best, float((df + dg) / dz))
    return best

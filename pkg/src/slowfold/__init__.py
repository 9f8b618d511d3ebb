"""Random slow manifolds for fast-slow stochastic evolutionary systems.

Numerical construction of random invariant manifolds by backward
fixed-point iteration, exponential tracking of arbitrary orbits, critical
(epsilon -> 0) manifold limits, and slow-dynamics reduction, together with
verification of the quantitative contraction, Lipschitz, and convergence
bounds the construction rests on.
"""

from .critical import (
    EpsilonSweep,
    epsilon_sweep,
    s_bound,
    s_envelope,
    solve_breve_manifold,
    solve_critical_manifold,
)
from .errors import (
    AssumptionError,
    ConfigError,
    NoContractionError,
    SlowfoldError,
    SolverError,
    WindowError,
)
from .kernels import BACKEND
from .lp import (
    BackwardSolver,
    FixedPointResult,
    contraction_factor,
    empirical_lipschitz,
    evaluate_manifold,
    manifold_graph,
    manifold_lipschitz_bound,
)
from .models import (
    SystemSpec,
    apply_cutoff,
    estimate_lipschitz,
    make_parabolic_hyperbolic,
    make_parabolic_ode,
    make_scalar_linear,
    make_wave_wave,
    scalar_linear_slope,
    validate_system,
    with_cutoff,
)
from .noise import (
    NoisePath,
    TimeGrid,
    load_noise_path,
    ou_stationary_path,
    sample_wiener_path,
    save_noise_path,
    wiener_shift,
)
from .reduction import Trajectory, integrate_full, integrate_reduced, invariance_residual
from .spectral import (
    FastLinearPart,
    ModeBasis,
    NonlinearityPair,
    SlowLinearPart,
    StateVector,
)
from .tracking import (
    TrackingPair,
    rho_factor,
    solve_tracking_point,
    verify_tracking,
)

__version__ = "0.1.0"

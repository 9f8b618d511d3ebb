"""Experiment drivers shared by the command line tool and the test suite.

Each driver is a pure function from explicit parameters to (rows, summary):
``rows`` is a list of CSV records in the fixed column order of the
corresponding output file, ``summary`` a plain dict destined for the JSON
run summary.  Randomness is derived only from the seeds passed in, so a
repeated run is byte-identical.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.stats

from .critical import epsilon_sweep, make_unit_noise_path
from .lp import (
    BackwardSolver,
    choose_window,
    contraction_factor,
    empirical_lipschitz,
    manifold_lipschitz_bound,
)
from .models import SystemSpec, scalar_linear_slope
from .noise import NoisePath, TimeGrid, ou_stationary_path, sample_wiener_path
from .reduction import integrate_full, integrate_reduced, invariance_residual
from .tracking import forward_horizon, rho_factor, solve_tracking_point, verify_tracking

__all__ = [
    "random_slow_states",
    "make_system_noise_path",
    "valid_picard_ratios",
    "manifold_experiment",
    "tracking_experiment",
    "critical_experiment",
    "reduction_experiment",
    "scaling_experiment",
    "fit_decay_exponent",
]

MANIFOLD_COLUMNS = (
    "seed",
    "epsilon",
    "sample_id",
    "block",
    "mode_index",
    "y0_value",
    "h_value",
    "iterations",
    "residual",
    "measured_ratio",
    "slope",
)
TRACKING_COLUMNS = ("seed", "epsilon", "t", "distance", "weighted_ratio", "fitted_exponent")
CRITICAL_COLUMNS = ("epsilon", "seed", "y0_id", "error_h1")
TRAJECTORY_COLUMNS = ("t", "block", "mode_index", "value")
SCALING_COLUMNS = ("epsilon", "seed", "eta_value", "xi_value")


def random_slow_states(sys: SystemSpec, n: int, seed: int, amplitude: float = 1.0):
    """Random slow states with mode-k components damped by 1/k^2, so wave
    states carry finite energy norm and ODE states stay O(amplitude)."""
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x5901)))
    n2, d2 = sys.state_shapes[1]
    decay = 1.0 / (1.0 + np.arange(n2, dtype=float)) ** 2
    return [amplitude * decay[:, None] * rng.standard_normal((n2, d2)) for _ in range(n)]


def make_system_noise_path(
    sys: SystemSpec,
    seed: int,
    tol: float = 1e-8,
    t_plus: float = 0.0,
    dt: float | None = None,
    margin: float = 0.1,
) -> NoisePath | None:
    """Noise path at the system's own scale, covering the backward window
    of the manifold solver plus [0, t_plus]; None for noise-free systems."""
    if sys.sigma == 0.0:
        return None
    # size for tol/100 so nested solves at tighter tolerance still fit
    T, dt_req = choose_window(sys, "slow", tol / 100.0)
    if dt is None:
        dt = dt_req
    n_back = int(math.ceil(T * (1.0 + margin) / dt)) + 2
    n_fwd = int(math.ceil(t_plus / dt)) + 2 if t_plus > 0 else 0
    grid = TimeGrid(-n_back * dt, n_fwd * dt, dt)
    path = sample_wiener_path(grid, sys.m_noise, seed)
    return ou_stationary_path(path, sys.fast, sys.sigma, sys.epsilon)


def valid_picard_ratios(diffs: np.ndarray, floor: float) -> np.ndarray:
    """Successive Picard ratios restricted to steps whose increments stand
    clear of the convergence floor, where quotients are meaningful."""
    diffs = np.asarray(diffs, dtype=float)
    mask = (diffs[:-1] > floor) & (diffs[1:] > floor)
    return diffs[1:][mask] / diffs[:-1][mask]


def fit_decay_exponent(times: np.ndarray, values: np.ndarray, rel_floor: float = 1e-5):
    """Exponent lambda of a log-linear fit values ~ C e^{-lambda t}, using
    only nodes above rel_floor * max(values) to avoid the noise floor."""
    values = np.asarray(values, dtype=float)
    mask = values > rel_floor * float(np.max(values))
    if np.count_nonzero(mask) < 3:
        return math.nan
    slope = np.polyfit(np.asarray(times)[mask], np.log(values[mask]), 1)[0]
    return -float(slope)


def manifold_experiment(
    sys: SystemSpec,
    seeds,
    n_samples: int = 5,
    tol: float = 1e-8,
    amplitude: float = 1.0,
):
    """Manifold samples over (seed, Y0); rows in MANIFOLD_COLUMNS order."""
    rows = []
    kappa = contraction_factor(sys.K, sys.gamma1, sys.gamma2, sys.mu, sys.epsilon)
    lip_bound = manifold_lipschitz_bound(sys.K, sys.gamma1, sys.mu, kappa)
    max_ratio = 0.0
    slopes = []
    lip_values = []
    scalar = sys.state_shapes == ((1, 1), (1, 1))
    for seed in seeds:
        path = make_system_noise_path(sys, seed, tol=tol)
        solver = BackwardSolver(sys, mode="slow", tol=tol, path=path)
        y0_list = random_slow_states(sys, n_samples, seed, amplitude)
        h_list = []
        for sample_id, Y0 in enumerate(y0_list):
            res = solver.solve(Y0)
            h = res.fast_at_zero
            h_list.append(h)
            ratios = valid_picard_ratios(res.diffs, 100.0 * tol)
            ratio = float(np.max(ratios)) if len(ratios) else math.nan
            if not math.isnan(ratio):
                max_ratio = max(max_ratio, ratio)
            hf, yf = h.ravel(), Y0.ravel()
            for i, hv in enumerate(hf):
                y0v = yf[i] if i < len(yf) else math.nan
                slope = hv / y0v if scalar and y0v != 0.0 else math.nan
                if not math.isnan(slope):
                    slopes.append(slope)
                rows.append(
                    (seed, sys.epsilon, sample_id, "fast", i, y0v, hv,
                     res.iterations, res.residual, ratio, slope)
                )
            for i, yv in enumerate(yf):
                rows.append(
                    (seed, sys.epsilon, sample_id, "slow", i, yv, math.nan,
                     res.iterations, res.residual, ratio, math.nan)
                )
        lip_values.append(empirical_lipschitz(sys, y0_list, np.stack(h_list)))
    emp_lip = max(lip_values)
    summary = {
        "model": sys.name,
        "epsilon": sys.epsilon,
        "kappa": kappa,
        "lip_bound": lip_bound,
        "empirical_lipschitz": emp_lip,
        "max_measured_ratio": max_ratio,
        "mean_slope": float(np.mean(slopes)) if slopes else math.nan,
        "checks": {
            "picard_ratio_below_kappa": bool(max_ratio <= kappa + 0.05),
            "lipschitz_below_bound": bool(emp_lip <= lip_bound),
        },
    }
    return rows, summary


def tracking_experiment(
    sys: SystemSpec,
    seeds,
    tol: float = 1e-8,
    amplitude: float = 1.5,
    stride: int = 10,
):
    """One tracking solve per seed from a random off-manifold start; rows
    in TRACKING_COLUMNS order, subsampled every ``stride`` nodes."""
    rows = []
    rho = rho_factor(sys.K, sys.gamma1, sys.gamma2, sys.mu, sys.epsilon)
    t_final = forward_horizon(sys, tol) * 1.05
    max_ratio = 0.0
    max_picard = 0.0
    exponents = []
    for seed in seeds:
        path = make_system_noise_path(sys, seed, tol=tol, t_plus=t_final)
        dt = path.grid.dt if path is not None else sys.epsilon / 20.0
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x7AC)))
        (n1, d1), (n2, d2) = sys.state_shapes
        x0 = amplitude * rng.standard_normal((n1, d1)) / (1.0 + np.arange(n1))[:, None]
        y0 = amplitude * rng.standard_normal((n2, d2)) / (1.0 + np.arange(n2))[:, None]
        ref = integrate_full(sys, x0, y0, t_final, path=path, dt=dt)
        pair = solve_tracking_point(sys, ref, path=path, tol=tol)
        rep = verify_tracking(sys, pair, tol=tol)
        fitted = rep["fitted_rate_times_eps"] / sys.epsilon
        exponents.append(fitted)
        max_ratio = max(max_ratio, rep["max_weighted_ratio"])
        ratios = valid_picard_ratios(pair.diffs, 100.0 * tol)
        if len(ratios):
            max_picard = max(max_picard, float(np.max(ratios)))
        for j in range(0, len(pair.times), stride):
            rows.append(
                (seed, sys.epsilon, pair.times[j], pair.gaps[j],
                 rep["weighted_ratios"][j], fitted)
            )
    summary = {
        "model": sys.name,
        "epsilon": sys.epsilon,
        "rho": rho,
        "max_weighted_ratio": max_ratio,
        "max_picard_ratio": max_picard,
        "min_fitted_exponent": float(np.min(exponents)),
        "mu_over_eps": sys.mu / sys.epsilon,
        "checks": {
            "weighted_ratio_below_1.1": bool(max_ratio <= 1.1),
            "picard_ratio_below_rho": bool(max_picard <= rho + 0.05),
            "decay_at_least_0.9_mu": bool(
                np.min(exponents) >= 0.9 * sys.mu / sys.epsilon
            ),
        },
    }
    return rows, summary


def critical_experiment(
    make_system,
    epsilons,
    seeds,
    n_y0: int = 1,
    tol: float = 1e-8,
    amplitude: float = 0.5,
):
    """Rescaled-vs-critical gap sweep; rows in CRITICAL_COLUMNS order."""
    sys_ref = make_system(float(min(epsilons)))
    y0_list = random_slow_states(sys_ref, n_y0, seed=0, amplitude=amplitude)
    rows = []
    sweeps = []
    for y0_id, Y0 in enumerate(y0_list):
        sweep = epsilon_sweep(make_system, epsilons, Y0, seeds=seeds, tol=tol)
        sweeps.append(sweep)
        for i, eps in enumerate(sweep.epsilons):
            for s, seed in enumerate(seeds):
                rows.append((eps, seed, y0_id, sweep.errors[i, s]))
    slopes = [sw.slope for sw in sweeps]
    summary = {
        "model": sys_ref.name,
        "slope": float(np.mean(slopes)),
        "intercept": float(np.mean([sw.intercept for sw in sweeps])),
        "r2": float(np.min([sw.r_squared for sw in sweeps])),
        "checks": {"slope_in_0.8_1.2": bool(0.8 <= min(slopes) and max(slopes) <= 1.2)},
    }
    return rows, summary


def linear_benchmark_expansion_check(a, k, c, epsilons, tol=1e-10):
    """Gap of the rescaled manifold slope to k/a on the exactly solvable
    benchmark vs the first-order expansion k^2 c eps / a^3; returns the
    worst relative deviation."""
    worst = 0.0
    for eps in epsilons:
        err = abs(scalar_linear_slope(a, k, c, eps) - k / a)
        pred = k * k * c * eps / a**3
        worst = max(worst, abs(err - pred) / pred)
    return worst


def reduction_experiment(
    sys: SystemSpec,
    seeds,
    t_final: float = 2.0,
    tol: float = 1e-8,
    n_checks: int = 5,
    offset: float = 1.0,
    dt: float | None = None,
    stride_slow: int = 10,
):
    """Invariance residual plus full-vs-reduced comparison per seed.

    Returns (full_rows, reduced_rows, summary); trajectory rows follow
    TRAJECTORY_COLUMNS (first seed only, to keep dumps bounded).
    """
    if dt is None:
        dt = sys.epsilon / 20.0
    residuals = []
    exponents = []
    full_rows, reduced_rows = [], []
    for idx, seed in enumerate(seeds):
        t_plus = max(t_final, forward_horizon(sys, tol) * 1.1)
        path = make_system_noise_path(sys, seed, tol=tol, t_plus=t_plus, dt=dt)
        res = invariance_residual(
            sys, random_slow_states(sys, 1, seed)[0], t_final,
            path=path, n_checks=n_checks, tol=tol, dt=dt,
        )
        residuals.append(float(np.max(res)))

        # the orbit the decay rate applies to starts from the shadowing
        # initial slow value, found by one tracking solve
        y0 = random_slow_states(sys, 1, seed, amplitude=0.8)[0]
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xD0)))
        solver = BackwardSolver(sys, mode="slow", tol=tol, path=path)
        if path is not None:
            solver.shift_origin(path, 0.0)
        h0 = solver.solve(y0).fast_at_zero
        x0 = h0 + offset * rng.standard_normal(h0.shape) / (1.0 + np.arange(len(h0)))[:, None]
        t_cmp = forward_horizon(sys, tol) * 1.05
        full = integrate_full(sys, x0, y0, t_cmp, path=path, dt=dt)
        pair = solve_tracking_point(sys, full, path=path, tol=tol)
        n_cmp = (len(pair.times) - 1) // stride_slow * stride_slow
        red = integrate_reduced(
            sys, pair.initial_slow, n_cmp * dt, path=path,
            dt_slow=stride_slow * dt, tol=tol,
        )
        jj = np.arange(0, n_cmp + 1, stride_slow)
        dist = sys.fast.norm(full.fast[jj] - red.fast) + sys.slow.norm(
            full.slow[jj] - red.slow
        )
        lam = fit_decay_exponent(red.times, dist, rel_floor=1e-3)
        exponents.append(lam)
        if idx == 0:
            for traj, rows_out in ((full, full_rows), (red, reduced_rows)):
                for j, t in enumerate(traj.times):
                    for i, v in enumerate(traj.fast[j].ravel()):
                        rows_out.append((t, "fast", i, v))
                    for i, v in enumerate(traj.slow[j].ravel()):
                        rows_out.append((t, "slow", i, v))
    budget = 10.0 * (tol + dt)
    summary = {
        "model": sys.name,
        "epsilon": sys.epsilon,
        "max_invariance_residual": max(residuals),
        "residual_budget": budget,
        "min_fitted_exponent": float(np.min(exponents)),
        "mu_over_eps": sys.mu / sys.epsilon,
        "checks": {
            "invariance_within_budget": bool(max(residuals) <= budget),
            "reduction_decay_at_least_0.9_mu": bool(
                np.min(exponents) >= 0.9 * sys.mu / sys.epsilon
            ),
        },
    }
    return full_rows, reduced_rows, summary


def scaling_experiment(
    r: float,
    sigma: float,
    epsilons=(1.0, 0.1, 0.01),
    n_seeds: int = 400,
    base_seed: int = 0,
    t_probe: float = 0.25,
):
    """Law-level check of the time scaling of the stationary process.

    For each eps, across seeds: one sample of eta^{1/eps}(theta_t omega)
    (evolved through the exact recursion, not the stationary initial draw)
    and one of xi(theta_{t/eps} omega), both at the probe time.  Their
    variances must equal sigma^2/(2r) within 3 standard errors, and a
    two-sample KS test must accept equality in law at level 0.01.
    """
    from .spectral import FastLinearPart

    fast = FastLinearPart(gamma1=r, rates=np.array([r]))
    rows = []
    per_eps = {}
    target = sigma * sigma / (2.0 * r)
    for eps in epsilons:
        dt = min(eps / 4.0, 0.05)
        n = int(round(t_probe / dt))
        dt = t_probe / n
        grid = TimeGrid(-n * dt, 0.0, dt)
        dt_x = dt / eps
        grid_x = TimeGrid(-n * dt_x, 0.0, dt_x)
        eta = np.empty(n_seeds)
        xi = np.empty(n_seeds)
        for s in range(n_seeds):
            seed = base_seed + s
            p = ou_stationary_path(sample_wiener_path(grid, 1, 2 * seed), fast, sigma, eps)
            eta[s] = p.ou_at(0.0)[0, 0]
            q = ou_stationary_path(
                sample_wiener_path(grid_x, 1, 2 * seed + 1), fast, sigma, 1.0
            )
            xi[s] = q.ou_at(0.0)[0, 0]
            rows.append((eps, seed, eta[s], xi[s]))
        var = float(np.var(eta, ddof=1))
        se = target * math.sqrt(2.0 / (n_seeds - 1))
        ks = scipy.stats.ks_2samp(eta, xi)
        per_eps[str(eps)] = {
            "variance": var,
            "target": target,
            "std_errors_off": abs(var - target) / se,
            "ks_pvalue": float(ks.pvalue),
        }
    summary = {
        "r": r,
        "sigma": sigma,
        "per_epsilon": per_eps,
        "checks": {
            "variance_within_3se": bool(
                all(v["std_errors_off"] <= 3.0 for v in per_eps.values())
            ),
            "ks_accepts_at_0.01": bool(
                all(v["ks_pvalue"] > 0.01 for v in per_eps.values())
            ),
        },
    }
    return rows, summary

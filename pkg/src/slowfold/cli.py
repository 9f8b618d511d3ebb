"""Command line entry point: config parsing, validation, experiment
dispatch, and CSV/JSON result emission.

Configs are flat key-value text with dotted section keys::

    model.name = scalar_linear
    model.a = 1.0
    model.k = 0.4
    model.c = 0.3
    system.epsilon = 0.01
    system.mu = 0.5
    system.sigma = 0.05
    experiment.kind = manifold
    seeds.count = 3
    seeds.base = 1000

Exit status: 0 all configured checks pass, 1 a check failed, 2 invalid
configuration, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys as _sys
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError, SlowfoldError, SolverError
from . import experiments as ex
from .models import (
    make_parabolic_hyperbolic,
    make_parabolic_ode,
    make_scalar_linear,
    make_wave_wave,
    validate_system,
    with_cutoff,
)

__all__ = ["main", "parse_config", "validate_config", "run_experiment"]

EXPERIMENTS = ("manifold", "tracking", "critical", "reduction", "scaling")


def parse_config(path: str) -> dict:
    """Parse a flat dotted-key config file into {key: parsed value}.

    Values become int, float, comma-separated lists thereof, or strings.
    Parse errors name the line number and key.
    """
    cfg = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            cfg[key] = _parse_value(val)
    return cfg


def _parse_value(val: str):
    if "," in val:
        return [_parse_value(p.strip()) for p in val.split(",") if p.strip()]
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            continue
    return val


def _epsilons(cfg: dict) -> list[float]:
    eps = cfg.get("system.epsilon", 0.1)
    return [float(e) for e in eps] if isinstance(eps, list) else [float(eps)]


def build_system(cfg: dict, epsilon: float | None = None):
    """Instantiate the configured model at the given epsilon."""
    name = cfg.get("model.name")
    eps = float(epsilon if epsilon is not None else _epsilons(cfg)[0])
    mu = cfg.get("system.mu")
    sigma = float(cfg.get("system.sigma", 0.0))
    n_modes = int(cfg.get("system.n_modes", 8))
    m = int(cfg.get("system.m", 1))
    common = dict(epsilon=eps, sigma=sigma)
    if name == "scalar_linear":
        sys = make_scalar_linear(
            float(cfg.get("model.a", 1.0)),
            float(cfg.get("model.k", 0.4)),
            float(cfg.get("model.c", 0.3)),
            mu=float(mu) if mu is not None else 0.5,
            **common,
        )
    elif name == "parabolic_hyperbolic":
        sys = make_parabolic_hyperbolic(
            float(cfg.get("model.alpha", 2.0)),
            float(cfg.get("model.beta", 1.0)),
            n_modes,
            float(cfg.get("model.cf", 0.4)),
            float(cfg.get("model.cg", 0.4)),
            mu=float(mu) if mu is not None else None,
            m_noise=m,
            **common,
        )
    elif name == "parabolic_ode":
        sys = make_parabolic_ode(
            n_modes,
            int(cfg.get("model.m_slow", 2)),
            float(cfg.get("model.cf", 0.3)),
            float(cfg.get("model.cg", 0.3)),
            mu=float(mu) if mu is not None else 0.5,
            m_noise=m,
            **common,
        )
    elif name == "wave_wave":
        sys = make_wave_wave(
            float(cfg.get("model.nu", 2.0)),
            float(cfg.get("model.beta", 1.0)),
            eps,
            n_modes,
            float(cfg.get("model.cf", 0.05)),
            float(cfg.get("model.cg", 0.05)),
            mu=float(mu) if mu is not None else None,
            sigma=sigma,
        )
    else:
        raise ConfigError(
            f"unknown model.name {name!r}; expected scalar_linear, "
            "parabolic_hyperbolic, parabolic_ode or wave_wave"
        )
    radius = cfg.get("model.cutoff_radius")
    if radius is not None:
        sys = with_cutoff(sys, float(radius))
    return sys


def validate_config(cfg: dict) -> list[str]:
    """Structural gates for a parsed config; empty list iff runnable."""
    violations = []
    kind = cfg.get("experiment.kind", "manifold")
    if kind not in EXPERIMENTS:
        violations.append(f"experiment.kind {kind!r} not one of {EXPERIMENTS}")
    if kind == "scaling":
        if float(cfg.get("model.r", 1.0)) <= 0:
            violations.append("model.r must be positive for the scaling check")
        return violations
    for eps in _epsilons(cfg):
        try:
            sys = build_system(cfg, epsilon=eps)
        except SlowfoldError as e:
            violations.append(str(e))
            continue
        violations.extend(validate_system(sys))
        dt = cfg.get("grid.dt")
        if dt is not None and float(dt) > sys.epsilon / 10.0 + 1e-12:
            violations.append(
                f"grid.dt={float(dt):.6g} too coarse: need dt <= epsilon/10 = "
                f"{sys.epsilon / 10.0:.6g}"
            )
        tm, tp = cfg.get("grid.t_minus"), cfg.get("grid.t_plus")
        if tm is not None and float(tm) > 0:
            violations.append(f"grid.t_minus={tm} must be <= 0")
        if tp is not None and float(tp) < 0:
            violations.append(f"grid.t_plus={tp} must be >= 0")
    return sorted(set(violations))


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    f = float(v)
    if math.isnan(f):
        return "nan"
    return format(f, ".17g")


def _write_csv(path: str, columns, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_summary(path: str, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(cfg: dict, out_dir: str, threads: int = 1, strict: bool = False) -> int:
    """Run the configured experiment, writing CSVs and summary.json.

    Fail-closed: nothing is written when validation fails (status 2).
    Solver failures give status 3; failed checks status 1.
    """
    violations = validate_config(cfg)
    if violations:
        for v in violations:
            print(f"invalid config: {v}", file=_sys.stderr)
        return 2

    kind = cfg.get("experiment.kind", "manifold")
    tol = float(cfg.get("solver.tol", 1e-8))
    n_seeds = int(cfg.get("seeds.count", 1))
    base_seed = int(cfg.get("seeds.base", 0))
    seeds = [base_seed + i for i in range(n_seeds)]
    os.makedirs(out_dir, exist_ok=True)

    try:
        files, summary = _dispatch(cfg, kind, seeds, tol, threads)
    except SolverError as e:
        print(f"solver failure in {kind}: {e}", file=_sys.stderr)
        return 3
    except SlowfoldError as e:
        print(f"invalid config: {e}", file=_sys.stderr)
        return 2

    for name, columns, rows in files:
        _write_csv(os.path.join(out_dir, name), columns, rows)
    _write_summary(os.path.join(out_dir, "summary.json"), summary)
    checks = summary.get("checks", {})
    ok = all(checks.values())
    if strict and summary.get("warnings"):
        ok = False
    for name, passed in checks.items():
        print(f"{'PASS' if passed else 'FAIL'} {kind}: {name}")
    return 0 if ok else 1


def _seed_chunks(seeds, threads):
    k = max(1, min(threads, len(seeds)))
    return [seeds[i::k] for i in range(k)]


def _parallel_merge(fn, seeds, threads):
    """Fan seed chunks over a thread pool; merge rows in seed order so the
    output is independent of scheduling."""
    if threads <= 1 or len(seeds) <= 1:
        return [fn([s]) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: fn([s]), seeds))


def _dispatch(cfg, kind, seeds, tol, threads):
    if kind == "scaling":
        rows, summary = ex.scaling_experiment(
            float(cfg.get("model.r", 1.0)),
            float(cfg.get("system.sigma", 1.0)),
            epsilons=_epsilons(cfg) if "system.epsilon" in cfg else (1.0, 0.1, 0.01),
            n_seeds=int(cfg.get("seeds.count", 400)),
            base_seed=int(cfg.get("seeds.base", 0)),
        )
        return [("scaling.csv", ex.SCALING_COLUMNS, rows)], summary

    if kind == "critical":
        def mk(eps):
            return build_system(cfg, epsilon=eps)

        eps_list = _epsilons(cfg)
        if len(eps_list) < 2:
            eps_list = [0.1, 0.05, 0.025, 0.0125]
        rows, summary = ex.critical_experiment(
            mk, eps_list, seeds, n_y0=int(cfg.get("experiment.n_y0", 1)), tol=tol
        )
        return [("critical.csv", ex.CRITICAL_COLUMNS, rows)], summary

    sys = build_system(cfg)
    if kind == "manifold":
        n_samples = int(cfg.get("experiment.n_samples", 5))
        parts = _parallel_merge(
            lambda ss: ex.manifold_experiment(sys, ss, n_samples=n_samples, tol=tol),
            seeds,
            threads,
        )
        rows = [r for part_rows, _ in parts for r in part_rows]
        summary = _merge_manifold([s for _, s in parts])
        return [("manifold.csv", ex.MANIFOLD_COLUMNS, rows)], summary
    if kind == "tracking":
        parts = _parallel_merge(
            lambda ss: ex.tracking_experiment(sys, ss, tol=tol), seeds, threads
        )
        rows = [r for part_rows, _ in parts for r in part_rows]
        summary = _merge_tracking([s for _, s in parts])
        return [("tracking.csv", ex.TRACKING_COLUMNS, rows)], summary
    if kind == "reduction":
        full_rows, red_rows, summary = ex.reduction_experiment(
            sys, seeds, t_final=float(cfg.get("experiment.t_final", 2.0)), tol=tol
        )
        return [
            ("trajectory_full.csv", ex.TRAJECTORY_COLUMNS, full_rows),
            ("trajectory_reduced.csv", ex.TRAJECTORY_COLUMNS, red_rows),
        ], summary
    raise ConfigError(f"unknown experiment kind {kind!r}")


def _merge_manifold(summaries):
    out = dict(summaries[0])
    out["max_measured_ratio"] = max(s["max_measured_ratio"] for s in summaries)
    out["empirical_lipschitz"] = max(s["empirical_lipschitz"] for s in summaries)
    slopes = [s["mean_slope"] for s in summaries if not math.isnan(s["mean_slope"])]
    out["mean_slope"] = float(sum(slopes) / len(slopes)) if slopes else math.nan
    out["checks"] = {
        "picard_ratio_below_kappa": bool(
            out["max_measured_ratio"] <= out["kappa"] + 0.05
        ),
        "lipschitz_below_bound": bool(out["empirical_lipschitz"] <= out["lip_bound"]),
    }
    return out


def _merge_tracking(summaries):
    out = dict(summaries[0])
    out["max_weighted_ratio"] = max(s["max_weighted_ratio"] for s in summaries)
    out["max_picard_ratio"] = max(s["max_picard_ratio"] for s in summaries)
    out["min_fitted_exponent"] = min(s["min_fitted_exponent"] for s in summaries)
    out["checks"] = {
        "weighted_ratio_below_1.1": bool(out["max_weighted_ratio"] <= 1.1),
        "picard_ratio_below_rho": bool(out["max_picard_ratio"] <= out["rho"] + 0.05),
        "decay_at_least_0.9_mu": bool(
            out["min_fitted_exponent"] >= 0.9 * out["mu_over_eps"]
        ),
    }
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="slowfold",
        description="Random slow manifolds for fast-slow stochastic systems: "
        "manifold construction, exponential tracking, critical limits.",
    )
    parser.add_argument("--config", required=True, help="flat dotted-key config file")
    parser.add_argument("--experiment", choices=EXPERIMENTS, help="override experiment.kind")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seeds", type=int, help="override seeds.count")
    parser.add_argument("--base-seed", type=int, help="override seeds.base")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--strict", action="store_true", help="treat warnings as failures")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
    except (OSError, ConfigError) as e:
        print(f"invalid config: {e}", file=_sys.stderr)
        return 2
    if args.experiment:
        cfg["experiment.kind"] = args.experiment
    if args.seeds is not None:
        cfg["seeds.count"] = args.seeds
    if args.base_seed is not None:
        cfg["seeds.base"] = args.base_seed
    out_dir = os.environ.get("SLOWFOLD_OUT") or args.out
    return run_experiment(cfg, out_dir, threads=args.threads, strict=args.strict)


if __name__ == "__main__":
    raise SystemExit(main())

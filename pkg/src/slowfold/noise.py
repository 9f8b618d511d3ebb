"""Two-sided Wiener paths, the Wiener shift, and stationary OU processes.

Paths live on a uniform grid covering [t_minus, t_plus] with 0 as a node.
Increments are drawn from counter-based Philox streams, one per
(seed, component), so sampling is reproducible and independent of
evaluation order.

The stationary Ornstein-Uhlenbeck values attached to a path solve, per
driven mode with decay rate r,

    d eta = -(r / eps) eta dt + (sigma / sqrt(eps)) dw_j

exactly on the grid: the update is the exact conditional Gaussian step
given the stored Wiener increment of the same component, so no
Euler-Maruyama bias enters regardless of how stiff r/eps is.  The
stationary variance sigma^2 / (2 r) is independent of eps.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import WindowError
from .spectral import FastLinearPart

__all__ = [
    "TimeGrid",
    "NoisePath",
    "sample_wiener_path",
    "ou_stationary_path",
    "wiener_shift",
    "save_noise_path",
    "load_noise_path",
]

_WIENER_TAG = 0x57A7
_OU_TAG = 0x0057


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t_minus, t_plus] with step dt; both endpoints are
    integer multiples of dt and 0 is a grid node."""

    t_minus: float
    t_plus: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_minus > 0 or self.t_plus < 0:
            raise ValueError("grid must satisfy t_minus <= 0 <= t_plus")
        for name, val in (("t_minus", self.t_minus), ("t_plus", self.t_plus)):
            steps = val / self.dt
            if abs(steps - round(steps)) > 1e-9:
                raise ValueError(f"{name}={val} is not a multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return round((self.t_plus - self.t_minus) / self.dt)

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @cached_property
    def times(self) -> np.ndarray:
        return self.t_minus + self.dt * np.arange(self.n_nodes)

    def index_of(self, t: float) -> int:
        """Node index of a grid-aligned time t."""
        steps = (t - self.t_minus) / self.dt
        j = round(steps)
        if abs(steps - j) > 1e-7:
            raise WindowError(f"t={t} is not a node of the grid (dt={self.dt})")
        if j < 0 or j >= self.n_nodes:
            raise WindowError(
                f"t={t} outside the stored window [{self.t_minus}, {self.t_plus}]"
            )
        return j


@dataclass(frozen=True)
class NoisePath:
    """Discretized two-sided Wiener path, optionally with stationary OU values.

    increments[j, i] is the increment of component j over step i.  When OU
    values are attached, ou_samples[i, k, 0] is the stationary process of
    fast mode k evaluated at node i; undriven modes are identically zero.
    ``ou_innovations`` stores the full per-step innovation term so the exact
    recursion can be re-verified arithmetically.
    """

    grid: TimeGrid
    increments: np.ndarray
    seed: int
    ou_samples: np.ndarray | None = None
    ou_innovations: np.ndarray | None = None
    ou_rates: np.ndarray | None = None
    sigma: float | None = None
    epsilon: float | None = None

    @property
    def m(self) -> int:
        return self.increments.shape[0]

    @cached_property
    def values(self) -> np.ndarray:
        """Path values at the nodes, pinned to 0 at t = 0; shape (m, n_nodes)."""
        vals = np.concatenate(
            [np.zeros((self.m, 1)), np.cumsum(self.increments, axis=1)], axis=1
        )
        j0 = self.grid.index_of(0.0)
        return vals - vals[:, j0 : j0 + 1]

    def ou_at(self, t: float) -> np.ndarray:
        """OU values eta(theta_t omega), shape (n_fast, 1)."""
        if self.ou_samples is None:
            raise ValueError("no OU samples attached; call ou_stationary_path first")
        return self.ou_samples[self.grid.index_of(t)]

    def ou_on(self, t0: float, t1: float) -> np.ndarray:
        """OU values on all nodes of [t0, t1], shape (n_nodes, n_fast, 1)."""
        if self.ou_samples is None:
            raise ValueError("no OU samples attached; call ou_stationary_path first")
        i0, i1 = self.grid.index_of(t0), self.grid.index_of(t1)
        return self.ou_samples[i0 : i1 + 1]


def _component_rng(seed: int, tag: int, component: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=(int(seed) & 0xFFFFFFFFFFFFFFFF, tag, component))
    return np.random.Generator(np.random.Philox(ss))


def sample_wiener_path(grid: TimeGrid, m: int, seed: int) -> NoisePath:
    """Draw independent Gaussian increments (variance dt) per step and
    component; deterministic given (seed, component)."""
    if m < 1:
        raise ValueError("need at least one noise component")
    sqdt = np.sqrt(grid.dt)
    inc = np.empty((m, grid.n_steps))
    for j in range(m):
        inc[j] = sqdt * _component_rng(seed, _WIENER_TAG, j).standard_normal(grid.n_steps)
    return NoisePath(grid=grid, increments=inc, seed=seed)


def ou_stationary_path(
    path: NoisePath, fast_part: FastLinearPart, sigma: float, epsilon: float
) -> NoisePath:
    """Attach exact stationary OU samples for each driven fast mode.

    Mode j < m is driven by Wiener component j (noise directions are the
    leading basis functions).  The stationary initial value at t_minus is
    drawn from N(0, sigma^2 / (2 r_j)); subsequent nodes follow the exact
    conditional recursion given the stored increments.  Only diagonal fast
    parts are supported; block fast parts (coupled wave systems) run
    noise-free in this implementation.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if fast_part.kind != "diagonal":
        raise ValueError(
            "stationary OU sampling requires a diagonal fast part; "
            "block fast parts are supported only with sigma = 0"
        )
    rates = np.asarray(fast_part.rates, dtype=float)
    if np.any(rates <= 0):
        raise ValueError("all driven mode rates must be positive (no stationary solution)")
    if path.m > fast_part.n_modes:
        raise ValueError(
            f"noise components m={path.m} exceed the number of fast modes {fast_part.n_modes}"
        )

    grid = path.grid
    n = fast_part.n_modes
    ou = np.zeros((grid.n_nodes, n, 1))
    innov = np.zeros((grid.n_nodes - 1, n, 1))
    if sigma != 0.0:
        dt = grid.dt
        for j in range(path.m):
            r = rates[j]
            rng = _component_rng(path.seed, _OU_TAG, j)
            a = np.exp(-r * dt / epsilon)
            var_i = sigma**2 * (1.0 - a * a) / (2.0 * r)
            cov = sigma * np.sqrt(epsilon) * (1.0 - a) / r
            c = cov / dt
            var_resid = max(var_i - cov * c, 0.0)
            x = rng.normal(0.0, sigma / np.sqrt(2.0 * r))
            resid = rng.standard_normal(grid.n_steps) * np.sqrt(var_resid)
            ou[0, j, 0] = x
            for i in range(grid.n_steps):
                term = c * path.increments[j, i] + resid[i]
                x = a * x + term
                ou[i + 1, j, 0] = x
                innov[i, j, 0] = term
    return replace(
        path,
        ou_samples=ou,
        ou_innovations=innov,
        ou_rates=rates.copy(),
        sigma=float(sigma),
        epsilon=float(epsilon),
    )


def wiener_shift(path: NoisePath, s: float) -> NoisePath:
    """Return the path of theta_s omega: t -> omega(t + s) - omega(s).

    On the uniform grid this is a pure relabeling: the increment array is
    unchanged, the window moves to [t_minus - s, t_plus - s].  OU samples
    shift along (eta(theta_t theta_s omega) = eta(theta_{t+s} omega)).
    The shift must keep 0 inside the stored window.
    """
    steps = s / path.grid.dt
    if abs(steps - round(steps)) > 1e-9:
        raise WindowError(f"shift s={s} is not a multiple of dt={path.grid.dt}")
    if path.grid.t_minus - s > 1e-12 or path.grid.t_plus - s < -1e-12:
        raise WindowError(
            f"shift by {s} exhausts the stored window "
            f"[{path.grid.t_minus}, {path.grid.t_plus}]; sample a larger window"
        )
    new_grid = TimeGrid(path.grid.t_minus - s, path.grid.t_plus - s, path.grid.dt)
    return replace(path, grid=new_grid)


_MAGIC = b"SLWF"
_VERSION = 1


def save_noise_path(path: NoisePath, filename) -> None:
    """Binary dump: header (magic, version, grid, m, seed, OU metadata)
    followed by the increment payload row-major by component, then OU
    samples if present.  See README for the exact layout."""
    with open(filename, "wb") as fh:
        has_ou = path.ou_samples is not None
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IdddIQB",
                _VERSION,
                path.grid.t_minus,
                path.grid.t_plus,
                path.grid.dt,
                path.m,
                int(path.seed) & 0xFFFFFFFFFFFFFFFF,
                1 if has_ou else 0,
            )
        )
        fh.write(np.ascontiguousarray(path.increments, dtype="<f8").tobytes())
        if has_ou:
            fh.write(struct.pack("<ddI", path.sigma, path.epsilon, path.ou_samples.shape[1]))
            fh.write(np.ascontiguousarray(path.ou_rates, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(path.ou_samples, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(path.ou_innovations, dtype="<f8").tobytes())


def load_noise_path(filename) -> NoisePath:
    with open(filename, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{filename}: not a slowfold noise dump")
        version, t_minus, t_plus, dt, m, seed, has_ou = struct.unpack(
            "<IdddIQB", fh.read(struct.calcsize("<IdddIQB"))
        )
        if version != _VERSION:
            raise ValueError(f"unsupported noise dump version {version}")
        grid = TimeGrid(t_minus, t_plus, dt)
        inc = np.frombuffer(fh.read(8 * m * grid.n_steps), dtype="<f8").reshape(
            m, grid.n_steps
        )
        path = NoisePath(grid=grid, increments=inc.copy(), seed=seed)
        if has_ou:
            sigma, epsilon, n_fast = struct.unpack("<ddI", fh.read(struct.calcsize("<ddI")))
            rates = np.frombuffer(fh.read(8 * n_fast), dtype="<f8").copy()
            ou = np.frombuffer(fh.read(8 * grid.n_nodes * n_fast), dtype="<f8").reshape(
                grid.n_nodes, n_fast, 1
            )
            innov = np.frombuffer(
                fh.read(8 * (grid.n_nodes - 1) * n_fast), dtype="<f8"
            ).reshape(grid.n_nodes - 1, n_fast, 1)
            path = replace(
                path,
                ou_samples=ou.copy(),
                ou_innovations=innov.copy(),
                ou_rates=rates,
                sigma=sigma,
                epsilon=epsilon,
            )
        return path

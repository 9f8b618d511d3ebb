"""Hot per-step recursion kernels for the fixed-point solvers.

Two implementations of each kernel exist: a numba @njit version and a pure
numpy fallback.  The backend is selected once at import time from the
environment variable ``SLOWFOLD_KERNELS``:

    SLOWFOLD_KERNELS=numba   force numba (error if numba is unavailable)
    SLOWFOLD_KERNELS=numpy   force the pure-numpy path
    unset                    numba when importable, numpy otherwise

Both variants are kept importable so the benchmark in
``benchmarks/bench_kernels.py`` can compare them directly.

Array conventions: propagator/weight blocks have shape (n_modes, d, d),
forcing and state trajectories (n_times, n_modes, d).
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "conv_forward",
    "conv_backward_terminal",
    "conv_forward_numpy",
    "conv_backward_terminal_numpy",
]


def conv_forward_numpy(P, W0, W1, F, x0):
    """Forward recursion x[j] = P x[j-1] + W0 F[j-1] + W1 (F[j] - F[j-1]).

    Advances ``x' = M x + c F`` exactly for piecewise-linear F; ``x0`` is the
    state at the first node.
    """
    nt = F.shape[0]
    out = np.empty_like(F)
    out[0] = x0
    for j in range(1, nt):
        dF = F[j] - F[j - 1]
        out[j] = (
            np.einsum("nij,nj->ni", P, out[j - 1])
            + np.einsum("nij,nj->ni", W0, F[j - 1])
            + np.einsum("nij,nj->ni", W1, dF)
        )
    return out


def conv_backward_terminal_numpy(Pinv, W0, W1, G, y_end):
    """Backward recursion y[j] = Pinv (y[j+1] - W0 G[j] - W1 (G[j+1] - G[j])).

    Solves ``y' = M y + c G`` backwards from the terminal value ``y_end`` at
    the last node; Pinv is the exact inverse step exp(-M dt).
    """
    nt = G.shape[0]
    out = np.empty_like(G)
    out[nt - 1] = y_end
    for j in range(nt - 2, -1, -1):
        dG = G[j + 1] - G[j]
        rhs = (
            out[j + 1]
            - np.einsum("nij,nj->ni", W0, G[j])
            - np.einsum("nij,nj->ni", W1, dG)
        )
        out[j] = np.einsum("nij,nj->ni", Pinv, rhs)
    return out


def _pick_backend() -> str:
    forced = os.environ.get("SLOWFOLD_KERNELS", "").strip().lower()
    if forced == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if forced == "numba":
            raise ImportError("SLOWFOLD_KERNELS=numba but numba is not installed")
        return "numpy"
    return "numba"


BACKEND = _pick_backend()

if BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _conv_forward_nb(P, W0, W1, F, x0):  # pragma: no cover - compiled
        nt, n, d = F.shape
        out = np.empty_like(F)
        out[0] = x0
        for j in range(1, nt):
            for m in range(n):
                for i in range(d):
                    acc = 0.0
                    for k in range(d):
                        acc += P[m, i, k] * out[j - 1, m, k]
                        acc += W0[m, i, k] * F[j - 1, m, k]
                        acc += W1[m, i, k] * (F[j, m, k] - F[j - 1, m, k])
                    out[j, m, i] = acc
        return out

    @njit(cache=True)
    def _conv_backward_nb(Pinv, W0, W1, G, y_end):  # pragma: no cover - compiled
        nt, n, d = G.shape
        out = np.empty_like(G)
        out[nt - 1] = y_end
        rhs = np.empty(d)
        for j in range(nt - 2, -1, -1):
            for m in range(n):
                for i in range(d):
                    acc = out[j + 1, m, i]
                    for k in range(d):
                        acc -= W0[m, i, k] * G[j, m, k]
                        acc -= W1[m, i, k] * (G[j + 1, m, k] - G[j, m, k])
                    rhs[i] = acc
                for i in range(d):
                    acc = 0.0
                    for k in range(d):
                        acc += Pinv[m, i, k] * rhs[k]
                    out[j, m, i] = acc
        return out

    def conv_forward(P, W0, W1, F, x0):
        return _conv_forward_nb(
            np.ascontiguousarray(P),
            np.ascontiguousarray(W0),
            np.ascontiguousarray(W1),
            np.ascontiguousarray(F),
            np.ascontiguousarray(x0),
        )

    def conv_backward_terminal(Pinv, W0, W1, G, y_end):
        return _conv_backward_nb(
            np.ascontiguousarray(Pinv),
            np.ascontiguousarray(W0),
            np.ascontiguousarray(W1),
            np.ascontiguousarray(G),
            np.ascontiguousarray(y_end),
        )

else:
    conv_forward = conv_forward_numpy
    conv_backward_terminal = conv_backward_terminal_numpy

conv_forward.__doc__ = conv_forward_numpy.__doc__
conv_backward_terminal.__doc__ = conv_backward_terminal_numpy.__doc__

"""Timing comparison of the numba and numpy recursion kernels.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Measures the forward and backward convolution recursions on trajectory
sizes representative of the backward fixed-point solves (scalar, many-mode
diagonal, and 2x2 block cases).
"""

import time

import numpy as np

from slowfold.kernels import (
    conv_backward_terminal_numpy,
    conv_forward_numpy,
)


def _cases():
    rng = np.random.default_rng(0)
    for label, nt, n, d in (
        ("scalar long window", 2000, 1, 1),
        ("diagonal 32 modes", 600, 32, 1),
        ("wave blocks 16 modes", 600, 16, 2),
    ):
        P = np.tile(np.eye(d) * 0.99, (n, 1, 1))
        W0 = 0.01 * rng.standard_normal((n, d, d))
        W1 = 0.005 * rng.standard_normal((n, d, d))
        F = rng.standard_normal((nt, n, d))
        z0 = rng.standard_normal((n, d))
        yield label, (P, W0, W1, F, z0)


def _time(fn, args, repeats):
    fn(*args)  # warm up (numba: trigger compilation)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main(repeats: int = 20):
    try:
        from slowfold.kernels import _conv_backward_nb, _conv_forward_nb
    except ImportError:
        print("numba backend unavailable (SLOWFOLD_KERNELS=numpy?); nothing to compare")
        return
    print(f"{'case':<24} {'direction':<9} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for label, args in _cases():
        for direction, np_fn, nb_fn in (
            ("forward", conv_forward_numpy, _conv_forward_nb),
            ("backward", conv_backward_terminal_numpy, _conv_backward_nb),
        ):
            t_np = _time(np_fn, args, repeats)
            t_nb = _time(nb_fn, args, repeats)
            print(
                f"{label:<24} {direction:<9} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms "
                f"{t_np / t_nb:>7.1f}x"
            )


if __name__ == "__main__":
    main()

"""Timing comparison of the numba and numpy kernel backends.

Run:  python benchmarks/bench_kernels.py [--sizes small|large]

The same workloads run through both implementations (the env flag
NFSCAT_DISABLE_NUMBA selects the backend for the package itself; here
both are imported directly so one process covers both).
"""

import argparse
import time

import numpy as np

from nfscat import _impl_numpy

try:
    from nfscat import _impl_numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def bench(label, fn, *args, repeat=3):
    fn(*args)  # warm-up (JIT compile on the numba path)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    print(f"  {label:<14} {best * 1e3:10.1f} ms")
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", choices=("small", "large"), default="small")
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    if args.sizes == "large":
        n_pts, n_bessel, n_modes = 3500, 4_000_000, 32768
    else:
        n_pts, n_bessel, n_modes = 1200, 500_000, 8192

    impls = [("numpy", _impl_numpy)]
    if HAVE_NUMBA:
        impls.append(("numba", _impl_numba))

    x = rng.uniform(1e-3, 900.0, size=n_bessel)
    print(f"bessel01 on {n_bessel} arguments:")
    for name, impl in impls:
        bench(name, impl.bessel01, x)

    pts = rng.uniform(-1, 1, size=(n_pts, 2))
    print(f"outgoing_kernel_2d self-assembly {n_pts}x{n_pts}:")
    for name, impl in impls:
        bench(name, impl.outgoing_kernel_2d, pts, pts, 1.4)

    pts3 = rng.uniform(-1, 1, size=(n_pts // 2, 3))
    print(f"outgoing_kernel_3d {n_pts // 2}x{n_pts // 2}:")
    for name, impl in impls:
        bench(name, impl.outgoing_kernel_3d, pts3, pts3, 1.4)

    eval_pts = rng.uniform(-1, 1, size=(512, 3))
    freqs = rng.uniform(-30, 30, size=(n_modes, 3))
    coeffs = rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)
    print(f"phase_mode_sum 512 points x {n_modes} modes:")
    for name, impl in impls:
        bench(name, impl.phase_mode_sum, eval_pts, freqs, coeffs)

    targets = rng.normal(size=256) + 1j * rng.normal(size=256)
    sources = rng.normal(size=n_pts**2 // 64) + 1j * rng.normal(size=n_pts**2 // 64)
    w = rng.normal(size=sources.size) + 1j * rng.normal(size=sources.size)
    print(f"cauchy_sum 256 targets x {sources.size} sources:")
    for name, impl in impls:
        bench(name, impl.cauchy_sum, targets, sources, w)


if __name__ == "__main__":
    main()

"""Time each hot kernel with its numba and pure-numpy implementation.

    python benchmarks/bench_kernels.py [--size N] [--repeat R]

Both backends are imported side by side (the env flag only picks which one
the library calls), checked for agreement, then timed after a warm-up call.
"""
import argparse
import time

import numpy as np

from unirect import kernels
from unirect._accel import numba


def best_of(fn, args, repeat):
    fn(*args)  # warm-up (triggers compilation for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(size, rng):
    P = rng.normal(size=(size, 3))
    w = rng.uniform(0.5, 2, size)
    z0 = np.zeros(3)
    edges = np.geomspace(0.01, 4, 12)
    m = min(size, 3000)
    u = rng.uniform(size=(m, 2))
    h = u[:, :1] + 0.05 * rng.normal(size=(m, 1))
    order = np.arange(m, dtype=np.int64)
    small = P[:min(size, 4000)].copy()
    return {
        "riesz_annulus": (P, w, z0, 0.05, 3.0, 2),
        "riesz_shells": (P, w, z0, edges, 2),
        "diameter": (small,),
        "lipschitz_greedy": (u, h, order, 1.0, 1e-9),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if numba is None:
        print("numba not installed; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"numba {numba.__version__}, numpy {np.__version__}, size {args.size}")
    print(f"{'kernel':<18}{'numpy s':>12}{'numba s':>12}{'speedup':>10}")
    for name, call in cases(args.size, rng).items():
        fast = kernels.NUMBA_KERNELS[name]
        slow = kernels.NUMPY_KERNELS[name]
        a, b = np.asarray(fast(*call)), np.asarray(slow(*call))
        if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        t_np = best_of(slow, call, args.repeat)
        t_nb = best_of(fast, call, args.repeat)
        print(f"{name:<18}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()

"""Time the compiled and numpy kernels on the same chains.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

import argparse
import time

import numpy as np

from ginibre_lyapunov import kernels
from ginibre_lyapunov.rng import derive_stream, sample_ginibre_chain

CASES = [(2, 100), (3, 300), (5, 100), (10, 200), (30, 300)]
QUICK = [(2, 100), (3, 300), (5, 100)]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small cases only")
    args = ap.parse_args(argv)
    try:
        from ginibre_lyapunov.kernels import _ckernels  # noqa: F401
    except ImportError:
        print("compiled kernels not built; nothing to compare")
        return 1
    print(f"{'kernel':<6} {'N':>3} {'t':>4} {'cython ms':>10} {'python ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for N, t in (QUICK if args.quick else CASES):
        A = sample_ginibre_chain(derive_stream(0, N * 1000 + t), 2, N, t)
        for name, fn in (("sv", kernels.log_singular_values), ("ev", kernels.log_eigenvalue_moduli)):
            tc, rc = best_of(lambda: fn(A, backend="cython"), args.repeat)
            tp, rp = best_of(lambda: fn(A, backend="python"), args.repeat)
            diff = np.abs(rc.values - rp.values).max()
            print(f"{name:<6} {N:>3} {t:>4} {1e3 * tc:>10.3f} {1e3 * tp:>10.3f} {tp / tc:>8.1f} {diff:>11.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

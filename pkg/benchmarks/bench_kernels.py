"""Compare the compiled and numpy kernel backends on training-shaped inputs.

Usage: python benchmarks/bench_kernels.py [--reps 5]

Prints per-op timings for both backends at the four conv shapes the
training loops actually hit, plus the pooling ops, and verifies the
backends agree numerically while at it.
"""

import argparse
import time

import numpy as np

from nsb import kernels
from nsb.kernels import ops_np
from nsb.rng import DeterministicRng

CONV_CASES = [
    ("classifier conv1 128x128x1 -> 20", (16, 128, 128, 1), 20),
    ("classifier conv2 63x63x20 -> 10", (16, 63, 63, 20), 10),
    ("detector conv1 130x130x1 -> 16", (16, 130, 130, 1), 16),
    ("detector conv2 66x66x16 -> 32", (16, 66, 66, 16), 32),
]


def best_of(f, *args, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        f(*args)
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=5)
    args = parser.parse_args()

    if not kernels.HAVE_COMPILED:
        print("compiled backend not built; benchmarking numpy only")
        backends = [("numpy", ops_np)]
    else:
        from nsb.kernels import _opscy

        backends = [("numpy", ops_np), ("cython", _opscy)]
        print(f"default backend at import: {kernels.BACKEND}")

    rng = DeterministicRng(0)
    totals = {name: 0.0 for name, _ in backends}
    header = f"{'case':38s}" + "".join(f"{name + ' fwd':>12s}{name + ' bwd':>12s}" for name, _ in backends)
    print(header)
    for case, xshape, co in CONV_CASES:
        x = rng.normal(int(np.prod(xshape))).reshape(xshape)
        w = rng.normal(co * 9 * xshape[3]).reshape(co, 3, 3, xshape[3])
        b = rng.normal(co)
        y_ref = None
        row = f"{case:38s}"
        for name, backend in backends:
            y = backend.conv2d_fwd(x, w, b)
            if y_ref is None:
                y_ref = y
                dy = rng.normal(y.size).reshape(y.shape)
            else:
                assert np.allclose(y, y_ref, rtol=1e-12, atol=1e-12), case
            fwd = best_of(backend.conv2d_fwd, x, w, b, reps=args.reps)
            bwd = best_of(
                backend.conv2d_bwd_input, dy, w, xshape[1], xshape[2], reps=args.reps
            ) + best_of(backend.conv2d_bwd_weights, x, dy, reps=args.reps)
            row += f"{fwd:10.1f}ms{bwd:10.1f}ms"
            totals[name] += fwd + bwd
        print(row)

    x = rng.normal(16 * 64 * 64 * 20).reshape(16, 64, 64, 20)
    row = f"{'maxpool 2x2 64x64x20':38s}"
    for name, backend in backends:
        pooled, idx = backend.maxpool2x2_fwd(x)
        dy = rng.normal(pooled.size).reshape(pooled.shape)
        fwd = best_of(backend.maxpool2x2_fwd, x, reps=args.reps)
        bwd = best_of(backend.maxpool2x2_bwd, dy, idx, 64, 64, reps=args.reps)
        row += f"{fwd:10.1f}ms{bwd:10.1f}ms"
        totals[name] += fwd + bwd
    print(row)

    print()
    for name, total in totals.items():
        print(f"{name} total: {total:.0f} ms")


if __name__ == "__main__":
    main()

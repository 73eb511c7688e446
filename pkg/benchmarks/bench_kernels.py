"""Time the numba kernels against their pure-numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--points 4096]

Each kernel is called once before timing so JIT compilation is excluded.
Outputs are compared for agreement as a side effect.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from eaw import _kernels as K


def _best(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _metric_batch(points: int, rng):
    """Random symmetric Lorentzian metrics with random derivative data."""
    n = 4
    base = np.diag([1.0, -1.0, -1.0, -1.0])
    g = base + 0.05 * rng.standard_normal((points, n, n))
    g = 0.5 * (g + g.transpose(0, 2, 1))
    dg = rng.standard_normal((points, n, n, n))
    dg = 0.5 * (dg + dg.transpose(0, 1, 3, 2))
    ddg = rng.standard_normal((points, n, n, n, n))
    ddg = 0.5 * (ddg + ddg.transpose(0, 2, 1, 3, 4))
    ddg = 0.5 * (ddg + ddg.transpose(0, 1, 2, 4, 3))
    return g, dg, ddg


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--q", type=int, default=10)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)

    g, dg, ddg = _metric_batch(args.points, rng)
    sign, mask = K.grassmann_tables_numpy(args.q)
    x = rng.integers(-3, 4, 1 << args.q).astype(np.float64)
    y = rng.integers(-3, 4, 1 << args.q).astype(np.float64)

    cases = [
        ("curvature", K.curvature_numba, K.curvature_numpy, (g, dg, ddg)),
        (f"grassmann_tables q={args.q}", K.grassmann_tables_numba, K.grassmann_tables_numpy, (args.q,)),
        (f"central_flags q={args.q}", K.central_flags_numba, K.central_flags_numpy, (args.q,)),
        (f"grassmann_mul_dense q={args.q}", K.grassmann_mul_dense_numba, K.grassmann_mul_dense_numpy,
         (x, y, sign, mask)),
    ]
    print(f"numba enabled by default: {K.NUMBA_ENABLED}")
    print(f"{'kernel':<28} {'numba [ms]':>11} {'numpy [ms]':>11} {'speedup':>8}  agree")
    for name, fast, slow, fargs in cases:
        tf, of = _best(fast, fargs, args.repeat)
        ts, os_ = _best(slow, fargs, args.repeat)
        of = of if isinstance(of, tuple) else (of,)
        os_ = os_ if isinstance(os_, tuple) else (os_,)
        agree = all(np.allclose(p, q, rtol=1e-9, atol=1e-9) for p, q in zip(of, os_))
        print(f"{name:<28} {tf * 1e3:>11.3f} {ts * 1e3:>11.3f} {ts / tf:>7.1f}x  {agree}")


if __name__ == "__main__":
    main()

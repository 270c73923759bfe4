"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 5]
"""

import argparse
import math
import timeit

import numpy as np

from meanfield import _kernels_py
from meanfield.diagnostics import ball_offsets
from meanfield.manifold import TorusGrid

try:
    from meanfield import _kernels as _compiled
except ImportError:
    _compiled = None


def _cases(n, rng):
    grid = TorusGrid(2 * math.pi, n)
    rho = 1.0 + 0.5 * rng.random((n, n))
    v = rng.standard_normal((n, n))
    w = np.exp(v - v.max())
    offsets = ball_offsets(grid, grid.L / 8)
    return {
        "weighted_laplacian": lambda m: m.weighted_laplacian(rho, v, grid.h),
        "dirichlet_energy": lambda m: m.dirichlet_energy(rho, v),
        "ball_sums(L/8)": lambda m: m.ball_sums(w, offsets),
    }


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = [("python", _kernels_py)] + ([("cython", _compiled)] if _compiled is not None else [])
    if _compiled is None:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'kernel':<20} {'N':>5} " + " ".join(f"{name + ' [ms]':>14}" for name, _ in backends) + "  speedup")
    for n in args.sizes:
        for name, call in _cases(n, rng).items():
            times = [best_time(lambda m=mod: call(m), args.repeat) for _, mod in backends]
            speed = f"{times[0] / times[1]:7.1f}x" if len(times) == 2 else ""
            print(f"{name:<20} {n:>5} " + " ".join(f"{1e3 * t:14.4f}" for t in times) + "  " + speed)


if __name__ == "__main__":
    main()

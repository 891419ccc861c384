"""Compiled kernels against the numpy fallback on the pair loops.

    python3 benchmarks/bench_kernels.py --h 0.001 0.0005 --repeat 3
"""

import argparse
import os
import timeit

import numpy as np

from pdfem import _pykernels
from pdfem.kernel import NonlocalContext
from pdfem.material import plexiglass
from pdfem.mesh import build_uniform_mesh

try:
    from pdfem import _ckernels
except ImportError:
    _ckernels = None


def bench(mod, ctx, u, repeat, workers):
    t = ctx.table
    m = ctx.material
    f, g = m.pairwise, m.hydrostatic
    pos, w, om, pi, pj, intact = t.positions, t.weights, t.omega, t.pi, t.pj, t.intact
    eps = m.horizon
    theta = mod.hydrostatic(pos, u, w, om, pi, pj, intact, eps, 0, workers)
    calls = {
        "pairs": lambda: mod.build_pairs(pos, eps),
        "theta": lambda: mod.hydrostatic(pos, u, w, om, pi, pj, intact, eps, 0, workers),
        "force": lambda: mod.force(pos, u, theta, w, om, pi, pj, intact, eps, 0, f.c, f.beta, 0, g.Cbar, 0.0, 0,
                                   f.d2f0, g.d2g0, workers),
    }
    return {k: min(timeit.repeat(fn, number=1, repeat=repeat)) for k, fn in calls.items()}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=float, default=0.05, help="square side [m]")
    p.add_argument("--h", type=float, nargs="+", default=[0.002, 0.001])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = p.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'h [m]':>8} {'points':>8} {'pairs':>10} {'kernel':>6} {'numpy [s]':>10} {'compiled [s]':>12} "
          f"{'speedup':>8}")
    for h in args.h:
        ctx = NonlocalContext(build_uniform_mesh(args.size, args.size, h), plexiglass(0.004))
        u = rng.standard_normal((len(ctx.quad), 2)) * 1e-6
        py = bench(_pykernels, ctx, u, args.repeat, 1)
        cy = bench(_ckernels, ctx, u, args.repeat, args.workers) if _ckernels else {}
        for k in py:
            c = cy.get(k, float("nan"))
            print(f"{h:8.4g} {len(ctx.quad):8d} {ctx.table.num_pairs:10d} {k:>6} {py[k]:10.3f} {c:12.3f} "
                  f"{py[k] / c:8.1f}")


if __name__ == "__main__":
    main()

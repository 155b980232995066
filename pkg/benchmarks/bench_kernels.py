"""Time the numba kernels against the numpy reference path.

    python benchmarks/bench_kernels.py [--grid 1025] [--steps 200000] [--repeat 5]

Both paths are called directly, so the IFSTHERMO_NUMBA flag does not matter here.
Each timing is the best of ``--repeat`` runs after one warm-up call.
"""

import argparse
import time

import numpy as np

from ifsthermo import _kernels as K
from ifsthermo.config import load_config


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=1025)
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--fixture", default="sierpinski_exp")
    args = ap.parse_args(argv)
    if K.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    ifs = load_config(f"fixture:{args.fixture}").build(args.grid)
    rng = np.random.default_rng(0)
    rows = []

    q = np.ascontiguousarray(ifs.node_weights, dtype=float)
    idx, wts = ifs.stencils
    f = rng.random(ifs.grid.size)
    tn, a = best_of(lambda: K.transfer_gather_numpy(q, idx, wts, f), args.repeat)
    tj, b = best_of(lambda: K.transfer_gather_numba(q, idx, wts, f), args.repeat)
    rows.append(("transfer gather", tn, tj, float(np.max(np.abs(a - b)))))

    npart = args.steps
    pts = rng.random((npart, ifs.dim))
    w = rng.random(npart)
    cells = rng.integers(0, ifs.grid.size, npart)
    tn, a = best_of(lambda: K.bin_particles_numpy(cells, pts, w, ifs.grid.size), args.repeat)
    tj, b = best_of(lambda: K.bin_particles_numba(cells, pts, w, ifs.grid.size), args.repeat)
    rows.append(("particle binning", tn, tj, float(max(np.max(np.abs(a[0] - b[0])), np.max(np.abs(a[1] - b[1]))))))

    src = ifs.map_sources()
    x0 = np.full(ifs.dim, 0.5)
    u = rng.random(args.steps)
    pvals = q / q.sum(axis=0)
    step_py = K.compile_step(src, ifs.dim, jit=False)
    step_nb = K.compile_step(src, ifs.dim, jit=True)
    tn, a = best_of(lambda: K.chaos_game_numpy(step_py, x0, u, pvals, ifs.grid.m), 1)
    tj, b = best_of(lambda: K.chaos_game_numba(step_nb, x0, u, pvals, ifs.grid.m), args.repeat)
    rows.append(("chaos game", tn, tj, float(np.max(np.abs(a[0] - b[0])))))

    print(f"fixture {args.fixture}, dim {ifs.dim}, grid {ifs.grid.m} ({ifs.grid.size} nodes), "
          f"{args.steps} particles/steps, numba threads {K.numba.get_num_threads()}")
    print(f"{'kernel':<18}{'numpy s':>12}{'numba s':>12}{'speedup':>10}{'max diff':>12}")
    for name, tn, tj, diff in rows:
        print(f"{name:<18}{tn:>12.4f}{tj:>12.4f}{tn / tj:>9.1f}x{diff:>12.1e}")


if __name__ == "__main__":
    main()

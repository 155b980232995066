"""Hot loops, compiled with numba when available.

Set ``IFSTHERMO_NUMBA=0`` to force the pure-numpy implementations (they are
always importable as ``*_numpy`` for benchmarking and cross-checks).
"""

from __future__ import annotations

import math
import os

import numpy as np

def _has_omp() -> bool:
    try:
        from numba.np.ufunc import omppool  # noqa: F401
    except ImportError:
        return False
    return True


try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

if numba is not None and "NUMBA_THREADING_LAYER" not in os.environ:
    # skip the TBB probe, which warns on older TBB installs
    numba.config.THREADING_LAYER = "omp" if _has_omp() else "workqueue"

USE_NUMBA = numba is not None and os.environ.get("IFSTHERMO_NUMBA", "1").lower() not in ("0", "false", "no", "off")


def _njit(fn, parallel=False):
    if numba is None:
        return fn
    return numba.njit(cache=True, parallel=parallel)(fn)


_prange = numba.prange if numba is not None else range


def set_threads(n: int | None) -> None:
    """Cap the numba worker pool (no-op on the numpy path)."""
    if n is not None and USE_NUMBA:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


# transfer operator gather: out[x] = sum_i q[i, x] * sum_c wts[i, x, c] * f[idx[i, x, c]]

def transfer_gather_numpy(q, idx, wts, f):
    return np.einsum("ix,ixc->x", q, wts * f[idx])


def _transfer_gather(q, idx, wts, f):
    n, size, k = idx.shape
    out = np.zeros(size)
    for x in _prange(size):
        acc = 0.0
        for i in range(n):
            s = 0.0
            for c in range(k):
                s += wts[i, x, c] * f[idx[i, x, c]]
            acc += q[i, x] * s
        out[x] = acc
    return out


transfer_gather_numba = _njit(_transfer_gather, parallel=True)


# particle compaction: sum weights and weighted positions per cell

def bin_particles_numpy(cells, points, weights, ncells):
    mass = np.bincount(cells, weights=weights, minlength=ncells)
    first = np.empty((ncells, points.shape[1]))
    for k in range(points.shape[1]):
        first[:, k] = np.bincount(cells, weights=weights * points[:, k], minlength=ncells)
    return mass, first


def _bin_particles(cells, points, weights, ncells):
    d = points.shape[1]
    mass = np.zeros(ncells)
    first = np.zeros((ncells, d))
    for j in range(cells.shape[0]):
        c = cells[j]
        w = weights[j]
        mass[c] += w
        for k in range(d):
            first[c, k] += w * points[j, k]
    return mass, first


bin_particles_numba = _njit(_bin_particles)


# chaos game with place-dependent probabilities read off a grid

def _interp_probs(pvals, m, x, probs):
    # multilinear interpolation of every row of pvals at the point x (d = 1 or 2)
    d = x.shape[0]
    n = pvals.shape[0]
    t0 = min(max(x[0], 0.0), 1.0) * (m - 1)
    b0 = min(int(math.floor(t0)), m - 2)
    f0 = t0 - b0
    if d == 1:
        for i in range(n):
            probs[i] = (1.0 - f0) * pvals[i, b0] + f0 * pvals[i, b0 + 1]
    else:
        t1 = min(max(x[1], 0.0), 1.0) * (m - 1)
        b1 = min(int(math.floor(t1)), m - 2)
        f1 = t1 - b1
        k00 = b0 * m + b1
        k10 = (b0 + 1) * m + b1
        for i in range(n):
            probs[i] = ((1.0 - f0) * ((1.0 - f1) * pvals[i, k00] + f1 * pvals[i, k00 + 1])
                        + f0 * ((1.0 - f1) * pvals[i, k10] + f1 * pvals[i, k10 + 1]))


def _choose(probs, u):
    total = 0.0
    for i in range(probs.shape[0]):
        total += probs[i]
    acc = 0.0
    target = u * total
    last = 0
    for i in range(probs.shape[0]):
        if probs[i] > 0.0:
            last = i
            acc += probs[i]
            if target < acc:
                return i
    return last


def chaos_game_numpy(step, x0, u, pvals, m):
    """Reference loop; ``step(i, x, out)`` writes tau_i(x) into ``out``."""
    N = u.shape[0]
    d = x0.shape[0]
    pts = np.empty((N + 1, d))
    idx = np.empty(N, dtype=np.int64)
    probs = np.empty(pvals.shape[0])
    pts[0] = x0
    x = x0.copy()
    nxt = np.empty(d)
    for j in range(N):
        _interp_probs(pvals, m, x, probs)
        i = _choose(probs, u[j])
        step(i, x, nxt)
        idx[j] = i
        x[:] = nxt
        pts[j + 1] = x
    return pts, idx


if numba is not None:
    _interp_probs_nb = numba.njit(cache=True)(_interp_probs)
    _choose_nb = numba.njit(cache=True)(_choose)

    @numba.njit
    def chaos_game_numba(step, x0, u, pvals, m):
        N = u.shape[0]
        d = x0.shape[0]
        pts = np.empty((N + 1, d))
        idx = np.empty(N, dtype=np.int64)
        probs = np.empty(pvals.shape[0])
        pts[0] = x0
        x = x0.copy()
        nxt = np.empty(d)
        for j in range(N):
            _interp_probs_nb(pvals, m, x, probs)
            i = _choose_nb(probs, u[j])
            step(i, x, nxt)
            idx[j] = i
            for k in range(d):
                x[k] = nxt[k]
                pts[j + 1, k] = nxt[k]
        return pts, idx
else:  # pragma: no cover
    chaos_game_numba = None


_STEP_CACHE: dict = {}


def compile_step(map_sources, dim: int, jit: bool):
    """Build ``step(i, x, out)`` from per-map component sources (see ``expr.to_python``)."""
    key = (tuple(tuple(s) for s in map_sources), dim, jit)
    if key in _STEP_CACHE:
        return _STEP_CACHE[key]
    lines = ["def step(i, x, out):"]
    for k in range(dim):
        lines.append(f"    x{k + 1} = x[{k}]")
    for i, comps in enumerate(map_sources):
        kw = "if" if i == 0 else "elif"
        lines.append(f"    {kw} i == {i}:")
        for k, src in enumerate(comps):
            lines.append(f"        out[{k}] = {src}")
    namespace = {"math": math}
    exec("\n".join(lines), namespace)
    fn = namespace["step"]
    if jit:
        fn = numba.njit(fn)
    _STEP_CACHE[key] = fn
    return fn


transfer_gather = transfer_gather_numba if USE_NUMBA else transfer_gather_numpy
bin_particles = bin_particles_numba if USE_NUMBA else bin_particles_numpy


def chaos_game(map_sources, x0, u, pvals, m):
    dim = x0.shape[0]
    if USE_NUMBA:
        step = compile_step(map_sources, dim, jit=True)
        return chaos_game_numba(step, x0, u, pvals, m)
    step = compile_step(map_sources, dim, jit=False)
    return chaos_game_numpy(step, x0, u, pvals, m)

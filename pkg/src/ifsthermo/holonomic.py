"""Measures on Omega = X x {0..n-1}: holonomy, disintegration and entropies."""

from __future__ import annotations

import csv
import warnings
from functools import cached_property

import numpy as np

from .grid import Grid
from .ifs import MapSystem, NormalizedIFS
from .markov import Orbit, ParticleMeasure, dictionary_residual, sup_over_grid, test_dictionary

__all__ = [
    "HolonomicMeasure", "Disintegration", "discrete_differential", "empirical_holonomic",
    "holonomy_defect", "holonomic_lift", "average_entropy", "variational_entropy_upper",
    "entropy_interval", "shannon", "cross_entropy",
]


class Disintegration:
    """Cell-binned disintegration: marginal cell masses and conditional index laws."""

    def __init__(self, cells, mass, conditional, centroids, resolution):
        self.cells = cells
        self.mass = mass
        self.conditional = conditional
        self.centroids = centroids
        self.resolution = resolution

    def to_csv(self, path, grid: Grid) -> None:
        r = self.resolution
        n = self.conditional.shape[1]
        coords = []
        for c in self.cells:
            ks = []
            for _ in range(grid.dim):
                ks.append(c % r)
                c //= r
            coords.append([k / (r - 1) for k in reversed(ks)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"cell_x{k + 1}" for k in range(grid.dim)] + ["mass"] + [f"nu_{i}" for i in range(n)])
            for xy, m, row in zip(coords, self.mass, self.conditional):
                w.writerow([repr(float(v)) for v in xy] + [repr(float(m))] + [repr(float(v)) for v in row])


class HolonomicMeasure:
    """Weighted atoms ``((x_k, i_k), w_k)`` on Omega for the maps of ``system``.

    The disintegration is computed lazily by binning atoms into the
    node-centred cells of a ``resolution``-point grid: ``nu_x(i)`` is the
    ``(cell, i)`` mass over the cell mass. Empty cells carry no conditional.
    """

    def __init__(self, system: MapSystem, points, indices, weights, resolution: int | None = None):
        pts = np.array(points, dtype=float).reshape(-1, system.dim)
        idx = np.array(indices, dtype=np.int64).ravel()
        w = np.array(weights, dtype=float).ravel()
        if not (pts.shape[0] == idx.shape[0] == w.shape[0]):
            raise ValueError("points, indices and weights differ in length")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if idx.size and (idx.min() < 0 or idx.max() >= system.n):
            raise ValueError(f"indices must lie in 0..{system.n - 1}")
        self.system = system
        self.points = pts
        self.indices = idx
        self.weights = w
        self.resolution = system.grid.m if resolution is None else int(resolution)

    def __len__(self):
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, fn) -> float:
        """``int fn(x, i) dmu_hat`` for ``fn(points, indices) -> values``."""
        return float(np.dot(self.weights, fn(self.points, self.indices)))

    def marginal(self) -> ParticleMeasure:
        """Projection to X (atoms keep their positions)."""
        return ParticleMeasure(self.points, self.weights)

    @cached_property
    def disintegration(self) -> Disintegration:
        grid = self.system.grid
        r = self.resolution
        cells = grid.cell_index(self.points, r)
        ncells = r ** grid.dim
        joint = np.zeros((ncells, self.n))
        np.add.at(joint, (cells, self.indices), self.weights)
        mass = joint.sum(axis=1)
        keep = np.nonzero(mass > 0)[0]
        first = np.stack([np.bincount(cells, self.weights * self.points[:, k], ncells)
                          for k in range(grid.dim)], axis=1)
        cond = joint[keep] / mass[keep, None]
        return Disintegration(keep, mass[keep], cond, first[keep] / mass[keep, None], r)

    def cell_marginal(self) -> ParticleMeasure:
        d = self.disintegration
        return ParticleMeasure(d.centroids, d.mass)


def discrete_differential(system: MapSystem, f):
    """``(x, i) -> f(tau_i x) - f(x)`` as a function of ``(points, indices)``."""

    def df(points, indices):
        pts = np.asarray(points, dtype=float).reshape(-1, system.dim)
        idx = np.asarray(indices, dtype=np.int64).ravel()
        out = np.empty(pts.shape[0])
        base = np.asarray(f(pts), dtype=float)
        for i in range(system.n):
            sel = idx == i
            if np.any(sel):
                out[sel] = np.asarray(f(system.image(pts[sel], i)), dtype=float) - base[sel]
        return out

    return df


def empirical_holonomic(orbit: Orbit, system: MapSystem, resolution: int | None = None) -> HolonomicMeasure:
    """``(1/N) sum_j delta_{(x_j, i_j)}`` along a chaos-game orbit."""
    N = len(orbit)
    if N < 1:
        raise ValueError("orbit is empty")
    return HolonomicMeasure(system, orbit.points[:-1], orbit.indices, np.full(N, 1.0 / N), resolution)


def holonomy_defect(mu_hat: HolonomicMeasure, dictionary: dict | None = None) -> float:
    """``max_f |int d_x f dmu_hat| / ||f||``; zero for holonomic measures."""
    dictionary = dictionary or test_dictionary(mu_hat.system.dim)
    worst = 0.0
    for f in dictionary.values():
        val = mu_hat.integrate(discrete_differential(mu_hat.system, f))
        worst = max(worst, abs(val) / sup_over_grid(f, mu_hat.system.grid))
    return worst


def holonomic_lift(nifs: NormalizedIFS, mu: ParticleMeasure, check_tol: float = 1e-3,
                   resolution: int | None = None) -> HolonomicMeasure:
    """Atoms ``((x, i), w p_i(x))`` for each particle ``(x, w)`` of a fixed measure of ``L_p``."""
    res = dictionary_residual(nifs, mu, 1.0)
    if res > check_tol:
        warnings.warn(f"measure is not a fixed point of L_p (residual {res:.3g})", RuntimeWarning, stacklevel=2)
    p = nifs.weights_at(mu.points)  # (n, K)
    n, K = p.shape
    pts = np.tile(mu.points, (n, 1))
    idx = np.repeat(np.arange(n), K)
    w = (p * mu.weights).ravel()
    return HolonomicMeasure(nifs, pts, idx, w, resolution)


def shannon(a) -> np.ndarray:
    """``-sum_i a_i ln a_i`` along the last axis, with ``0 ln 0 = 0``."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def cross_entropy(a, b) -> np.ndarray:
    """``-sum_i a_i ln b_i`` along the last axis (terms with ``a_i = 0`` dropped)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(a > 0, a * np.log(np.where(a > 0, b, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def average_entropy(mu_hat: HolonomicMeasure) -> float:
    """``-int sum_i nu_x(i) ln nu_x(i) dnu`` over the binned disintegration."""
    d = mu_hat.disintegration
    return float(np.dot(d.mass, shannon(d.conditional)) / d.mass.sum())


def variational_entropy_upper(mu_hat: HolonomicMeasure, dictionary) -> float:
    """``min_g int ln(B_1 g / g) dnu`` over positive test functions: an upper bound for ``h_v``.

    ``dictionary`` is a mapping or sequence of callables on ``(N, d)`` points.
    """
    funcs = list(dictionary.values()) if isinstance(dictionary, dict) else list(dictionary)
    if not funcs:
        raise ValueError("dictionary is empty")
    system = mu_hat.system
    nodes = system.grid.nodes
    pts, w = mu_hat.points, mu_hat.weights
    imgs = system.images(pts)
    total = w.sum()
    best = np.inf
    for g in funcs:
        if np.any(np.asarray(g(nodes)) <= 0):
            raise ValueError("test functions must be positive on the grid nodes")
        gx = np.asarray(g(pts), dtype=float)
        b1 = sum(np.asarray(g(imgs[i]), dtype=float) for i in range(system.n))
        if np.any(gx <= 0) or np.any(b1 <= 0):
            raise ValueError("test function is not positive on the support")
        best = min(best, float(np.dot(w, np.log(b1 / gx)) / total))
    return best


def entropy_interval(mu_hat: HolonomicMeasure, dictionary) -> tuple:
    """``(h_a, dictionary upper bound)``, the reported enclosure of ``h_v``."""
    return average_entropy(mu_hat), variational_entropy_upper(mu_hat, dictionary)

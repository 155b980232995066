"""Markov operator on particle measures, eigenmeasures and the chaos game."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from . import expr as E
from .grid import Grid, GridFunction
from .ifs import MapSystem, NormalizedIFS

__all__ = [
    "ParticleMeasure", "EigenMeasure", "Orbit", "markov_apply", "compact",
    "eigen_measure", "hutchinson_fixed_point", "chaos_game", "test_dictionary",
    "dictionary_residual", "sup_over_grid",
]


class ParticleMeasure:
    """Finite non-negative measure ``sum_k w_k delta_{x_k}`` on [0,1]^d."""

    __slots__ = ("points", "weights")

    def __init__(self, points, weights):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.array(weights, dtype=float).ravel()
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w

    @classmethod
    def uniform_on_nodes(cls, grid: Grid) -> "ParticleMeasure":
        return cls(grid.nodes, np.full(grid.size, 1.0 / grid.size))

    @classmethod
    def dirac(cls, point) -> "ParticleMeasure":
        return cls(np.atleast_1d(np.asarray(point, dtype=float))[None, :], [1.0])

    def __len__(self):
        return self.weights.shape[0]

    def __repr__(self):
        return f"ParticleMeasure({len(self)} particles, mass={self.mass:.6g})"

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def normalized(self) -> "ParticleMeasure":
        m = self.mass
        if m <= 0:
            raise ValueError("cannot normalize a zero measure")
        return ParticleMeasure(self.points, self.weights / m)

    def integrate(self, f) -> float:
        """``int f dmu`` for a callable on ``(N, d)`` points (Expr, GridFunction, function)."""
        return float(np.dot(self.weights, np.asarray(f(self.points), dtype=float)))

    def moment(self, k: int, axis: int = 0) -> float:
        return float(np.dot(self.weights, self.points[:, axis] ** k)) / self.mass

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{k + 1}" for k in range(self.dim)] + ["weight"])
            for p, wt in zip(self.points, self.weights):
                w.writerow([repr(float(c)) for c in p] + [repr(float(wt))])


def compact(mu: ParticleMeasure, grid: Grid, resolution: int | None = None) -> ParticleMeasure:
    """Merge particles per node-centred cell; each cell keeps its mass at its centroid."""
    r = grid.m if resolution is None else int(resolution)
    if len(mu) == 0:
        return mu
    cells = grid.cell_index(mu.points, r)
    ncells = r ** grid.dim
    mass, first = _kernels.bin_particles(cells, np.ascontiguousarray(mu.points), mu.weights, ncells)
    keep = mass > 0
    pts = first[keep] / mass[keep, None]
    return ParticleMeasure(np.clip(pts, 0.0, 1.0), mass[keep])


def markov_apply(ifs, mu: ParticleMeasure, compaction: bool = True,
                 resolution: int | None = None) -> ParticleMeasure:
    """``L_q mu = sum_i (tau_i)_*(q_i mu)``: each particle spawns ``n`` weighted images."""
    q = ifs.weights_at(mu.points)  # (n, K)
    imgs = ifs.images(mu.points)   # (n, K, d)
    w = (q * mu.weights).ravel()
    out = ParticleMeasure(np.clip(imgs.reshape(-1, ifs.dim), 0.0, 1.0), np.maximum(w, 0.0))
    if compaction:
        out = compact(out, ifs.grid, resolution)
    return out


def test_dictionary(dim: int) -> dict:
    """Fixed test functions for weak-* residuals."""
    names = ["1"]
    for k in range(1, dim + 1):
        x = f"x{k}"
        names += [x, f"{x}^2", f"sin(pi*{x})", f"cos(pi*{x})"]
    return {s: E.parse(s, dim) for s in names}


def sup_over_grid(f, grid: Grid) -> float:
    if isinstance(f, GridFunction):
        return f.sup_norm()
    return float(np.max(np.abs(f(grid.nodes))))


def _transfer_at(ifs, f, points) -> np.ndarray:
    q = ifs.weights_at(points)
    imgs = ifs.images(points)
    return sum(q[i] * f(imgs[i]) for i in range(ifs.n))


def dictionary_residual(ifs, nu: ParticleMeasure, rho: float, dictionary: dict | None = None) -> float:
    """``max_f |int B_q f dnu - rho int f dnu| / ||f||`` over the dictionary (exact in the maps)."""
    dictionary = dictionary or test_dictionary(ifs.dim)
    worst = 0.0
    for f in dictionary.values():
        lhs = float(np.dot(nu.weights, _transfer_at(ifs, f, nu.points)))
        rhs = rho * nu.integrate(f)
        worst = max(worst, abs(lhs - rhs) / sup_over_grid(f, ifs.grid))
    return worst


@dataclass
class EigenMeasure:
    measure: ParticleMeasure
    rho: float
    residual: float
    iterations: int
    converged: bool
    bounds: tuple = (float("nan"), float("nan"))
    message: str = ""
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"rho_measure": self.rho, "residual": self.residual, "iterations": self.iterations,
                "converged": self.converged, "mass_bounds": list(self.bounds),
                "particles": len(self.measure), "message": self.message}


def _mass_bounds(ifs):
    q = ifs.node_weights
    return float(ifs.n * q.min()), float(ifs.n * q.max())


def _normalized_iteration(ifs, start, tol, max_iter, resolution, dictionary):
    # Compaction can lock the iteration into a 2-cycle at the binning-error
    # level; a settled 2-cycle is replaced by the average of its two states.
    dictionary = dictionary or test_dictionary(ifs.dim)
    nu = start.normalized()
    ints = np.array([nu.integrate(f) for f in dictionary.values()])
    states = [(nu, ints, None)]
    history = []
    converged = False
    note = ""
    rho = float("nan")
    it = 0
    for it in range(1, max_iter + 1):
        pushed = markov_apply(ifs, nu, resolution=resolution)
        rho = pushed.mass
        if rho <= 0:
            note = "measure vanished"
            break
        nu = pushed.normalized()
        ints = np.array([nu.integrate(f) for f in dictionary.values()])
        prev_nu, prev_ints, prev_rho = states[-1]
        d_int = float(np.max(np.abs(ints - prev_ints)))
        d_rho = abs(rho - prev_rho) / rho if prev_rho is not None else float("inf")
        history.append({"rho": rho, "change": d_int})
        if d_int < tol and d_rho < tol:
            converged = True
            break
        if len(states) >= 2 and states[-2][2] is not None:
            _, ints2, rho2 = states[-2]
            if np.max(np.abs(ints - ints2)) < tol and abs(rho - rho2) / rho < tol:
                mix = ParticleMeasure(np.concatenate([nu.points, prev_nu.points]),
                                      0.5 * np.concatenate([nu.weights, prev_nu.weights]))
                nu = compact(mix, ifs.grid, resolution)
                rho = markov_apply(ifs, nu, compaction=False).mass
                converged = True
                note = "iteration settled into a 2-cycle of the compaction; returned its average"
                break
        states = states[-1:] + [(nu, ints, rho)]
    return nu, rho, it, converged, history, note


def eigen_measure(ifs, tol: float = 1e-10, max_iter: int = 2000, resolution: int | None = None,
                  dictionary: dict | None = None, start: ParticleMeasure | None = None) -> EigenMeasure:
    """Probability ``nu`` with ``L_q nu = rho nu`` by the normalized iteration ``nu <- L_q nu / L_q nu(X)``.

    Starts from uniform weights on the grid nodes. Stops when the mass
    multiplier and the dictionary integrals move by less than ``tol``; the
    reported residual is measured against the dictionary without compaction.
    """
    start = start or ParticleMeasure.uniform_on_nodes(ifs.grid)
    nu, rho, it, ok, hist, note = _normalized_iteration(ifs, start, tol, max_iter, resolution, dictionary)
    res = dictionary_residual(ifs, nu, rho, dictionary)
    msg = note if ok else f"normalized iteration did not settle in {max_iter} steps"
    return EigenMeasure(measure=nu, rho=rho, residual=res, iterations=it, converged=ok,
                        bounds=_mass_bounds(ifs), message=msg, history=hist)


def hutchinson_fixed_point(nifs: NormalizedIFS, tol: float = 1e-10, max_iter: int = 2000,
                           resolution: int | None = None, start: ParticleMeasure | None = None,
                           dictionary: dict | None = None, residual_tol: float = 1e-4) -> EigenMeasure:
    """Fixed probability measure of ``L_p`` for a normalized system.

    Same iteration as :func:`eigen_measure` (mass is renormalized, which only
    absorbs rounding for exactly normalized weights). ``converged`` also
    requires the dictionary residual ``|int B_p f dmu - int f dmu|`` to be
    below ``residual_tol``.
    """
    start = start or ParticleMeasure.uniform_on_nodes(nifs.grid)
    nu, rho, it, ok, hist, note = _normalized_iteration(nifs, start, tol, max_iter, resolution, dictionary)
    res = dictionary_residual(nifs, nu, 1.0, dictionary)
    converged = ok and res < residual_tol
    msg = note if converged else (f"residual {res:.3g} above {residual_tol:g}" if ok
                                  else f"iteration did not settle in {max_iter} steps")
    return EigenMeasure(measure=nu, rho=rho, residual=res, iterations=it, converged=converged,
                        bounds=_mass_bounds(nifs), message=msg, history=hist)


@dataclass
class Orbit:
    """``points[j]`` is ``x_j`` for ``j = 0..N`` and ``indices[j]`` the map applied to it."""

    points: np.ndarray
    indices: np.ndarray
    seed: int | None = None

    def __len__(self):
        return self.indices.shape[0]

    def empirical(self) -> ParticleMeasure:
        n = len(self)
        return ParticleMeasure(self.points[:-1], np.full(n, 1.0 / n))

    def to_csv(self, path) -> None:
        d = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "i"] + [f"x{k + 1}" for k in range(d)])
            for j in range(len(self)):
                w.writerow([j, int(self.indices[j])] + [repr(float(c)) for c in self.points[j]])


def chaos_game(nifs: NormalizedIFS, x0, N: int, seed: int = 42) -> Orbit:
    """Random orbit ``x_{j+1} = tau_{i_j}(x_j)``, ``i_j`` drawn with probabilities ``p_i(x_j)``.

    Indices are drawn by inverse transform from ``numpy.random.default_rng(seed)``
    uniforms, so a fixed seed reproduces the orbit exactly.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if x.shape != (nifs.dim,):
        raise ValueError(f"x0 must have {nifs.dim} coordinates")
    u = np.random.default_rng(seed).random(N)
    pvals = np.ascontiguousarray(nifs.node_weights)
    pts, idx = _kernels.chaos_game(nifs.map_sources(), x, u, pvals, nifs.grid.m)
    if not np.all(np.isfinite(pts)):
        raise FloatingPointError("orbit left the domain of a map expression")
    return Orbit(points=pts, indices=idx, seed=seed)

"""Uniform grids on [0,1]^d and grid functions with multilinear interpolation."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid", "GridFunction", "GridDomainError", "CLAMP_TOL"]

CLAMP_TOL = 1e-12


class GridDomainError(ValueError):
    """A point lies outside [0,1]^d by more than the clamping tolerance."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``m`` points per axis on ``[0,1]^dim``.

    Nodes are stored flat in C order: node ``(k1, ..., kd)`` has flat index
    ``k1*m^(d-1) + ... + kd`` and coordinates ``(k1/(m-1), ..., kd/(m-1))``.
    """

    dim: int
    m: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dim}")
        if self.m < 2:
            raise ValueError(f"need at least 2 points per axis, got {self.m}")

    @property
    def size(self) -> int:
        return self.m ** self.dim

    @property
    def spacing(self) -> float:
        return 1.0 / (self.m - 1)

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(self.m) / (self.m - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(m^d, d)``."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        out = np.stack([c.ravel() for c in mesh], axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def quadrature_weights(self) -> np.ndarray:
        """Tensor trapezoid weights (bilinear cell rule in 2-D)."""
        w = np.full(self.m, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        out = w
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, w)
        out = out.ravel()
        out.setflags(write=False)
        return out

    def function(self, values) -> "GridFunction":
        return GridFunction(self, values)

    def constant(self, c: float) -> "GridFunction":
        return GridFunction(self, np.full(self.size, float(c)))

    def sample(self, f) -> "GridFunction":
        """Grid function of node values of a callable taking ``(N, d)`` points."""
        return GridFunction(self, np.asarray(f(self.nodes), dtype=float))

    def _checked(self, points, tol):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None] if self.dim == 1 else pts[None, :]
        if pts.shape[-1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates, got shape {pts.shape}")
        lo, hi = pts.min(initial=0.0), pts.max(initial=1.0)
        if lo < -tol or hi > 1 + tol or not np.all(np.isfinite(pts)):
            bad = pts[np.any((pts < -tol) | (pts > 1 + tol) | ~np.isfinite(pts), axis=1)][0]
            raise GridDomainError(f"point {bad.tolist()} outside [0,1]^{self.dim} (tolerance {tol:g})")
        return np.clip(pts, 0.0, 1.0)

    def stencil(self, points, tol: float = CLAMP_TOL):
        """Multilinear interpolation stencil.

        Returns ``(index, weight)`` arrays of shape ``(N, 2^d)`` such that
        ``f(points) = sum(weight * values[index], axis=1)``.
        """
        pts = self._checked(points, tol)
        t = pts * (self.m - 1)
        base = np.minimum(np.floor(t).astype(np.int64), self.m - 2)
        frac = t - base
        corners = list(itertools.product((0, 1), repeat=self.dim))
        idx = np.zeros((pts.shape[0], len(corners)), dtype=np.int64)
        wts = np.ones((pts.shape[0], len(corners)))
        for c, offs in enumerate(corners):
            flat = np.zeros(pts.shape[0], dtype=np.int64)
            for k, o in enumerate(offs):
                flat = flat * self.m + base[:, k] + o
                wts[:, c] *= frac[:, k] if o else 1.0 - frac[:, k]
            idx[:, c] = flat
        return idx, wts

    def cell_index(self, points, resolution: int | None = None) -> np.ndarray:
        """Flat index of the node-centred cell containing each point.

        Cells are the Voronoi cells of the nodes of a ``resolution``-point
        grid (default: this grid), so a particle sitting on a node never
        changes cell under rounding noise.
        """
        r = self.m if resolution is None else int(resolution)
        pts = self._checked(points, 1e-9)
        k = np.clip(np.rint(pts * (r - 1)).astype(np.int64), 0, r - 1)
        flat = np.zeros(pts.shape[0], dtype=np.int64)
        for j in range(self.dim):
            flat = flat * r + k[:, j]
        return flat


class GridFunction:
    """Real function on a :class:`Grid`, read off-node by multilinear interpolation.

    Values are copied and frozen on construction.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        v = np.array(values, dtype=float).ravel()
        if v.shape != (grid.size,):
            raise ValueError(f"expected {grid.size} node values, got {v.size}")
        v.setflags(write=False)
        self.grid = grid
        self.values = v

    def __repr__(self):
        return f"GridFunction(dim={self.grid.dim}, m={self.grid.m})"

    def __call__(self, points) -> np.ndarray:
        return self.interp(points)

    def interp(self, points, tol: float = CLAMP_TOL) -> np.ndarray:
        idx, wts = self.grid.stencil(points, tol)
        return np.sum(wts * self.values[idx], axis=1)

    def at(self, point) -> float:
        return float(self.interp(np.atleast_1d(np.asarray(point, dtype=float))[None, :])[0])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def min_value(self) -> float:
        return float(np.min(self.values))

    def max_value(self) -> float:
        return float(np.max(self.values))

    def integrate_lebesgue(self) -> float:
        return float(np.dot(self.grid.quadrature_weights, self.values))

    def map(self, fn) -> "GridFunction":
        return GridFunction(self.grid, fn(self.values))

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * _vals(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / _vals(other))

    def to_csv(self, path, column: str = "value") -> None:
        write_csv(path, self.grid, {column: self.values})


def _vals(other):
    return other.values if isinstance(other, GridFunction) else other


def write_csv(path, grid: Grid, columns: dict) -> None:
    """Node table: ``x1[,x2]`` followed by the given columns."""
    header = [f"x{k + 1}" for k in range(grid.dim)] + list(columns)
    cols = [grid.nodes[:, k] for k in range(grid.dim)] + [np.asarray(v) for v in columns.values()]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])

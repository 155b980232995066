"""Weighted iterated function systems on [0,1]^d.

A system is ``n`` maps ``tau_i`` (one expression per coordinate) plus one
weight per map. Three flavours share the map machinery:

* :class:`WeightedIFS` with expression weights ``q_i``;
* :class:`PotentialIFS` whose weights are the compositions ``psi o tau_i``;
* :class:`NormalizedIFS` with probability weights ``p_i`` stored on the grid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import expr as E
from .grid import Grid, GridFunction

__all__ = [
    "MapSystem", "WeightedIFS", "PotentialIFS", "NormalizedIFS",
    "ValidationReport", "IFSValidationError", "validate", "from_potential",
    "normalize", "MAP_TOL",
]

MAP_TOL = 1e-9


class IFSValidationError(ValueError):
    pass


def _as_expr(e, dim):
    return E.parse(e, dim) if isinstance(e, str) else e


def _as_maps(maps, dim):
    out = []
    for comps in maps:
        if isinstance(comps, (str, E.Num, E.Var, E.Neg, E.BinOp, E.Call)):
            comps = [comps]
        comps = tuple(_as_expr(c, dim) for c in comps)
        if len(comps) != dim:
            raise IFSValidationError(f"each map needs {dim} component(s), got {len(comps)}")
        out.append(comps)
    if not out:
        raise IFSValidationError("at least one map is required")
    return tuple(out)


class MapSystem:
    """The maps ``tau_0..tau_{n-1}`` together with the grid they act on."""

    def __init__(self, grid: Grid, maps):
        self.grid = grid
        self.maps = _as_maps(maps, grid.dim)

    @property
    def n(self) -> int:
        return len(self.maps)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def image(self, points, i: int) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return np.stack([E.evaluate_many(c, pts) for c in self.maps[i]], axis=1)

    def images(self, points) -> np.ndarray:
        """Shape ``(n, N, d)``."""
        return np.stack([self.image(points, i) for i in range(self.n)])

    @cached_property
    def node_images(self) -> np.ndarray:
        return self.images(self.grid.nodes)

    @cached_property
    def stencils(self):
        """Interpolation stencils of every ``tau_i(node)``: arrays ``(n, m^d, 2^d)``."""
        pairs = [self.grid.stencil(self.node_images[i], MAP_TOL) for i in range(self.n)]
        idx = np.ascontiguousarray(np.stack([p[0] for p in pairs]))
        wts = np.ascontiguousarray(np.stack([p[1] for p in pairs]))
        return idx, wts

    @cached_property
    def unit_node_weights(self) -> np.ndarray:
        return np.ones((self.n, self.grid.size))

    def map_sources(self):
        return [[E.to_python(c) for c in comps] for comps in self.maps]

    def describe_maps(self):
        return [[E.to_string(c) for c in comps] for comps in self.maps]


class WeightedIFS(MapSystem):
    """IFS with weights (X, tau, q)."""

    def __init__(self, grid: Grid, maps, weights):
        super().__init__(grid, maps)
        self.weights = tuple(_as_expr(w, grid.dim) for w in weights)
        if len(self.weights) != self.n:
            raise IFSValidationError(f"{self.n} maps but {len(self.weights)} weights")

    def weights_at(self, points) -> np.ndarray:
        """Weights at arbitrary points, shape ``(n, N)``; evaluated from the expressions."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return np.stack([E.evaluate_many(w, pts) for w in self.weights])

    @cached_property
    def node_weights(self) -> np.ndarray:
        out = self.weights_at(self.grid.nodes)
        out.setflags(write=False)
        return out

    def weight_function(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.node_weights[i])

    def scaled(self, factor: float) -> "WeightedIFS":
        c = E.Num(float(factor))
        return WeightedIFS(self.grid, self.maps, [E.BinOp("*", c, w) for w in self.weights])

    def describe(self) -> dict:
        return {"dimension": self.dim, "grid": self.grid.m, "maps": self.describe_maps(),
                "weights": [E.to_string(w) for w in self.weights]}


class PotentialIFS(WeightedIFS):
    """IFSw with weights ``q_i = psi o tau_i`` for a positive potential ``psi``."""

    def __init__(self, grid: Grid, maps, potential):
        maps = _as_maps(maps, grid.dim)
        psi = _as_expr(potential, grid.dim)
        weights = [E.substitute(psi, comps) for comps in maps]
        super().__init__(grid, maps, weights)
        self.potential = psi

    def potential_at(self, points) -> np.ndarray:
        return E.evaluate_many(self.potential, np.asarray(points, dtype=float).reshape(-1, self.dim))

    @cached_property
    def potential_nodes(self) -> GridFunction:
        return GridFunction(self.grid, self.potential_at(self.grid.nodes))

    def with_potential(self, potential) -> "PotentialIFS":
        return PotentialIFS(self.grid, self.maps, potential)

    def describe(self) -> dict:
        return {"dimension": self.dim, "grid": self.grid.m, "maps": self.describe_maps(),
                "weights": {"potential": E.to_string(self.potential)}}


class NormalizedIFS(MapSystem):
    """IFS with place-dependent probabilities ``p_i`` held as grid functions.

    Off-node probabilities are interpolated. ``sum_defect`` is the largest
    node deviation of ``sum_i p_i`` from one.
    """

    def __init__(self, grid: Grid, maps, probabilities, check_tol: float | None = 1e-10):
        super().__init__(grid, maps)
        probs = []
        for p in probabilities:
            if isinstance(p, GridFunction):
                probs.append(p)
            else:
                probs.append(grid.sample(_as_expr(p, grid.dim)) if isinstance(p, (str, E.Num, E.Var, E.Neg, E.BinOp, E.Call))
                             else GridFunction(grid, p))
        if len(probs) != self.n:
            raise IFSValidationError(f"{self.n} maps but {len(probs)} probabilities")
        self.probabilities = tuple(probs)
        vals = self.node_weights
        if np.any(vals < 0):
            raise IFSValidationError("probabilities must be non-negative")
        self.sum_defect = float(np.max(np.abs(vals.sum(axis=0) - 1.0)))
        self.warnings: list[str] = []
        if check_tol is not None and self.sum_defect > check_tol:
            raise IFSValidationError(f"probabilities sum to 1 only within {self.sum_defect:.3g}")

    @classmethod
    def from_weighted(cls, ifs: WeightedIFS, check_tol: float = 1e-10) -> "NormalizedIFS":
        """Reuse weights that already sum to one."""
        return cls(ifs.grid, ifs.maps, [ifs.weight_function(i) for i in range(ifs.n)], check_tol)

    @cached_property
    def node_weights(self) -> np.ndarray:
        out = np.stack([p.values for p in self.probabilities])
        out.setflags(write=False)
        return out

    def weights_at(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        idx, wts = self.grid.stencil(pts, MAP_TOL)
        return np.stack([np.sum(wts * p.values[idx], axis=1) for p in self.probabilities])


@dataclass
class ValidationReport:
    valid: bool
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    min_weight: float = float("nan")
    max_excursion: float = 0.0
    samples: int = 0

    def to_dict(self) -> dict:
        return {"valid": self.valid, "errors": list(self.errors), "warnings": list(self.warnings),
                "min_weight": self.min_weight, "max_excursion": self.max_excursion,
                "samples": self.samples}


def validate(ifs: WeightedIFS, allow_nonnegative: bool = False, seed: int = 0,
             tol: float = MAP_TOL, chunk: int = 1_000_000) -> ValidationReport:
    """Sample maps and weights on the nodes plus ``10*m^d`` uniform random points.

    Checks that every ``tau_i`` stays in [0,1]^d (within ``tol``), that the
    weights are finite and strictly positive (non-negative with
    ``allow_nonnegative``, which downgrades zeros to a warning).
    """
    rng = np.random.default_rng(seed)
    total_random = 10 * ifs.grid.size
    errors, warns = [], []
    min_w = np.inf
    excursion = 0.0
    batches = [ifs.grid.nodes]
    done = 0
    while done < total_random:
        k = min(chunk, total_random - done)
        batches.append(rng.random((k, ifs.dim)))
        done += k
    seen = set()

    def note(bucket, msg):
        if msg not in seen:
            seen.add(msg)
            bucket.append(msg)

    for pts in batches:
        for i in range(ifs.n):
            try:
                img = ifs.image(pts, i)
            except E.ExprDomainError as exc:
                note(errors, f"map {i}: {exc}")
                continue
            out = np.maximum(-img, img - 1.0).max(axis=1)
            excursion = max(excursion, float(out.max(initial=0.0)))
            if np.any(out > tol):
                j = int(np.argmax(out))
                note(errors, f"map {i}: image escapes X, e.g. tau_{i}({_fmt(pts[j])}) = {_fmt(img[j])}")
            try:
                w = E.evaluate_many(ifs.weights[i], pts)
            except E.ExprDomainError as exc:
                note(errors, f"weight {i}: {exc}")
                continue
            min_w = min(min_w, float(w.min()))
            if np.any(w < 0):
                j = int(np.argmin(w))
                note(errors, f"weight {i}: negative value {w[j]:.6g} at {_fmt(pts[j])}")
            elif np.any(w == 0):
                j = int(np.argmin(w))
                msg = f"weight {i}: zero at {_fmt(pts[j])} (positive weights required)"
                note(warns if allow_nonnegative else errors, msg)
    return ValidationReport(valid=not errors, errors=errors, warnings=warns,
                            min_weight=float(min_w), max_excursion=excursion,
                            samples=sum(len(b) for b in batches))


def _fmt(p):
    p = np.atleast_1d(p)
    return "(" + ", ".join(f"{v:.6g}" for v in p) + ")"


def from_potential(grid: Grid, maps, potential, check: bool = True) -> PotentialIFS:
    """Build ``q_i = psi o tau_i``; with ``check`` the potential must be positive on X."""
    pifs = PotentialIFS(grid, maps, potential)
    if check:
        vals = pifs.potential_at(grid.nodes)
        if np.any(vals <= 0):
            j = int(np.argmin(vals))
            raise IFSValidationError(
                f"potential must be positive on X; psi{_fmt(grid.nodes[j])} = {vals[j]:.6g}")
    return pifs


def normalize(ifs: WeightedIFS, h: GridFunction, rho: float, residual: float | None = None,
              residual_tol: float = 1e-8, sum_tol: float = 1e-6) -> NormalizedIFS:
    """Normalization ``p_j = q_j * h(tau_j x) / (rho h(x))`` of a weighted system.

    The result is not rescaled: ``sum_j p_j = B_q h / (rho h)``, which is one
    exactly when ``(h, rho)`` is an eigenpair. A warning is attached (and
    emitted) when the sum misses one by more than ``sum_tol`` or the supplied
    eigen-residual exceeds ``residual_tol``.
    """
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if h.min_value() <= 0:
        raise ValueError("h must be positive at every node")
    idx, wts = ifs.stencils
    h_img = np.sum(wts * h.values[idx], axis=2)  # (n, size)
    p = ifs.node_weights * h_img / (rho * h.values)
    nifs = NormalizedIFS(ifs.grid, ifs.maps, [GridFunction(ifs.grid, row) for row in p], check_tol=None)
    if nifs.sum_defect > sum_tol:
        nifs.warnings.append(f"sum of probabilities deviates from 1 by {nifs.sum_defect:.3g}")
    if residual is not None and residual > residual_tol:
        nifs.warnings.append(f"eigen-residual {residual:.3g} above {residual_tol:g}")
    for w in nifs.warnings:
        warnings.warn(w, RuntimeWarning, stacklevel=2)
    return nifs

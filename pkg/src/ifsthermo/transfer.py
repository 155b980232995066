"""Transfer operator ``B_q f(x) = sum_i q_i(x) f(tau_i(x))`` and its leading eigenpair."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from . import expr as E
from .grid import GridFunction
from .ifs import MapSystem, PotentialIFS, WeightedIFS

__all__ = [
    "apply", "apply_unit", "power_apply", "word_sum_oracle", "log_pressure_sequence",
    "EigenPair", "DiscountSchedule", "eigen_power", "eigen_discounted",
    "collatz_wielandt", "optimal_function", "optimality_residual",
    "WordBudgetError", "ResidualTooLargeError",
]

WORD_BUDGET = 10 ** 7


class WordBudgetError(ValueError):
    pass


class ResidualTooLargeError(ValueError):
    pass


def _apply_values(system, node_weights, values):
    idx, wts = system.stencils
    return _kernels.transfer_gather(np.asarray(node_weights, dtype=float), idx, wts,
                                    np.ascontiguousarray(values, dtype=float))


def apply(ifs, f: GridFunction) -> GridFunction:
    """One application of the transfer operator, ``f(tau_i x)`` read by interpolation.

    ``ifs`` may be a :class:`WeightedIFS` or a :class:`NormalizedIFS`.
    """
    if f.grid != ifs.grid:
        raise ValueError("f lives on a different grid")
    return GridFunction(ifs.grid, _apply_values(ifs, ifs.node_weights, f.values))


def apply_unit(system: MapSystem, f: GridFunction) -> GridFunction:
    """``B_1 f = sum_i f o tau_i`` (all weights equal to one)."""
    return GridFunction(system.grid, _apply_values(system, system.unit_node_weights, f.values))


def power_apply(ifs, N: int, log: bool = False) -> GridFunction:
    """``B_q^N(1)``; with ``log=True`` the node values of ``ln B_q^N(1)`` computed without overflow."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if log:
        return GridFunction(ifs.grid, _log_powers(ifs, N)[-1] * N)
    vals = np.ones(ifs.grid.size)
    for _ in range(N):
        vals = _apply_values(ifs, ifs.node_weights, vals)
    return GridFunction(ifs.grid, vals)


def _log_powers(ifs, N_max):
    # L_{N+1} = ln B(exp(L_N - max L_N)) + max L_N ; row N-1 holds a_N = L_N / N
    L = np.zeros(ifs.grid.size)
    out = np.empty((N_max, ifs.grid.size))
    for N in range(1, N_max + 1):
        top = L.max()
        with np.errstate(divide="ignore"):
            L = np.log(_apply_values(ifs, ifs.node_weights, np.exp(L - top))) + top
        out[N - 1] = L / N
    return out


def log_pressure_sequence(ifs, N_max: int) -> np.ndarray:
    """Array of shape ``(N_max, m^d)`` whose row ``N-1`` is ``(1/N) ln B_q^N(1)`` at the nodes."""
    if N_max < 1:
        raise ValueError("N_max must be at least 1")
    return _log_powers(ifs, N_max)


def word_sum_oracle(ifs: WeightedIFS, x, N: int, budget: int = WORD_BUDGET) -> float:
    """``B_q^N(1)(x)`` by enumerating all ``n^N`` words, with no grid involved.

    Maps and weights are evaluated from their expressions along every branch
    ``x_{j+1} = tau_{w_j}(x_j)`` and the products ``prod_j q_{w_j}(x_j)`` are
    summed.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if ifs.n ** N > budget:
        raise WordBudgetError(f"{ifs.n}^{N} words exceed the enumeration budget {budget}")
    pts = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, ifs.dim)
    prods = np.ones(1)
    for level in range(N):
        q = ifs.weights_at(pts)  # (n, K)
        prods = (q * prods).ravel()
        if level < N - 1:
            pts = ifs.images(pts).reshape(-1, ifs.dim)
    return float(np.sum(prods))


def word_products(ifs: WeightedIFS, x, N: int):
    """Every word of length ``N`` with its product, as ``(word, product)`` pairs (small N only)."""
    out = []
    x0 = np.atleast_1d(np.asarray(x, dtype=float))
    for word in itertools.product(range(ifs.n), repeat=N):
        pt = x0.copy()
        prod = 1.0
        for i in word:
            prod *= E.evaluate(ifs.weights[i], pt)
            pt = np.array([E.evaluate(c, pt) for c in ifs.maps[i]])
        out.append((word, prod))
    return out


@dataclass
class EigenPair:
    """Leading eigenpair estimate; ``h`` has sup norm one."""

    h: GridFunction
    rho: float
    rho_lo: float
    rho_hi: float
    residual: float
    iterations: int
    converged: bool
    method: str
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        return (self.rho_hi - self.rho_lo) / self.rho_lo

    def to_dict(self) -> dict:
        return {"method": self.method, "rho": self.rho, "rho_lo": self.rho_lo, "rho_hi": self.rho_hi,
                "log_rho": float(np.log(self.rho)), "residual": self.residual,
                "iterations": self.iterations, "converged": self.converged,
                "message": self.message, "min_h": self.h.min_value()}

    def to_csv(self, path) -> None:
        grid = self.h.grid
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{k + 1}" for k in range(grid.dim)] + ["h", "rho", "residual"])
            for node, v in zip(grid.nodes, self.h.values):
                w.writerow([repr(float(c)) for c in node] + [repr(float(v)), repr(self.rho), repr(self.residual)])


def collatz_wielandt(ifs, f: GridFunction):
    """Bracket ``min Bf/f <= rho <= max Bf/f`` for a positive ``f``; returns ``(lo, hi, Bf)``."""
    if f.min_value() <= 0:
        raise ValueError("Collatz-Wielandt bounds need a positive function")
    g = _apply_values(ifs, ifs.node_weights, f.values)
    r = g / f.values
    return float(r.min()), float(r.max()), g


def _residual(ifs, h_vals, rho):
    g = _apply_values(ifs, ifs.node_weights, h_vals)
    return float(np.max(np.abs(g - rho * h_vals)) / rho)


def eigen_power(ifs, tol: float = 1e-8, max_iter: int = 1000) -> EigenPair:
    """Power iteration from ``f = 1`` with Collatz-Wielandt stopping.

    Iterates ``f <- B f / ||B f||``; stops once ``(rho_hi - rho_lo)/rho_lo < tol``.
    A system without a positive eigenfunction keeps a wide bracket; the best
    pair is then returned with ``converged=False``.
    """
    f = np.ones(ifs.grid.size)
    history = []
    lo = hi = float("nan")
    message = "max_iter reached; Collatz-Wielandt bracket did not close"
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = _apply_values(ifs, ifs.node_weights, f)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = g / f
        lo, hi = float(r.min()), float(r.max())
        history.append((lo, hi))
        if not np.isfinite(lo) or lo <= 0:
            message = "iterate lost strict positivity"
            break
        if (hi - lo) / lo < tol:
            converged = True
            message = ""
            break
        top = g.max()
        if np.min(g) / top < 1e-280:
            message = "iterate about to underflow; positive eigenfunction unlikely"
            f = g / top
            break
        f = g / top
    f = f / f.max()
    rho = 0.5 * (lo + hi)
    return EigenPair(h=GridFunction(ifs.grid, f), rho=rho, rho_lo=lo, rho_hi=hi,
                     residual=_residual(ifs, f, rho), iterations=it, converged=converged,
                     method="power", message=message, history=history)


@dataclass
class DiscountSchedule:
    """Linear discounts ``delta_k(t) = sigma_k t`` with ``sigma_k`` increasing to one.

    ``inner_tol`` bounds the sup-norm change of the normalized iterate that
    ends each inner loop; by contraction this puts the inner fixed point
    within ``inner_tol * sigma_k / (1 - sigma_k)``.
    """

    sigmas: Sequence[float]
    inner_tol: float = 1e-12
    max_inner: int = 5000
    tol: float = 1e-6

    def __post_init__(self):
        s = np.asarray(self.sigmas, dtype=float)
        if s.size == 0 or np.any(s <= 0) or np.any(s >= 1) or np.any(np.diff(s) <= 0):
            raise ValueError("discount factors must be strictly increasing in (0, 1)")
        self.sigmas = tuple(float(v) for v in s)

    @classmethod
    def geometric(cls, k_max: int = 20, **kw) -> "DiscountSchedule":
        return cls([1.0 - 2.0 ** (-k) for k in range(1, k_max + 1)], **kw)

    def discount(self, k: int, t):
        return self.sigmas[k] * np.asarray(t)


def eigen_discounted(ifs, schedule: DiscountSchedule | None = None) -> EigenPair:
    """Eigenfunction as the normalized limit of discounted log-sum-exp fixed points.

    For each ``sigma`` the fixed point of ``w = ln sum_i exp(ln q_i + sigma w o tau_i)``
    is found by iteration. Since the operator commutes with constants up to
    the factor ``sigma``, only ``v = w - max w`` is iterated; the constant part
    is recovered in closed form. ``w o tau_i`` is read by interpolating
    ``exp(sigma w)``, so the scheme shares the discretization of
    :func:`eigen_power`.
    """
    schedule = schedule or DiscountSchedule.geometric()
    v = np.zeros(ifs.grid.size)
    prev = None
    history = []
    change = float("inf")
    message = ""
    inner_ok = True
    k_used = 0
    for k, sigma in enumerate(schedule.sigmas):
        k_used = k + 1
        for t in range(schedule.max_inner):
            with np.errstate(divide="ignore"):
                g = np.log(_apply_values(ifs, ifs.node_weights, np.exp(sigma * v)))
            v_new = g - g.max()
            step = float(np.max(np.abs(v_new - v)))
            v = v_new
            if step <= schedule.inner_tol:
                break
        else:
            inner_ok = False
            message = f"inner loop at sigma={sigma:.6g} stalled (last step {step:.3g})"
        shift = float(g.max())  # fixed point is w = v + shift / (1 - sigma)
        if prev is not None:
            change = float(np.max(np.abs(v - prev)))
        history.append({"sigma": sigma, "inner_iterations": t + 1, "change": change,
                        "offset": shift / (1.0 - sigma)})
        prev = v.copy()
        if not inner_ok:
            break
        if change < schedule.tol:
            break
    h = np.exp(v)
    lo, hi, g = collatz_wielandt(ifs, GridFunction(ifs.grid, h))
    rho = 0.5 * (lo + hi)
    converged = inner_ok and change < schedule.tol
    if not converged and not message:
        message = f"normalized iterate still moving by {change:.3g} after {k_used} discount levels"
    return EigenPair(h=GridFunction(ifs.grid, h), rho=rho, rho_lo=lo, rho_hi=hi,
                     residual=_residual(ifs, h, rho), iterations=k_used, converged=converged,
                     method="discounted", message=message, history=history)


def optimal_function(pifs: PotentialIFS, pair: EigenPair, residual_tol: float = 1e-6,
                     check_tol: float = 1e-6) -> GridFunction:
    """``g* = psi * h``, for which ``p_j = g*(tau_j x) / B_1(g*)(x)`` is the normalization."""
    if pair.residual > residual_tol:
        raise ResidualTooLargeError(f"eigen-residual {pair.residual:.3g} exceeds {residual_tol:g}")
    g = pifs.potential_nodes * pair.h
    err = optimality_residual(pifs, pair, g)
    if err > check_tol:
        raise ResidualTooLargeError(f"optimality identity off by {err:.3g}")
    return g


def optimality_residual(ifs: WeightedIFS, pair: EigenPair, g: GridFunction) -> float:
    """Sup over nodes and maps of ``|p_j B_1(g) - g o tau_j| / sup g``."""
    idx, wts = ifs.stencils
    h_img = np.sum(wts * pair.h.values[idx], axis=2)
    g_img = np.sum(wts * g.values[idx], axis=2)
    p = ifs.node_weights * h_img / (pair.rho * pair.h.values)
    b1 = g_img.sum(axis=0)
    return float(np.max(np.abs(p * b1 - g_img)) / g.sup_norm())

"""Topological pressure, equilibrium states and the one-sided derivative probe."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import expr as E
from . import transfer as T
from .holonomic import HolonomicMeasure, average_entropy, holonomic_lift, variational_entropy_upper
from .ifs import NormalizedIFS, PotentialIFS, normalize
from .markov import ParticleMeasure, hutchinson_fixed_point

__all__ = [
    "PressureReport", "pressure", "EquilibriumState", "equilibrium", "NoEigenfunctionError",
    "ProbeRow", "ProbeResult", "gateaux_probe", "perturbed", "log_pressure",
]

METHODS = ("power", "discounted", "limit")


class NoEigenfunctionError(RuntimeError):
    """Power iteration found no positive eigenfunction; carries the ``a_N`` spread."""

    def __init__(self, message, pair=None, spread=None):
        super().__init__(message)
        self.pair = pair
        self.spread = spread


@dataclass
class PressureReport:
    potential: str
    method: str
    value: float
    converged: bool
    log_rho_power: float | None = None
    bracket: tuple | None = None
    log_rho_discounted: float | None = None
    limit_interval: tuple | None = None
    ratio_interval: tuple | None = None
    n_max: int | None = None
    messages: list = field(default_factory=list)
    entropy: float | None = None
    energy: float | None = None
    variational_gap: float | None = None

    def to_dict(self) -> dict:
        out = {
            "potential": self.potential, "method": self.method, "pressure": self.value,
            "converged": self.converged, "log_rho_power": self.log_rho_power,
            "log_rho_bracket": list(self.bracket) if self.bracket else None,
            "log_rho_discounted": self.log_rho_discounted,
            "limit_interval": list(self.limit_interval) if self.limit_interval else None,
            "ratio_interval": list(self.ratio_interval) if self.ratio_interval else None,
            "n_max": self.n_max, "messages": list(self.messages),
        }
        if self.entropy is not None:
            out.update(entropy=self.entropy, energy=self.energy, variational_gap=self.variational_gap)
        return out


def pressure(pifs: PotentialIFS, method="power", tol: float = 1e-10, max_iter: int = 1000,
             n_max: int = 60, schedule: T.DiscountSchedule | None = None) -> PressureReport:
    """``P(psi) = ln rho(B_{psi*tau})`` by one or several methods.

    ``method`` is ``"power"``, ``"discounted"``, ``"limit"`` or a sequence of
    these; the first listed supplies ``value``. The limit method reports the
    node range ``[min_x a_N, max_x a_N]`` at ``N = n_max``. That range shrinks
    only like ``1/N``, so its value is taken from the ratio
    ``B^N(1) / B^{N-1}(1)``, whose node range is a Collatz-Wielandt bracket.
    """
    methods = (method,) if isinstance(method, str) else tuple(method)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown pressure method {m!r}; choose from {METHODS}")
    label = E.to_string(pifs.potential) if isinstance(pifs, PotentialIFS) else "weights"
    rep = PressureReport(potential=label, method=methods[0],
                         value=float("nan"), converged=True)
    values = {}
    for m in methods:
        if m == "power":
            pair = T.eigen_power(pifs, tol=tol, max_iter=max_iter)
            rep.log_rho_power = float(np.log(pair.rho))
            rep.bracket = (float(np.log(pair.rho_lo)), float(np.log(pair.rho_hi)))
            values[m] = rep.log_rho_power
            if not pair.converged:
                rep.converged = False
                rep.messages.append(f"power: {pair.message}")
        elif m == "discounted":
            pair = T.eigen_discounted(pifs, schedule)
            rep.log_rho_discounted = float(np.log(pair.rho))
            values[m] = rep.log_rho_discounted
            if not pair.converged:
                rep.converged = False
                rep.messages.append(f"discounted: {pair.message}")
        else:
            seq = T.log_pressure_sequence(pifs, max(n_max, 2))
            a = seq[n_max - 1]
            rep.limit_interval = (float(a.min()), float(a.max()))
            rep.n_max = n_max
            N = max(n_max, 2)
            step = N * seq[N - 1] - (N - 1) * seq[N - 2]
            rep.ratio_interval = (float(step.min()), float(step.max()))
            values[m] = 0.5 * (rep.ratio_interval[0] + rep.ratio_interval[1])
    rep.value = values[methods[0]]
    return rep


def log_pressure(pifs: PotentialIFS, tol: float = 1e-12, max_iter: int = 1000) -> float:
    """``p(phi) = P(exp(phi))`` through power iteration; raises if it does not converge."""
    pair = T.eigen_power(pifs, tol=tol, max_iter=max_iter)
    if not pair.converged:
        raise NoEigenfunctionError(pair.message, pair)
    return float(np.log(pair.rho))


@dataclass
class EquilibriumState:
    holonomic: HolonomicMeasure
    marginal: ParticleMeasure
    pair: T.EigenPair
    normalized: NormalizedIFS
    entropy: float
    energy: float
    log_rho: float
    fixed_point_residual: float

    @property
    def value(self) -> float:
        """``h_a + int ln psi dmu``."""
        return self.entropy + self.energy

    @property
    def gap(self) -> float:
        return abs(self.value - self.log_rho)

    def entropy_upper(self, dictionary) -> float:
        return variational_entropy_upper(self.holonomic, dictionary)

    def to_dict(self) -> dict:
        return {"log_rho": self.log_rho, "entropy": self.entropy, "energy": self.energy,
                "attained": self.value, "variational_gap": self.gap,
                "fixed_point_residual": self.fixed_point_residual,
                "particles": len(self.marginal), "eigen": self.pair.to_dict()}


def _spread(pifs, n_max):
    a = T.log_pressure_sequence(pifs, n_max)[-1]
    return float(a.max() - a.min())


def equilibrium(pifs: PotentialIFS, tol: float = 1e-12, max_iter: int = 1000,
                measure_tol: float = 1e-12, measure_iter: int = 2000,
                resolution: int | None = None, n_max: int = 60) -> EquilibriumState:
    """Equilibrium state by normalization, Markov fixed point and holonomic lifting.

    Chain: ``(h, rho)`` from power iteration, ``p_j = q_j h(tau_j)/(rho h)``,
    ``mu`` the fixed point of ``L_p``, and ``mu_hat`` its lifting
    ``dmu_hat(x, i) = p_i(x) dmu(x)``.
    """
    pair = T.eigen_power(pifs, tol=tol, max_iter=max_iter)
    if not pair.converged:
        spread = _spread(pifs, n_max)
        raise NoEigenfunctionError(
            f"no positive eigenfunction found ({pair.message}); "
            f"a_N spread over X at N={n_max} is {spread:.6g}", pair, spread)
    nifs = normalize(pifs, pair.h, pair.rho, pair.residual, residual_tol=max(1e-8, 10 * tol))
    fixed = hutchinson_fixed_point(nifs, tol=measure_tol, max_iter=measure_iter, resolution=resolution)
    mu = fixed.measure
    mu_hat = holonomic_lift(nifs, mu, resolution=resolution)
    h_a = average_entropy(mu_hat)
    energy = mu.integrate(lambda pts: np.log(pifs.potential_at(pts)))
    return EquilibriumState(holonomic=mu_hat, marginal=mu, pair=pair, normalized=nifs,
                            entropy=h_a, energy=energy, log_rho=float(np.log(pair.rho)),
                            fixed_point_residual=fixed.residual)


def perturbed(pifs: PotentialIFS, eta: E.Expr, t: float) -> PotentialIFS:
    """System for the potential ``psi * exp(t * eta)``, i.e. ``phi + t eta`` with ``phi = ln psi``."""
    pot = E.BinOp("*", pifs.potential, E.Call("exp", (E.BinOp("*", E.Num(float(t)), eta),)))
    return pifs.with_potential(pot)


@dataclass
class ProbeRow:
    eta_id: str
    t: float
    quotient: float
    subgradient_value: float

    @property
    def abs_diff(self) -> float:
        return abs(self.quotient - self.subgradient_value)


@dataclass
class ProbeResult:
    rows: list

    def by_eta(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out.setdefault(r.eta_id, []).append(r)
        return out

    @property
    def max_discrepancy(self) -> float:
        return max(r.abs_diff for r in self.rows)

    def monotone(self, atol: float = 1e-9) -> dict:
        """Per direction: discrepancy non-increasing as ``t`` decreases.

        Differences below ``atol`` are rounding noise of the pressure solves
        and do not count as increases.
        """
        out = {}
        for eta, rows in self.by_eta().items():
            rows = sorted(rows, key=lambda r: -r.t)
            out[eta] = all(b.abs_diff <= a.abs_diff or b.abs_diff <= atol for a, b in zip(rows, rows[1:]))
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eta_id", "t", "quotient", "subgradient_value", "abs_diff"])
            for r in self.rows:
                w.writerow([r.eta_id, repr(r.t), repr(r.quotient), repr(r.subgradient_value), repr(r.abs_diff)])

    def to_dict(self) -> dict:
        return {"rows": [{"eta_id": r.eta_id, "t": r.t, "quotient": r.quotient,
                          "subgradient_value": r.subgradient_value, "abs_diff": r.abs_diff}
                         for r in self.rows],
                "max_discrepancy": self.max_discrepancy, "monotone": self.monotone()}


def gateaux_probe(pifs: PotentialIFS, etas: dict, t_values=(1e-2, 1e-3, 1e-4),
                  state: EquilibriumState | None = None, tol: float = 1e-13) -> ProbeResult:
    """Forward difference quotients ``(p(phi + t eta) - p(phi)) / t`` against ``int eta dmu``.

    ``mu`` is the marginal of the equilibrium state; agreement as ``t``
    decreases is the numerical signature of differentiability at ``phi``.
    """
    state = state or equilibrium(pifs)
    base = log_pressure(pifs, tol=tol)
    rows = []
    for name, eta in etas.items():
        eta = E.parse(eta, pifs.dim) if isinstance(eta, str) else eta
        sub = state.marginal.integrate(eta)
        for t in t_values:
            if t <= 0:
                raise ValueError("t values must be positive (one-sided derivative)")
            q = (log_pressure(perturbed(pifs, eta, t), tol=tol) - base) / t
            rows.append(ProbeRow(str(name), float(t), float(q), float(sub)))
    return ProbeResult(rows)

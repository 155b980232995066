"""Cross-module identity suite run by ``ifsthermo verify``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as E
from . import holonomic as H
from . import markov as M
from . import pressure as P
from . import transfer as T
from .config import RunConfig
from .ifs import PotentialIFS, normalize

__all__ = ["Check", "run_suite"]


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None
    limit: float | None
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        v = "" if self.value is None else f" value={self.value:.3e}"
        lim = "" if self.limit is None else f" limit={self.limit:.1e}"
        extra = f" ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}{v}{lim}{extra}"

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "limit": self.limit, "detail": self.detail}


def _check(name, value, limit, detail="", ok=None):
    value = None if value is None else float(value)
    if ok is None:
        ok = value is not None and np.isfinite(value) and value <= limit
    return Check(name, bool(ok), value, limit, detail)


def _wordsum(cfg: RunConfig) -> Check:
    vcfg = cfg.verify
    ifs = cfg.build(vcfg.get("wordsum_grid"))
    n_max = int(vcfg.get("wordsum_nmax", 10))
    while ifs.n ** n_max > T.WORD_BUDGET:
        n_max -= 1
    points = vcfg.get("wordsum_points") or ifs.grid.nodes[:: max(1, ifs.grid.size // 5)].tolist()
    node_idx = []
    for p in points:
        k = np.rint(np.asarray(p, dtype=float) * (ifs.grid.m - 1)).astype(int)
        flat = 0
        for kk in k:
            flat = flat * ifs.grid.m + int(kk)
        node_idx.append(flat)
    worst = 0.0
    vals = np.ones(ifs.grid.size)
    for N in range(1, n_max + 1):
        vals = T.power_apply(ifs, 1).values if N == 1 else T._apply_values(ifs, ifs.node_weights, vals)
        for p, j in zip(points, node_idx):
            oracle = T.word_sum_oracle(ifs, p, N)
            worst = max(worst, abs(vals[j] - oracle) / oracle)
    return _check("word-sum equivalence", worst, float(vcfg.get("wordsum_rtol", 1e-9)),
                  f"N<={n_max}, {len(points)} probe nodes, grid {ifs.grid.m}")


def run_suite(cfg: RunConfig, log=print) -> list:
    """Run every applicable identity check; each result is logged as one line."""
    checks: list = []

    def add(c: Check):
        checks.append(c)
        if log:
            log(c.line())

    prm = cfg.params
    ifs = cfg.build()
    rng = np.random.default_rng(prm["seed"])

    add(_wordsum(cfg))

    pw = T.eigen_power(ifs, tol=prm["tol"], max_iter=prm["max_iter"])
    sandwich = all(lo <= hi for lo, hi in pw.history)
    add(_check("Collatz-Wielandt sandwich", None, None, f"{len(pw.history)} steps", ok=sandwich))
    add(_check("positive eigenfunction (power iteration)", pw.gap, prm["tol"],
               pw.message or f"rho={pw.rho:.12g}", ok=pw.converged))
    if not pw.converged:
        a = T.log_pressure_sequence(ifs, prm["n_max"])[-1]
        add(_check("a_N spread (no eigenfunction)", float(a.max() - a.min()), None,
                   "remaining checks need a positive eigenfunction", ok=False))
        return checks

    lr = np.log(pw.rho)
    a = T.log_pressure_sequence(ifs, max(prm["n_max"], 10))
    scaled = np.array([N * np.max(np.abs(a[N - 1] - lr)) for N in range(10, a.shape[0] + 1)])
    add(_check("O(1/N) rate of a_N", float(scaled.max()), 2 * scaled[0] if scaled[0] > 1e-12 else 1e-9,
               f"N*sup|a_N - ln rho| over 10..{a.shape[0]}"))

    disc = T.eigen_discounted(ifs, T.DiscountSchedule.geometric(prm["k_max"]))
    add(_check("power vs discounted: rho", abs(pw.rho - disc.rho) / pw.rho, 1e-6))
    add(_check("power vs discounted: h", float(np.max(np.abs(pw.h.values - disc.h.values))), 1e-5))

    em = M.eigen_measure(ifs, tol=1e-12)
    lo, hi = em.bounds
    add(_check("eigenmeasure mass bounds", None, None, f"{lo:.6g} <= {em.rho:.6g} <= {hi:.6g}",
               ok=lo - 1e-12 <= em.rho <= hi + 1e-12))
    add(_check("eigenmeasure rho vs spectral radius", abs(em.rho - pw.rho) / pw.rho, 1e-3))
    add(_check("eigenmeasure dictionary residual", em.residual, 1e-3))

    nifs = normalize(ifs, pw.h, pw.rho, pw.residual, residual_tol=1.0)
    add(_check("normalization sum", nifs.sum_defect, 1e-6))

    x0 = prm["x0"] or [0.5] * ifs.dim
    steps = int(prm["particles"])
    orbit = M.chaos_game(nifs, x0, steps, seed=prm["seed"])
    # plug-in entropy per cell is biased low by about (n-1)/(2 * atoms per cell)
    emp = H.empirical_holonomic(orbit, ifs, resolution=cfg.verify.get("empirical_resolution"))
    dictionary = M.test_dictionary(ifs.dim)
    worst_id = worst_bound = 0.0
    for f in dictionary.values():
        lhs = emp.integrate(H.discrete_differential(ifs, f))
        rhs = (f(orbit.points[-1:])[0] - f(orbit.points[:1])[0]) / steps
        worst_id = max(worst_id, abs(lhs - rhs))
        worst_bound = max(worst_bound, abs(lhs) / (2 * M.sup_over_grid(f, ifs.grid) / steps))
    add(_check("holonomy defect identity", worst_id, 1e-12))
    add(_check("holonomy defect bound (ratio to 2||f||/N)", worst_bound, 1.0))

    gibbs_a = rng.dirichlet(np.ones(ifs.n), size=10_000)
    gibbs_b = rng.dirichlet(np.ones(ifs.n), size=10_000)
    diff = H.cross_entropy(gibbs_a, gibbs_b) - H.shannon(gibbs_a)
    eq = np.abs(H.cross_entropy(gibbs_a, gibbs_a) - H.shannon(gibbs_a))
    add(_check("Gibbs inequality", float(max(-diff.min(), eq.max())), 1e-12))

    pifs = ifs if isinstance(ifs, PotentialIFS) else None
    if pifs is not None:
        state = P.equilibrium(pifs, tol=min(prm["tol"], 1e-12), max_iter=prm["max_iter"])
        add(_check("variational principle (lifted fixed point)", state.gap, 1e-3))
        ha_emp = H.average_entropy(emp)
        en_emp = orbit.empirical().integrate(lambda p: np.log(pifs.potential_at(p)))
        add(_check("variational principle (chaos game)", abs(ha_emp + en_emp - state.log_rho), 1e-3,
                   f"{steps} steps"))
        gstar = T.optimal_function(pifs, state.pair)
        dict_g = [E.Num(1.0), gstar] + [E.parse(s, ifs.dim) for s in cfg.entropy_dictionary]
        h_a = state.entropy
        h_v = state.entropy_upper(dict_g)
        ln_n = np.log(ifs.n)
        add(_check("entropy sandwich 0 <= h_a <= h_v <= ln n", None, None,
                   f"h_a={h_a:.9f} h_v<={h_v:.9f}", ok=0 <= h_a <= h_v + 1e-9 and h_v <= ln_n + 1e-9))
        add(_check("h_v - h_a with optimal function", h_v - h_a, 1e-4))
        other = P.pressure(pifs.with_potential(E.BinOp("*", E.Num(np.e), pifs.potential)), tol=1e-12).value
        base = P.pressure(pifs, tol=1e-12).value
        add(_check("pressure shift rule", abs(other - base - 1.0), 1e-8))
        etas = cfg.probe.get("eta") or {"x1": "x1"}
        ts = cfg.probe.get("t") or [1e-2, 1e-3, 1e-4]
        probe = P.gateaux_probe(pifs, etas, ts, state=state, tol=1e-12)
        final = max(r.abs_diff for r in probe.rows if r.t == min(ts))
        add(_check("Gateaux probe monotone", None, None, "", ok=all(probe.monotone().values())))
        add(_check("Gateaux probe final discrepancy", final, 5e-3))
    else:
        fixed = M.hutchinson_fixed_point(nifs, tol=1e-12)
        add(_check("Hutchinson fixed-point residual", fixed.residual, 1e-4))
        lifted = H.holonomic_lift(nifs, fixed.measure)
        dict_g = [E.Num(1.0)] + [E.parse(s, ifs.dim) for s in cfg.entropy_dictionary]
        h_a, h_v = H.entropy_interval(lifted, dict_g)
        add(_check("entropy sandwich 0 <= h_a <= h_v <= ln n", None, None,
                   f"h_a={h_a:.9f} h_v<={h_v:.9f}", ok=0 <= h_a <= h_v + 1e-9 and h_v <= np.log(ifs.n) + 1e-9))
        r2 = T.eigen_power(ifs.scaled(np.e), tol=1e-12).rho
        r1 = T.eigen_power(ifs, tol=1e-12).rho
        add(_check("pressure shift rule (weights scaled by e)", abs(np.log(r2) - np.log(r1) - 1.0), 1e-8))
    return checks

"""Command-line front end: ``ifsthermo COMMAND CONFIG [options]``.

Every run writes ``report.json`` (sorted keys, no timings, so identical
inputs give identical bytes) plus command-specific CSV files into the output
directory. Exit status: 0 success, 1 configuration error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from . import expr as E
from . import holonomic as H
from . import markov as M
from . import pressure as P
from . import transfer as T
from .config import ConfigError, RunConfig, list_fixtures, load_config, with_overrides
from .grid import write_csv
from .ifs import NormalizedIFS, PotentialIFS, normalize, validate
from .verify import run_suite

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2
OUTPUT_ENV = "IFSTHERMO_OUTPUT_DIR"
DEFAULT_OUTPUT = "ifsthermo-out"

COMMANDS = ("validate", "pressure", "eigen", "normalize", "equilibrium", "entropy",
            "chaos-game", "verify", "probe")


class SolverFailure(RuntimeError):
    def __init__(self, message: str, result: dict | None = None):
        super().__init__(message)
        self.result = result or {}


class Run:
    """Output directory plus the list of artifacts written so far."""

    def __init__(self, out: Path):
        self.out = out
        self.artifacts: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name


def _clean(obj):
    # JSON has no NaN/inf; numpy scalars and tuples are normalized as well
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _normalized(ifs, prm) -> tuple:
    """A normalized system for ``ifs``: its own weights when they sum to one, else via the eigenpair."""
    sums = ifs.node_weights.sum(axis=0)
    if not isinstance(ifs, PotentialIFS) and np.max(np.abs(sums - 1.0)) <= 1e-12:
        return NormalizedIFS.from_weighted(ifs, check_tol=1e-12), None
    pair = T.eigen_power(ifs, tol=prm["tol"], max_iter=prm["max_iter"])
    if not pair.converged:
        _no_eigenfunction(ifs, pair, prm)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        nifs = normalize(ifs, pair.h, pair.rho, pair.residual)
    return nifs, pair


def _no_eigenfunction(ifs, pair, prm):
    a = T.log_pressure_sequence(ifs, prm["n_max"])[-1]
    spread = float(a.max() - a.min())
    raise SolverFailure(
        f"no positive eigenfunction: power iteration stopped with relative Collatz-Wielandt gap "
        f"{pair.gap:.4g} ({pair.message}); a_N spread over X at N={prm['n_max']} is {spread:.6g}",
        {"eigen": pair.to_dict(), "a_N_spread": spread, "a_N_min": float(a.min()),
         "a_N_max": float(a.max()), "n_max": prm["n_max"]})


def cmd_validate(cfg: RunConfig, ifs, run: Run) -> dict:
    rep = validate(ifs, allow_nonnegative=cfg.params["allow_nonnegative"], seed=cfg.params["seed"])
    out = {"validation": rep.to_dict(), "system": ifs.describe()}
    if not rep.valid:
        raise ConfigError("maps/weights", "; ".join(rep.errors))
    return out


def cmd_pressure(cfg: RunConfig, ifs, run: Run) -> dict:
    prm = cfg.params
    sched = T.DiscountSchedule.geometric(prm["k_max"])
    rep = P.pressure(ifs, method=("power", "discounted", "limit"), tol=prm["tol"],
                     max_iter=prm["max_iter"], n_max=prm["n_max"], schedule=sched)
    a = T.log_pressure_sequence(ifs, prm["n_max"])
    write_csv(run.path("a_N.csv"), ifs.grid, {f"a_{N}": a[N - 1] for N in (1, prm["n_max"])})
    out = {"pressure": rep.to_dict()}
    if not rep.converged:
        raise SolverFailure("; ".join(rep.messages), out)
    return out


def cmd_eigen(cfg: RunConfig, ifs, run: Run) -> dict:
    prm = cfg.params
    pair = T.eigen_power(ifs, tol=prm["tol"], max_iter=prm["max_iter"])
    if not pair.converged:
        _no_eigenfunction(ifs, pair, prm)
    pair.to_csv(run.path("eigenfunction.csv"))
    em = M.eigen_measure(ifs)
    em.measure.to_csv(run.path("eigenmeasure.csv"))
    out = {"eigen": pair.to_dict(), "eigenmeasure": em.to_dict()}
    if not em.converged:
        raise SolverFailure(f"eigenmeasure: {em.message}", out)
    return out


def cmd_normalize(cfg: RunConfig, ifs, run: Run) -> dict:
    nifs, pair = _normalized(ifs, cfg.params)
    write_csv(run.path("probabilities.csv"), ifs.grid,
              {f"p_{i}": nifs.node_weights[i] for i in range(ifs.n)})
    return {"eigen": pair.to_dict() if pair else None, "sum_defect": nifs.sum_defect,
            "warnings": nifs.warnings}


def _dictionary(cfg: RunConfig, ifs, extra=()) -> list:
    funcs = [E.Num(1.0)] + list(extra)
    funcs += [E.parse(s, ifs.dim) for s in cfg.entropy_dictionary]
    return funcs


def cmd_equilibrium(cfg: RunConfig, ifs, run: Run) -> dict:
    prm = cfg.params
    if not isinstance(ifs, PotentialIFS):
        raise ConfigError("weights", "equilibrium needs a potential ({\"potential\": expr})")
    try:
        state = P.equilibrium(ifs, tol=min(prm["tol"], 1e-12), max_iter=prm["max_iter"], n_max=prm["n_max"])
    except P.NoEigenfunctionError as exc:
        raise SolverFailure(str(exc), {"a_N_spread": exc.spread}) from exc
    state.marginal.to_csv(run.path("marginal.csv"))
    state.holonomic.disintegration.to_csv(run.path("disintegration.csv"), ifs.grid)
    x0 = prm["x0"] or [0.5] * ifs.dim
    orbit = M.chaos_game(state.normalized, x0, prm["particles"], seed=prm["seed"])
    emp = H.empirical_holonomic(orbit, ifs, resolution=cfg.verify.get("empirical_resolution"))
    h_emp = H.average_entropy(emp)
    e_emp = orbit.empirical().integrate(lambda p: np.log(ifs.potential_at(p)))
    out = {"equilibrium": state.to_dict(),
           "chaos_game": {"steps": prm["particles"], "seed": prm["seed"], "entropy": h_emp,
                          "energy": e_emp, "variational_gap": abs(h_emp + e_emp - state.log_rho),
                          "holonomy_defect": H.holonomy_defect(emp)}}
    return out


def cmd_entropy(cfg: RunConfig, ifs, run: Run) -> dict:
    prm = cfg.params
    nifs, pair = _normalized(ifs, prm)
    fixed = M.hutchinson_fixed_point(nifs, tol=1e-12)
    mu_hat = H.holonomic_lift(nifs, fixed.measure)
    extra = []
    if isinstance(ifs, PotentialIFS) and pair is not None:
        extra.append(T.optimal_function(ifs, pair))
    dictionary = _dictionary(cfg, ifs, extra)
    h_a, h_v = H.entropy_interval(mu_hat, dictionary)
    mu_hat.disintegration.to_csv(run.path("disintegration.csv"), ifs.grid)
    return {"h_a": h_a, "h_v_interval": [h_a, h_v], "ln_n": math.log(ifs.n),
            "optimal_function_in_dictionary": bool(extra), "dictionary_size": len(dictionary),
            "holonomy_defect": H.holonomy_defect(mu_hat), "fixed_point": fixed.to_dict()}


def cmd_chaos_game(cfg: RunConfig, ifs, run: Run) -> dict:
    prm = cfg.params
    nifs, _ = _normalized(ifs, prm)
    x0 = prm["x0"] or [0.5] * ifs.dim
    orbit = M.chaos_game(nifs, x0, prm["particles"], seed=prm["seed"])
    orbit.to_csv(run.path("orbit.csv"))
    emp = H.empirical_holonomic(orbit, ifs)
    nu = orbit.empirical()
    moments = {f"x{k + 1}^{j}": nu.moment(j, k) for k in range(ifs.dim) for j in (1, 2, 3)}
    return {"steps": prm["particles"], "seed": prm["seed"], "x0": list(x0), "moments": moments,
            "holonomy_defect": H.holonomy_defect(emp), "average_entropy": H.average_entropy(emp)}


def cmd_verify(cfg: RunConfig, ifs, run: Run) -> dict:
    checks = run_suite(cfg, log=print)
    out = {"checks": [c.to_dict() for c in checks], "passed": sum(c.passed for c in checks),
           "total": len(checks)}
    if not all(c.passed for c in checks):
        failed = [c.name for c in checks if not c.passed]
        raise SolverFailure(f"{len(failed)} check(s) failed: {', '.join(failed)}", out)
    return out


def cmd_probe(cfg: RunConfig, ifs, run: Run) -> dict:
    prm = cfg.params
    if not isinstance(ifs, PotentialIFS):
        raise ConfigError("weights", "probe needs a potential ({\"potential\": expr})")
    etas = cfg.probe.get("eta") or {"one": "1"}
    ts = cfg.probe.get("t") or [1e-2, 1e-3, 1e-4]
    try:
        state = P.equilibrium(ifs, tol=1e-12, max_iter=prm["max_iter"], n_max=prm["n_max"])
        res = P.gateaux_probe(ifs, etas, ts, state=state, tol=1e-12)
    except P.NoEigenfunctionError as exc:
        raise SolverFailure(str(exc), {"a_N_spread": exc.spread}) from exc
    res.to_csv(run.path("probe.csv"))
    return {"probe": res.to_dict()}


HANDLERS = {
    "validate": cmd_validate, "pressure": cmd_pressure, "eigen": cmd_eigen, "normalize": cmd_normalize,
    "equilibrium": cmd_equilibrium, "entropy": cmd_entropy, "chaos-game": cmd_chaos_game,
    "verify": cmd_verify, "probe": cmd_probe,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ifsthermo",
        description="Pressure, eigen data, entropies and equilibrium states of weighted IFS.",
        epilog=f"CONFIG is a JSON file or fixture:NAME (bundled: {', '.join(list_fixtures())}).")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="path to a JSON config, or fixture:NAME")
    ap.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    ap.add_argument("--grid", type=int, help="grid points per axis")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--n-max", type=int, dest="n_max")
    ap.add_argument("--particles", type=int, help="chaos-game steps")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--k-max", type=int, dest="k_max", help="discount levels sigma_k = 1 - 2^-k")
    ap.add_argument("--threads", type=int, help="cap on numba worker threads")
    ap.add_argument("--allow-nonnegative", action="store_true", default=None,
                    help="accept zero weights (with a warning)")
    return ap


def _write_report(run: Run, report: dict) -> None:
    report["artifacts"] = sorted(set(run.artifacts + ["report.json"]))
    text = json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False)
    (run.out / "report.json").write_text(text + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
    report = {"command": args.command, "version": __version__}
    try:
        cfg = load_config(args.config)
        cfg = with_overrides(cfg, grid=args.grid, tol=args.tol, n_max=args.n_max, particles=args.particles,
                             seed=args.seed, k_max=args.k_max, threads=args.threads,
                             allow_nonnegative=args.allow_nonnegative)
        _kernels.set_threads(cfg.params["threads"])
        report["config"] = cfg.to_dict()
        ifs = cfg.build()
        check = validate(ifs, allow_nonnegative=cfg.params["allow_nonnegative"], seed=cfg.params["seed"])
        if not check.valid and args.command != "validate":
            raise ConfigError("maps/weights", "; ".join(check.errors))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(out_dir)
    try:
        report["result"] = HANDLERS[args.command](cfg, ifs, run)
        status = EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        report.update(status="config_error", error=str(exc))
        status = EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        report.update(status="solver_failure", error=str(exc), result=exc.result)
        status = EXIT_SOLVER
    else:
        report["status"] = "ok"
    report["exit_code"] = status
    _write_report(run, report)
    if status == EXIT_OK:
        print(f"{args.command}: ok ({run.out / 'report.json'})")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

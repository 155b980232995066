"""JSON run configuration.

Schema::

    {
      "name": "dyadic-exp",                      # optional
      "dimension": 1,
      "grid": 1025,
      "maps": [["x1/2"], ["x1/2 + 1/2"]],        # one list of component expressions per map
      "weights": ["..."] | {"potential": "exp(x1)"},
      "params": {"tol": 1e-8, "n_max": 60, "particles": 1000000, "seed": 42,
                 "k_max": 20, "threads": null, "x0": [0.5], "allow_nonnegative": false},
      "probe": {"eta": {"sin": "sin(pi*x1)"}, "t": [0.01, 0.001, 0.0001]},
      "entropy_dictionary": ["1 + x1"],           # extra positive test functions
      "verify": {"wordsum_grid": 2049, "wordsum_points": [[0.0], [0.5]], "wordsum_nmax": 10,
                 "empirical_resolution": 17}            # cells per axis for chaos-game entropies
    }
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import expr as E
from .grid import Grid
from .ifs import IFSValidationError, PotentialIFS, WeightedIFS

__all__ = ["ConfigError", "RunConfig", "load_config", "DEFAULT_PARAMS", "fixture_path", "list_fixtures"]

DEFAULT_GRID = 1025
DEFAULT_PARAMS = {
    "tol": 1e-8,
    "n_max": 60,
    "particles": 10 ** 6,
    "seed": 42,
    "k_max": 20,
    "threads": None,
    "x0": None,
    "allow_nonnegative": False,
    "max_iter": 1000,
}


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"config field '{field_name}': {message}")


@dataclass
class RunConfig:
    dimension: int
    grid: int
    maps: list
    weights: list | None = None
    potential: str | None = None
    name: str = ""
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    probe: dict = field(default_factory=dict)
    entropy_dictionary: list = field(default_factory=list)
    verify: dict = field(default_factory=dict)
    source: str = ""

    def build(self, grid: int | None = None) -> WeightedIFS:
        """The weighted system (a :class:`PotentialIFS` when a potential is given)."""
        g = Grid(self.dimension, grid or self.grid)
        try:
            if self.potential is not None:
                return PotentialIFS(g, self.maps, self.potential)
            return WeightedIFS(g, self.maps, self.weights)
        except E.ExprSyntaxError as exc:
            raise ConfigError("maps/weights", str(exc)) from exc
        except IFSValidationError as exc:
            raise ConfigError("maps/weights", str(exc)) from exc

    @property
    def has_potential(self) -> bool:
        return self.potential is not None

    def to_dict(self) -> dict:
        out = {"name": self.name, "dimension": self.dimension, "grid": self.grid, "maps": self.maps,
               "weights": {"potential": self.potential} if self.potential is not None else self.weights,
               "params": self.params}
        if self.probe:
            out["probe"] = self.probe
        if self.entropy_dictionary:
            out["entropy_dictionary"] = self.entropy_dictionary
        if self.verify:
            out["verify"] = self.verify
        return out


def _require(data, key, kind):
    if key not in data:
        raise ConfigError(key, "missing")
    val = data[key]
    if not isinstance(val, kind) or isinstance(val, bool):
        raise ConfigError(key, f"expected {kind.__name__ if isinstance(kind, type) else kind}, got {type(val).__name__}")
    return val


def _check_expr(field_name, src, dim):
    if not isinstance(src, str):
        raise ConfigError(field_name, f"expected an expression string, got {src!r}")
    try:
        E.parse(src, dim)
    except E.ExprSyntaxError as exc:
        raise ConfigError(field_name, str(exc)) from exc


def parse_config(data: dict, source: str = "") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    dim = _require(data, "dimension", int)
    if dim not in (1, 2):
        raise ConfigError("dimension", f"must be 1 or 2, got {dim}")
    m = data.get("grid", DEFAULT_GRID)
    if not isinstance(m, int) or isinstance(m, bool) or m < 2:
        raise ConfigError("grid", f"must be an integer >= 2, got {m!r}")
    maps = _require(data, "maps", list)
    if not maps:
        raise ConfigError("maps", "at least one map is required")
    norm_maps = []
    for i, comps in enumerate(maps):
        if isinstance(comps, str):
            comps = [comps]
        if not isinstance(comps, list) or len(comps) != dim:
            raise ConfigError(f"maps[{i}]", f"expected a list of {dim} expression(s)")
        for k, c in enumerate(comps):
            _check_expr(f"maps[{i}][{k}]", c, dim)
        norm_maps.append(list(comps))
    if "weights" not in data:
        raise ConfigError("weights", "missing")
    w = data["weights"]
    weights = potential = None
    if isinstance(w, dict):
        if set(w) != {"potential"}:
            raise ConfigError("weights", "object form must be {\"potential\": expr}")
        _check_expr("weights.potential", w["potential"], dim)
        potential = w["potential"]
    elif isinstance(w, list):
        if len(w) != len(norm_maps):
            raise ConfigError("weights", f"{len(norm_maps)} maps but {len(w)} weights")
        for i, s in enumerate(w):
            _check_expr(f"weights[{i}]", s, dim)
        weights = list(w)
    else:
        raise ConfigError("weights", "expected a list of expressions or {\"potential\": expr}")
    params = dict(DEFAULT_PARAMS)
    extra = data.get("params", {})
    if not isinstance(extra, dict):
        raise ConfigError("params", "expected an object")
    unknown = set(extra) - set(DEFAULT_PARAMS)
    if unknown:
        raise ConfigError(f"params.{sorted(unknown)[0]}", "unknown parameter")
    params.update(extra)
    _check_params(params, dim)
    probe = data.get("probe", {})
    if not isinstance(probe, dict):
        raise ConfigError("probe", "expected an object")
    for name, src in probe.get("eta", {}).items():
        _check_expr(f"probe.eta.{name}", src, dim)
    ent = data.get("entropy_dictionary", [])
    if not isinstance(ent, list):
        raise ConfigError("entropy_dictionary", "expected a list of expressions")
    for i, s in enumerate(ent):
        _check_expr(f"entropy_dictionary[{i}]", s, dim)
    verify = data.get("verify", {})
    if not isinstance(verify, dict):
        raise ConfigError("verify", "expected an object")
    return RunConfig(dimension=dim, grid=m, maps=norm_maps, weights=weights, potential=potential,
                     name=str(data.get("name", "")), params=params, probe=probe,
                     entropy_dictionary=ent, verify=verify, source=source)


def _check_params(params, dim):
    def positive(key, kind=(int, float)):
        v = params[key]
        if not isinstance(v, kind) or isinstance(v, bool) or v <= 0:
            raise ConfigError(f"params.{key}", f"must be positive, got {v!r}")

    positive("tol")
    for key in ("n_max", "particles", "k_max", "max_iter"):
        positive(key, int)
    if not isinstance(params["seed"], int) or isinstance(params["seed"], bool):
        raise ConfigError("params.seed", "must be an integer")
    if params["threads"] is not None:
        positive("threads", int)
    x0 = params["x0"]
    if x0 is not None:
        if not isinstance(x0, list) or len(x0) != dim or not all(isinstance(v, (int, float)) for v in x0):
            raise ConfigError("params.x0", f"expected a list of {dim} numbers")
        if not all(0.0 <= v <= 1.0 for v in x0):
            raise ConfigError("params.x0", "must lie in [0,1]^d")


def load_config(path) -> RunConfig:
    """Read a config file; ``fixture:NAME`` resolves to a bundled fixture."""
    path = fixture_path(path[len("fixture:"):]) if str(path).startswith("fixture:") else Path(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_config(data, source=str(path))


def fixture_path(name: str) -> Path:
    p = resources.files("ifsthermo") / "fixtures" / f"{name}.json"
    if not p.is_file():
        raise ConfigError("<file>", f"no bundled fixture named {name!r}")
    return Path(str(p))


def list_fixtures() -> list:
    base = resources.files("ifsthermo") / "fixtures"
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".json"))


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    out = copy.deepcopy(cfg)
    for key, val in overrides.items():
        if val is None:
            continue
        if key == "grid":
            out.grid = int(val)
        else:
            out.params[key] = val
    _check_params(out.params, out.dimension)
    if out.grid < 2:
        raise ConfigError("grid", f"must be an integer >= 2, got {out.grid}")
    return out

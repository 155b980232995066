import json

import pytest

from ifsthermo.config import ConfigError, list_fixtures, load_config, parse_config, with_overrides
from ifsthermo.ifs import PotentialIFS, WeightedIFS

BASE = {"dimension": 1, "maps": [["x1/2"], ["x1/2 + 1/2"]], "weights": ["1/2", "1/2"]}


def cfg(**changes):
    data = json.loads(json.dumps(BASE))
    data.update(changes)
    return data


def test_defaults():
    c = parse_config(cfg())
    assert c.grid == 1025
    assert c.params["tol"] == 1e-8 and c.params["n_max"] == 60
    assert c.params["particles"] == 10 ** 6 and c.params["seed"] == 42 and c.params["k_max"] == 20
    assert isinstance(c.build(), WeightedIFS) and not c.has_potential


def test_potential_form():
    c = parse_config(cfg(weights={"potential": "exp(x1)"}))
    assert isinstance(c.build(65), PotentialIFS)


def test_bare_string_map():
    assert parse_config(cfg(maps=["x1/2", "x1/2 + 1/2"])).maps == BASE["maps"]


@pytest.mark.parametrize("change, field", [
    ({"dimension": 3}, "dimension"),
    ({"grid": 1}, "grid"),
    ({"maps": []}, "maps"),
    ({"maps": [["x1/2", "x1"]]}, "maps[0]"),
    ({"maps": [["x1/"], ["x1"]]}, "maps[0][0]"),
    ({"weights": ["1"]}, "weights"),
    ({"weights": ["1", "foo"]}, "weights[1]"),
    ({"weights": {"psi": "1"}}, "weights"),
    ({"params": {"tol": -1}}, "params.tol"),
    ({"params": {"bogus": 1}}, "params.bogus"),
    ({"params": {"x0": [2.0]}}, "params.x0"),
    ({"params": {"seed": "a"}}, "params.seed"),
    ({"probe": {"eta": {"a": "x3"}}}, "probe.eta.a"),
])
def test_field_errors(change, field):
    with pytest.raises(ConfigError) as info:
        parse_config(cfg(**change))
    assert info.value.field == field
    assert field in str(info.value)


def test_missing_key():
    data = cfg()
    del data["weights"]
    with pytest.raises(ConfigError, match="weights"):
        parse_config(data)


def test_files(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg()))
    assert load_config(p).source == str(p)
    p.write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(p)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")


def test_fixtures():
    names = list_fixtures()
    for name in ("dyadic_exp", "flip_balanced", "flip_unbalanced", "cantor", "reflection"):
        assert name in names
    for name in names:
        load_config(f"fixture:{name}").build()
    with pytest.raises(ConfigError):
        load_config("fixture:nothing")


def test_overrides():
    c = parse_config(cfg())
    d = with_overrides(c, grid=33, tol=1e-6, seed=None)
    assert d.grid == 33 and d.params["tol"] == 1e-6 and d.params["seed"] == 42
    assert c.grid == 1025
    with pytest.raises(ConfigError):
        with_overrides(c, particles=0)

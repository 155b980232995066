import csv
import json
import math
import subprocess
import sys

import pytest

from ifsthermo import cli


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


def test_pressure_unit_potential(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dimension": 1, "grid": 65, "maps": [["x1/2"], ["x1/2 + 1/2"]],
                               "weights": {"potential": "1"}}))
    code, rep, out = run(tmp_path, "pressure", str(cfg))
    assert code == 0 and rep["status"] == "ok"
    assert abs(rep["result"]["pressure"]["pressure"] - math.log(2)) <= 1e-10
    assert (out / "a_N.csv").exists()


def test_eigen_unbalanced_exit_2(tmp_path, capsys):
    code, rep, _ = run(tmp_path, "eigen", "fixture:flip_unbalanced", "--n-max", "40")
    assert code == 2
    assert "no positive eigenfunction" in capsys.readouterr().err
    assert rep["status"] == "solver_failure"
    assert rep["result"]["a_N_spread"] > 0.1
    assert rep["result"]["eigen"]["converged"] is False


def test_eigen_dyadic(tmp_path):
    code, rep, out = run(tmp_path, "eigen", "fixture:dyadic_exp", "--grid", "257")
    assert code == 0
    assert rep["result"]["eigen"]["rho"] == pytest.approx(1 + math.e, rel=1e-5)
    rows = list(csv.reader(open(out / "eigenfunction.csv")))
    assert rows[0] == ["x1", "h", "rho", "residual"] and len(rows) == 258
    assert (out / "eigenmeasure.csv").exists()


def test_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"dimension": 1, "maps": [["x1/2 +"]], "weights": ["1"]}))
    code, rep, _ = run(tmp_path, "pressure", str(cfg))
    assert code == 1 and rep is None
    assert "maps[0][0]" in capsys.readouterr().err
    assert run(tmp_path, "pressure", str(tmp_path / "missing.json"))[0] == 1


def test_invalid_system_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "esc.json"
    cfg.write_text(json.dumps({"dimension": 1, "grid": 17, "maps": [["2*x1"]], "weights": ["1"]}))
    assert run(tmp_path, "pressure", str(cfg))[0] == 1
    assert "escapes" in capsys.readouterr().err
    assert run(tmp_path, "validate", str(cfg), name="v")[0] == 1


def test_allow_nonnegative(tmp_path):
    cfg = tmp_path / "z.json"
    cfg.write_text(json.dumps({"dimension": 1, "grid": 17, "maps": [["x1"], ["1 - x1"]],
                               "weights": {"potential": "x1"}}))
    assert run(tmp_path, "validate", str(cfg))[0] == 1
    code, rep, _ = run(tmp_path, "validate", str(cfg), "--allow-nonnegative", name="ok")
    assert code == 0 and rep["result"]["validation"]["warnings"]


def test_unknown_command():
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate", "fixture:cantor"])
    assert info.value.code == 2


def test_deterministic_report(tmp_path):
    args = ("chaos-game", "fixture:dyadic_exp", "--particles", "20000", "--grid", "129")
    _, _, a = run(tmp_path, *args, name="a")
    _, _, b = run(tmp_path, *args, name="b")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "orbit.csv").read_bytes() == (b / "orbit.csv").read_bytes()


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "envout"))
    assert cli.main(["normalize", "fixture:cantor", "--grid", "65"]) == 0
    rows = list(csv.reader(open(tmp_path / "envout" / "probabilities.csv")))
    assert rows[0] == ["x1", "p_0", "p_1"]


@pytest.mark.parametrize("command, key", [
    ("entropy", "h_a"), ("probe", "probe"), ("equilibrium", "equilibrium"), ("normalize", "sum_defect"),
])
def test_commands(tmp_path, command, key):
    code, rep, _ = run(tmp_path, command, "fixture:dyadic_exp", "--grid", "257", "--particles", "50000")
    assert code == 0 and key in rep["result"]


def test_entropy_interval(tmp_path):
    code, rep, _ = run(tmp_path, "entropy", "fixture:dyadic_exp")
    r = rep["result"]
    lo, hi = r["h_v_interval"]
    assert 0 <= lo <= hi + 1e-9 <= r["ln_n"] + 2e-9
    assert hi - lo <= 1e-4 and r["optimal_function_in_dictionary"]


def test_equilibrium_needs_potential(tmp_path):
    assert run(tmp_path, "equilibrium", "fixture:cantor")[0] == 1


def test_verify_dyadic_exp(tmp_path, capsys):
    code, rep, _ = run(tmp_path, "verify", "fixture:dyadic_exp")
    lines = capsys.readouterr().out.splitlines()
    assert code == 0, "\n".join(lines)
    assert rep["result"]["passed"] == rep["result"]["total"]
    assert all(line.startswith("[PASS]") for line in lines if line.startswith("["))


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ifsthermo", "pressure", "fixture:reflection",
                           "--grid", "33", "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    rep = json.loads((tmp_path / "m" / "report.json").read_text())
    assert rep["result"]["pressure"]["pressure"] == pytest.approx(math.log(2), abs=1e-12)

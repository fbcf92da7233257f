import copy
import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from fracpseudo.cli import main
from fracpseudo.config import CONFIG_SCHEMA, ConfigError, load_config, parse_config
from fracpseudo.picard_solver import REPORT_SCHEMA
from fracpseudo.runner import SWEEP_COLUMNS

CONFIGS = Path(__file__).resolve().parents[1] / "scripts" / "configs"

BASE = {
    "problem": {"domain": {"kind": "rectangle", "lengths": [math.pi, math.pi]}, "K": 8, "alpha": 0.5,
                "nonlinearity": {"kind": "advection", "eta": [1.0, 0.0]},
                "u0": {"profile": "single_mode", "k": [1, 1], "amplitude": 1.0}},
    "grid": {"T": 1.0, "N": 16, "r": 2.0},
}


def write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def variant(**changes):
    d = copy.deepcopy(BASE)
    for path, v in changes.items():
        node = d
        keys = path.split("__")
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = v
    return d


# ---- parsing ----------------------------------------------------------------------------

def test_defaults_filled_in():
    cfg = parse_config(BASE)
    assert cfg.solver.mode == "solve" and cfg.solver.sigma == "auto"
    assert cfg.output.formats == ["csv", "json"]
    assert cfg.to_dict()["schema"] == CONFIG_SCHEMA


@pytest.mark.parametrize("changes,needle", [
    ({"problem__alpha": 0.0}, "alpha"),
    ({"problem__alpha": 1.5}, "alpha"),
    ({"problem__K": 2.5}, "integer"),
    ({"grid__N": 1}, "grid.N"),
    ({"grid__T": -1.0}, "grid.T"),
    ({"grid__bogus": 1}, "unknown"),
    ({"solver__mode": "march"}, "solver.mode"),
    ({"solver__sigma": -2.0}, "solver.sigma"),
    ({"problem__u0": {"profile": "single_mode", "k": [9, 9]}}, "not among"),
    ({"problem__u0": {"profile": "gaussian"}}, "profile"),
    ({"problem__nonlinearity": {"kind": "advection", "eta": [1.0]}}, "eta has 1 components"),
    ({"problem__nonlinearity": {"kind": "exponential"}, "problem__alpha": 0.9}, "hypothesis"),
    ({"output__formats": ["xml"]}, "formats"),
    ({"schema": "other/2"}, "schema"),
])
def test_invalid_configs_name_the_problem(changes, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(variant(**changes))


def test_missing_problem():
    with pytest.raises(ConfigError, match="problem"):
        parse_config({"grid": {}})


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError, match="valid JSON"):
        load_config(tmp_path / "bad.json")


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.0), st.integers(2, 200), st.floats(1.0, 4.0), st.integers(1, 30),
       st.sampled_from(["solve", "extend"]))
def test_config_round_trip_is_idempotent(alpha, N, r, K, mode):
    d = variant(problem__alpha=alpha, grid__N=N, grid__r=r, problem__K=K, solver__mode=mode,
                problem__u0={"profile": "random", "seed": 3, "decay": 2.0, "amplitude": 0.5})
    once = parse_config(d).to_dict()
    twice = parse_config(json.loads(json.dumps(once))).to_dict()
    assert once == twice


def test_shipped_configs_parse():
    for p in sorted(CONFIGS.glob("*.json")):
        if p.stem == "polynomial_bad":
            continue
        load_config(p)


# ---- solve -------------------------------------------------------------------------------

def test_cli_linear_solve(tmp_path, capsys):
    code = main(["solve", "--config", str(CONFIGS / "linear.json"), "--out", str(tmp_path)])
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "trajectory.csv")))
    assert list(rows[0]) == ["node", "t", "norm_D0", "norm_D1", "norm_Dnu"]
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["schema"] == REPORT_SCHEMA and rep["status"] == "converged" and rep["iterations"] == 1
    assert rep["extra"]["config"]["schema"] == CONFIG_SCHEMA
    assert "status=converged" in capsys.readouterr().out


def test_cli_advection_converges(tmp_path):
    assert main(["solve", "--config", write(tmp_path, BASE), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["converged"] and rep["sigma"] > 0


def test_cli_nonconvergence_exit_code(tmp_path):
    d = variant(solver__sigma=0.0, solver__max_iter=2, solver__tol=1e-14)
    assert main(["solve", "--config", write(tmp_path, d), "--out", str(tmp_path / "o")]) == 3
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["status"] == "nonconvergence"


def test_cli_blowup_exit_code(tmp_path, capsys):
    code = main(["solve", "--config", str(CONFIGS / "bbm_blowup.json"), "--out", str(tmp_path)])
    assert code == 2
    rep = json.loads((tmp_path / "report.json").read_text())
    lo, hi = rep["blowup"]["T_max_low"], rep["blowup"]["T_max_high"]
    assert 0 < lo < hi and hi - lo <= 0.1
    assert "T_max in" in capsys.readouterr().out


def test_cli_polynomial_hypothesis_violation(tmp_path, capsys):
    code = main(["solve", "--config", str(CONFIGS / "polynomial_bad.json"), "--out", str(tmp_path)])
    assert code == 1
    assert "p/(p-1) < 1/alpha" in capsys.readouterr().err
    assert not any(tmp_path.iterdir())


def test_cli_smallness_violation_and_override(tmp_path, capsys):
    d = variant(problem__domain={"kind": "interval", "lengths": [math.pi]}, problem__K=8, problem__alpha=0.4,
                problem__nonlinearity={"kind": "polynomial", "p": 3.0, "nu": 0.1},
                problem__u0={"profile": "single_mode", "k": 1, "amplitude": 50.0})
    assert main(["solve", "--config", write(tmp_path, d), "--out", str(tmp_path / "a")]) == 1
    assert "small-data" in capsys.readouterr().err
    d["solver"] = {"smallness_override": True, "max_iter": 3}
    assert main(["solve", "--config", write(tmp_path, d), "--out", str(tmp_path / "b")]) in (0, 2, 3)


def test_cli_missing_config_file(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 1
    assert "not found" in capsys.readouterr().err


@pytest.mark.parametrize("seed", ["-1", str(2 ** 64)])
def test_cli_seed_range(tmp_path, seed):
    assert main(["solve", "--config", write(tmp_path, BASE), "--seed", seed, "--out", str(tmp_path)]) == 1


def test_seed_changes_random_data(tmp_path):
    d = variant(problem__u0={"profile": "random", "seed": 0, "decay": 2.0, "amplitude": 0.5})
    p = write(tmp_path, d)
    norms = []
    for s in ("1", "2", "1"):
        assert main(["solve", "--config", p, "--seed", s, "--out", str(tmp_path / s)]) == 0
        rows = list(csv.DictReader(open(tmp_path / s / "trajectory.csv")))
        norms.append(rows[0]["norm_D1"])
    assert norms[0] == norms[2] != norms[1]


def test_cli_rejects_zero_threads(tmp_path):
    assert main(["sweep", "--config", write(tmp_path, BASE), "--threads", "0"]) == 1


def test_coefficient_snapshots(tmp_path):
    d = variant(output={"coefficients": True, "formats": ["csv"]})
    assert main(["solve", "--config", write(tmp_path, d), "--out", str(tmp_path / "o")]) == 0
    assert len(list((tmp_path / "o" / "coefficients").glob("node_*.csv"))) == 17
    assert not (tmp_path / "o" / "report.json").exists()


# ---- verify ----------------------------------------------------------------------------------

def test_verify_list(capsys):
    assert main(["verify", "--list"]) == 0
    names = capsys.readouterr().out.split()
    assert "mittag-leffler" in names and "q-decay" in names


def test_verify_writes_json(tmp_path):
    assert main(["verify", "quadrature", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert doc["schema"] == "fracpseudo.verify/1" and doc["passed"] is True
    assert set(doc["suites"]) == {"quadrature"}


def test_verify_unknown_suite(tmp_path, capsys):
    assert main(["verify", "no-such-suite", "--out", str(tmp_path)]) == 1


# ---- sweep -------------------------------------------------------------------------------------

def test_sweep_empty_range(tmp_path):
    d = variant(sweep={"alpha": []})
    assert main(["sweep", "--config", write(tmp_path, d), "--out", str(tmp_path)]) == 1
    d = copy.deepcopy(BASE)
    assert main(["sweep", "--config", write(tmp_path, d), "--out", str(tmp_path)]) == 1


def test_polynomial_sweep_outcomes(tmp_path):
    assert main(["sweep", "--config", str(CONFIGS / "polynomial_sweep.json"), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert list(rows[0]) == SWEEP_COLUMNS
    assert [r["outcome"] for r in rows] == ["global", "invalid"] * 3
    assert all("small-data" in r["detail"] for r in rows if r["outcome"] == "invalid")


def test_sweep_deterministic_across_threads(tmp_path):
    d = variant(sweep={"alpha": [0.3, 0.7], "scale": [0.5, 1.0]})
    p = write(tmp_path, d)
    assert main(["sweep", "--config", p, "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(["sweep", "--config", p, "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_text() == (tmp_path / "b" / "sweep.csv").read_text()


def test_sweep_over_p_requires_polynomial(tmp_path):
    d = variant(sweep={"p": [3.0]})
    assert main(["sweep", "--config", write(tmp_path, d), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert rows[0]["outcome"] == "invalid" and "polynomial" in rows[0]["detail"]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "fracpseudo", "solve", "--config", str(CONFIGS / "linear.json"),
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr

import csv
import json
import pathlib
import subprocess
import sys

import pytest

import cbplab as cb
from cbplab.cli import main

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"
MODELS = DATA / "models"
DEMO = DATA / "demo_series.csv"


def _rows(path):
    with open(path, newline="") as fh:
        return [r for r in csv.reader(fh)]


# --- simulate ---


def test_simulate_writes_trajectory(tmp_path):
    out = tmp_path / "traj.csv"
    code = main(["simulate", "--model", str(MODELS / "three_point.json"),
                 "--n", "10", "--seed", "7", "--out", str(out)])
    assert code == 0
    traj = cb.read_trajectory_csv(str(out))
    assert traj.sizes.size == 11
    assert traj.sizes[0] == 20
    assert traj.progenitors is not None


def test_simulate_same_seed_same_bytes(tmp_path):
    args = ["simulate", "--model", str(MODELS / "three_point.json"),
            "--n", "12", "--seed", "5"]
    a, b, c = (tmp_path / name for name in ("a.csv", "b.csv", "c.csv"))
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["simulate", "--model", str(MODELS / "three_point.json"),
                 "--n", "12", "--seed", "6", "--out", str(c)]) == 0
    assert a.read_bytes() != c.read_bytes()


def test_simulate_batch_paths(tmp_path):
    out = tmp_path / "runs.csv"
    code = main(["simulate", "--model", str(MODELS / "three_point.json"),
                 "--n", "6", "--seed", "3", "--paths", "3",
                 "--out", str(out)])
    assert code == 0
    series = [cb.read_trajectory_csv(str(tmp_path / f"runs-{i:04d}.csv"))
              for i in range(3)]
    assert all(t.sizes.size == 7 for t in series)
    assert not all((series[0].sizes == t.sizes).all() for t in series[1:])


def test_simulate_missing_argument_exits_2(tmp_path, capsys):
    code = main(["simulate", "--model", str(MODELS / "three_point.json"),
                 "--seed", "1", "--out", str(tmp_path / "t.csv")])
    assert code == 2
    assert "n: required" in capsys.readouterr().err


def test_unknown_flag_exits_2(tmp_path):
    code = main(["simulate", "--bogus", "1"])
    assert code == 2


def test_unknown_command_exits_2():
    assert main(["frobnicate"]) == 2


def test_missing_model_file_exits_2(tmp_path):
    code = main(["simulate", "--model", str(tmp_path / "nope.json"),
                 "--n", "5", "--seed", "1",
                 "--out", str(tmp_path / "t.csv")])
    assert code == 2


def test_malformed_model_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": "cbp-model/v1",
                               "offspring": {"family": "warp"},
                               "control": {"family": "deterministic"},
                               "z0": 1}))
    code = main(["simulate", "--model", str(bad), "--n", "5", "--seed", "1",
                 "--out", str(tmp_path / "t.csv")])
    assert code == 2
    assert "offspring.family" in capsys.readouterr().err


# --- estimate ---


def test_estimate_runs_all_applicable(tmp_path):
    out = tmp_path / "est.csv"
    code = main(["estimate", "--in", str(DEMO), "--out", str(out),
                 "--model", str(MODELS / "three_point.json"),
                 "--m", "1.0433", "--g", "1.0433", "--alpha", "1.0",
                 "--q", "0.5"])
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["estimator", "value", "n_terms", "seed"]
    names = {r[0] for r in rows[1:]}
    assert "bgwp_mean" in names
    assert "growth_rate_estimate" in names
    assert "mean_observed_progenitors" in names
    assert "power_drift_estimate" in names
    assert "var_known_control_known_mean" in names
    assert "control_noise_observed_known_slope" in names


def test_estimate_seventeen_digit_roundtrip(tmp_path):
    out = tmp_path / "est.csv"
    assert main(["estimate", "--in", str(DEMO), "--out", str(out)]) == 0
    traj = cb.read_trajectory_csv(str(DEMO))
    want = cb.bgwp_mean(traj).value
    row = next(r for r in _rows(out)[1:] if r[0] == "bgwp_mean")
    assert float(row[1]) == want


def test_estimate_nothing_computable_exits_1(tmp_path, capsys):
    src = tmp_path / "zero.csv"
    src.write_text("size\n0\n0\n0\n")
    code = main(["estimate", "--in", str(src),
                 "--out", str(tmp_path / "est.csv")])
    assert code == 1
    assert "no estimator was computable" in capsys.readouterr().err


# --- fit ---


def test_fit_simplex_family(tmp_path):
    out = tmp_path / "fit.json"
    code = main(["fit", "--in", str(DEMO),
                 "--model", str(MODELS / "three_point.json"),
                 "--family", "simplex", "--K", "2", "--method", "pgf",
                 "--starts", "1", "--seed", "0", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == "cbp-fit/v1"
    assert doc["family"] == "offspring_simplex"
    assert doc["converged"] is True
    assert 0.0 < doc["params"]["p0"] < 0.5


def test_fit_poisson_family(tmp_path):
    traj_path = tmp_path / "t.csv"
    assert main(["simulate", "--model", str(MODELS / "growth_linear.json"),
                 "--n", "8", "--seed", "11", "--out", str(traj_path)]) == 0
    out = tmp_path / "fit.json"
    code = main(["fit", "--in", str(traj_path),
                 "--model", str(MODELS / "growth_linear.json"),
                 "--family", "poisson", "--method", "pgf", "--starts", "2",
                 "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["family"] == "poisson_offspring"
    assert 0.5 < doc["params"]["lam"] < 1.5


def test_fit_unknown_family_exits_2(tmp_path):
    code = main(["fit", "--in", str(DEMO),
                 "--model", str(MODELS / "three_point.json"),
                 "--family", "weibull", "--out", str(tmp_path / "f.json")])
    assert code == 2


# --- bootstrap ---


def test_bootstrap_command(tmp_path):
    traj_path = tmp_path / "t.csv"
    assert main(["simulate", "--model", str(MODELS / "growth_linear.json"),
                 "--n", "6", "--seed", "21", "--out", str(traj_path)]) == 0
    fit_path = tmp_path / "fit.json"
    assert main(["fit", "--in", str(traj_path),
                 "--model", str(MODELS / "growth_linear.json"),
                 "--family", "poisson", "--method", "pgf", "--starts", "1",
                 "--out", str(fit_path)]) == 0
    boot = tmp_path / "boot.csv"
    ci = tmp_path / "ci.json"
    code = main(["bootstrap", "--fit", str(fit_path),
                 "--model", str(MODELS / "growth_linear.json"),
                 "--n", "6", "--B", "4", "--seed", "3",
                 "--out", str(boot), "--ci-out", str(ci)])
    assert code == 0
    rows = _rows(boot)
    assert rows[0] == ["replicate", "lam"]
    assert len(rows) == 5
    doc = json.loads(ci.read_text())
    assert doc["B"] == 4
    lo, hi = doc["ci"]["lam"]
    assert lo <= hi


# --- mse-curve ---


def test_mse_curve_command(tmp_path):
    out = tmp_path / "mse.csv"
    code = main(["mse-curve", "--model", str(MODELS / "growth_linear.json"),
                 "--family", "poisson", "--lengths", "5,8", "--B", "3",
                 "--seed", "1", "--estimator", "moment-based",
                 "--out", str(out)])
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["length", "param", "mse", "B", "seed"]
    assert [r[0] for r in rows[1:]] == ["5"] * 3 + ["8"] * 3
    assert {r[1] for r in rows[1:]} == {"lam", "m", "sigma2"}


def test_mse_curve_support_mismatch_exits_2(tmp_path):
    code = main(["mse-curve", "--model", str(MODELS / "bgwp_uniform04.json"),
                 "--family", "simplex", "--K", "2", "--lengths", "5,8",
                 "--B", "3", "--seed", "1",
                 "--out", str(tmp_path / "m.csv")])
    assert code == 2


# --- tvd-scan ---


def test_tvd_scan_footer_slope(tmp_path):
    out = tmp_path / "scan.csv"
    code = main(["tvd-scan", "--a", str(MODELS / "bgwp_poisson2.json"),
                 "--b", str(MODELS / "bgwp_uniform04.json"),
                 "--zmin", "16", "--zmax", "256", "--points", "5",
                 "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "z,tvd_exact,tvd_bound"
    body = [line.split(",") for line in lines[1:-1]]
    assert [r[0] for r in body] == ["16", "32", "64", "128", "256"]
    vals = [float(r[1]) for r in body]
    assert all(b > a for a, b in zip(vals[1:], vals))
    assert all(float(r[2]) >= float(r[1]) for r in body)
    assert lines[-1].startswith("# slope: ")
    slope = float(lines[-1].split(": ")[1])
    assert -0.7 <= slope <= -0.35


def test_tvd_scan_small_grid_exits_2(tmp_path):
    code = main(["tvd-scan", "--a", str(MODELS / "bgwp_poisson2.json"),
                 "--b", str(MODELS / "bgwp_uniform04.json"),
                 "--zmin", "16", "--zmax", "64", "--points", "3",
                 "--out", str(tmp_path / "s.csv")])
    assert code == 2


# --- bounds ---


def test_bounds_table(tmp_path):
    out = tmp_path / "bounds.csv"
    code = main(["bounds", "--chi", "0.2,0.2,0.2,0.2,0.2",
                 "--n", "4,16", "--out", str(out)])
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["n", "exact_tvd", "bound_value"]
    for row in rows[1:]:
        assert float(row[1]) <= float(row[2])


def test_bounds_without_increment_exits_2(tmp_path):
    code = main(["bounds", "--n", "4", "--out", str(tmp_path / "b.csv")])
    assert code == 2


# --- ident-check ---


def test_ident_check_known_control(tmp_path):
    out = tmp_path / "verdict.json"
    code = main(["ident-check", "--a", str(MODELS / "three_point_padded.json"),
                 "--b", str(MODELS / "four_point.json"),
                 "--scenario", "known-control", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["scenario"] == "KnownControl"
    assert doc["conditions_met"] is True
    assert "no weakly consistent estimator" in doc["conclusion"]


def test_ident_check_bad_scenario_exits_2(tmp_path):
    code = main(["ident-check", "--a", str(MODELS / "three_point.json"),
                 "--b", str(MODELS / "four_point.json"),
                 "--scenario", "sideways", "--out", str(tmp_path / "v.json")])
    assert code == 2


# --- moments ---


def test_moments_report(tmp_path):
    out = tmp_path / "moments.json"
    code = main(["moments", "--model", str(MODELS / "growth_linear.json"),
                 "--z", "50", "--zmax", "1024", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["offspring"]["mean"] == pytest.approx(1.0)
    assert doc["control_at_z"]["eps"] == pytest.approx(52.5)
    assert doc["growth_rate_at_z"] == pytest.approx(1.05)
    assert doc["regularity"]["supercritical"] is True


# --- config files ---


def test_config_fills_missing_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 12, "seed": 3}))
    out = tmp_path / "t.csv"
    code = main(["simulate", "--model", str(MODELS / "three_point.json"),
                 "--config", str(cfg), "--out", str(out)])
    assert code == 0
    assert cb.read_trajectory_csv(str(out)).sizes.size == 13


def test_cli_flag_beats_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 12, "seed": 3}))
    out = tmp_path / "t.csv"
    code = main(["simulate", "--model", str(MODELS / "three_point.json"),
                 "--config", str(cfg), "--n", "5", "--out", str(out)])
    assert code == 0
    assert cb.read_trajectory_csv(str(out)).sizes.size == 6


def test_config_unknown_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 12, "bogus": 1}))
    code = main(["simulate", "--model", str(MODELS / "three_point.json"),
                 "--config", str(cfg), "--seed", "1",
                 "--out", str(tmp_path / "t.csv")])
    assert code == 2
    assert "config.bogus" in capsys.readouterr().err


# --- module execution ---


def test_module_entry_point(tmp_path):
    out = tmp_path / "traj.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "cbplab.cli", "simulate",
         "--model", str(MODELS / "three_point.json"),
         "--n", "4", "--seed", "2", "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()

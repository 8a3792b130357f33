import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from krflab import integrator
from krflab.cli import ExperimentConfig, ConfigError, main
from krflab.integrator import StepFailure
from krflab.profile import read_profile_csv, write_profile_csv


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write_config(path, **fields):
    path.write_text(json.dumps(fields))
    return path


# ------------------------------------------------------------ singular-time

@pytest.mark.parametrize("h,e,T,scenario", [(3, 1, 1.0, "CollapseFiber"),
                                            (3, 0.5, 0.5, "ContractExceptional")])
def test_singular_time(capsys, h, e, T, scenario):
    code, out, _ = run_cli(capsys, "singular-time", "--m", 2, "--h", h, "--e", e)
    assert code == 0
    data = json.loads(out)
    assert data["T"] == T and data["scenario"] == scenario


def test_singular_time_rejects_non_kahler(capsys):
    code, _, err = run_cli(capsys, "singular-time", "--m", 2, "--h", 1, "--e", 2)
    assert code == 2 and "class not Kähler" in err


def test_console_script():
    exe = shutil.which("krflab")
    cmd = [exe] if exe else [sys.executable, "-m", "krflab.cli"]
    out = subprocess.run(cmd + ["singular-time", "--m", "3", "--h", "4", "--e", "2"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["T"] == 1.0


# ------------------------------------------------------------------- config

VALID = [
    {"m": 2, "h": 3.0, "e": 1.0},
    {"m": 2, "h": 3.0, "e": 0.5, "scenario": "ContractExceptional", "seed": 4,
     "flow": {"N": 1024, "L": 12.0}, "suite": ["schwarz", "volume_bound"]},
    {"m": 3, "h": 1.0, "e": 0.0, "scenario": "pm-validation",
     "samples": {"base_side": 2.0, "nB": 9, "nF": 5, "n_theta": 33}, "output": "x"},
]


@pytest.mark.parametrize("d", VALID)
def test_config_round_trip(d):
    cfg = ExperimentConfig.from_dict(d)
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("d", [
    {"m": 2, "h": 3.0, "e": 1.0, "colour": "red"},
    {"m": 2, "h": 3.0, "e": 1.0, "flow": {"speed": 2}},
    {"m": 2, "h": 3.0, "e": 1.0, "samples": {"nB": 10}},
    {"m": 2, "h": 3.0, "e": 1.0, "scenario": "ContractExceptional"},
    {"m": 2, "h": 3.0, "e": 1.0, "suite": ["nonsense"]},
    {"m": 2, "h": 3.0},
])
def test_config_rejects(d):
    with pytest.raises((ConfigError, ValueError)):
        ExperimentConfig.from_dict(d)


def test_run_config_errors_exit_2(capsys, tmp_path):
    bad = write_config(tmp_path / "c.json", m=2, h=3, e=1, unknown=1)
    assert run_cli(capsys, "run", "--config", bad)[0] == 2
    mismatch = write_config(tmp_path / "d.json", m=2, h=3, e=1, scenario="OtherBoundary")
    code, _, err = run_cli(capsys, "run", "--config", mismatch)
    assert code == 2 and "CollapseFiber" in err
    nk = write_config(tmp_path / "e.json", m=2, h=1, e=2)
    assert run_cli(capsys, "run", "--config", nk)[0] == 2
    assert run_cli(capsys, "run", "--config", tmp_path / "missing.json")[0] == 2


def test_run_exit_3_on_early_singularity(capsys, tmp_path, monkeypatch):
    real = integrator.step

    def failing(p, dt, *a, **kw):
        if p.t > 0.3:
            raise StepFailure("injected")
        return real(p, dt, *a, **kw)

    monkeypatch.setattr(integrator, "step", failing)
    cfg = write_config(tmp_path / "c.json", m=2, h=3, e=1, output=str(tmp_path / "out"),
                       flow={"N": 257, "L": 10.0})
    code, _, _ = run_cli(capsys, "run", "--config", cfg)
    assert code == 3
    meta = json.loads((tmp_path / "out" / "trajectory" / "trajectory.json").read_text())
    assert meta["completed"] is False


# ----------------------------------------------------------------- pipeline

@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    cfg = write_config(root / "collapse.json", m=2, h=3.0, e=1.0, scenario="CollapseFiber",
                       output=str(root / "out"), samples={"base_side": 20.0})
    assert main(["run", "--config", str(cfg), "--refined"]) == 0
    return root / "out"


def read_summary(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_pipeline_passes(capsys, pipeline):
    traj, ref = pipeline / "trajectory", pipeline / "trajectory_refined"
    code, _, err = run_cli(capsys, "monitors", "--traj", traj, "--refined", ref)
    assert code == 0, err
    rows = read_summary(traj / "monitors" / "summary.csv")
    assert list(rows[0]) == ["monitor", "paper_tag", "C_meas", "verdict"]
    assert rows and all(r["verdict"] == "pass" for r in rows)
    assert {"schwarz", "diam_rate", "class_boundary"} <= {r["monitor"] for r in rows}

    code, _, err = run_cli(capsys, "gh", "--traj", traj, "--base-side", 20, "--nB", 16, "--nF", 12)
    assert code == 0, err
    with open(traj / "gh" / "gh.csv", newline="") as fh:
        gh = list(csv.DictReader(fh))
    assert list(gh[0]) == ["t", "epsilon", "fiber_diam", "base_diam"]
    cert = json.loads((traj / "gh" / "gh_certificate.json").read_text())
    assert cert["verdict"] == "pass"

    code, out, _ = run_cli(capsys, "report", "--dir", pipeline)
    assert code == 0
    rep = json.loads(out)
    assert rep["all_pass"] and rep["gh"]["verdict"] == "pass"
    assert (pipeline / "report.json").read_text() == out


def test_monitor_output_is_deterministic(capsys, pipeline, tmp_path):
    traj = pipeline / "trajectory"
    for name in ("a", "b"):
        assert run_cli(capsys, "monitors", "--traj", traj, "--suite", "schwarz,volume_bound",
                       "--out", tmp_path / name)[0] == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_gh_output_is_deterministic(capsys, pipeline, tmp_path):
    traj = pipeline / "trajectory"
    for name in ("a", "b"):
        run_cli(capsys, "gh", "--traj", traj, "--nB", 4, "--nF", 5, "--n-theta", 17,
                "--seed", 3, "--out", tmp_path / name)
    for f in ("gh.csv", "gh_certificate.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_gh_small_base_fails_with_exit_4(capsys, pipeline, tmp_path):
    code, _, _ = run_cli(capsys, "gh", "--traj", pipeline / "trajectory", "--base-side", 1,
                         "--nB", 4, "--nF", 5, "--n-theta", 17, "--out", tmp_path)
    assert code == 4
    cert = json.loads((tmp_path / "gh_certificate.json").read_text())
    assert not cert["details"]["final_ok"] and cert["details"]["two_diam_bound_ok"]


def test_corrupted_directory_fails_monitors(capsys, pipeline, tmp_path):
    bad = tmp_path / "bad"
    shutil.copytree(pipeline / "trajectory", bad)
    snap = sorted((bad / "profiles").iterdir())[10]
    write_profile_csv(snap, read_profile_csv(snap).scaled(1.05))
    code, _, err = run_cli(capsys, "monitors", "--traj", bad)
    assert code == 4
    failed = [r["monitor"] for r in read_summary(bad / "monitors" / "summary.csv")
              if r["verdict"] == "fail"]
    assert "class_boundary" in failed and "monitor failures" in err


def test_non_monotone_snapshot_is_a_verdict(capsys, pipeline, tmp_path):
    bad = tmp_path / "bad"
    shutil.copytree(pipeline / "trajectory", bad)
    snap = sorted((bad / "profiles").iterdir())[10]
    p = read_profile_csv(snap)
    write_profile_csv(snap, p.replace(phi=np.where(np.arange(p.N) == 2000, np.nan, p.phi)))
    assert run_cli(capsys, "monitors", "--traj", bad)[0] == 4


def test_bad_trajectory_paths_exit_2(capsys, tmp_path, pipeline):
    assert run_cli(capsys, "monitors", "--traj", tmp_path / "nowhere")[0] == 2
    assert run_cli(capsys, "gh", "--traj", tmp_path)[0] == 2
    assert run_cli(capsys, "report", "--dir", tmp_path)[0] == 2
    code, _, err = run_cli(capsys, "monitors", "--traj", pipeline / "trajectory",
                           "--suite", "bogus", "--out", tmp_path / "m")
    assert code == 2 and "bogus" in err
    broken = tmp_path / "broken"
    shutil.copytree(pipeline / "trajectory", broken)
    (broken / "profiles" / "snap_0003.csv").unlink()
    assert run_cli(capsys, "monitors", "--traj", broken)[0] == 2


def test_validate_pm_defaults(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("KRF_THREADS", "1")
    code, out, _ = run_cli(capsys, "validate-pm", "--out", tmp_path)
    assert code == 0
    res = json.loads(out)["results"]
    assert all(r["base"] <= 1e-3 and r["ratio"] >= 3.5 for r in res.values())
    assert (tmp_path / "validate_pm.json").read_text() == out


def test_validate_pm_failure_exit_4(capsys, monkeypatch):
    monkeypatch.setattr("krflab.cli.max_error_vs_exact", lambda traj: np.ones(len(traj.snapshots)))
    monkeypatch.setenv("KRF_THREADS", "1")
    assert run_cli(capsys, "validate-pm", "--m", 2, "--N", 257, "--L", 10)[0] == 4

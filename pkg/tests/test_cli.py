import hashlib
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mixflow.cli import run_command
from mixflow.control import read_control
from mixflow.fieldio import read_field, read_trajectory


def digest(directory: Path) -> dict:
    return {str(p.relative_to(directory)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(directory.rglob("*")) if p.is_file()}


def test_bad_flag_is_usage_error(capsys):
    assert run_command(["mix", "--badflag"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_and_missing_required():
    assert run_command(["frobnicate"]) == 1
    assert run_command(["euler"]) == 1
    assert run_command([]) == 1


def test_help_exits_zero(capsys):
    assert run_command(["--help"]) == 0
    assert "make-field" in capsys.readouterr().out


def test_euler_example(tmp_path):
    out = tmp_path / "run"
    rc = run_command(["euler", "--init", "taylor-green", "--n", "64", "--T", "1", "--dt", "0.01",
                      "--out", str(out)])
    assert rc == 0
    times, vel = read_trajectory(out / "velocity")
    assert times[-1] == pytest.approx(1.0)
    assert (out / "energy.csv").exists()
    rec = json.loads((out / "run.json").read_text())
    assert rec["command"] == "euler" and rec["flags"]["dt"] == 0.01 and "version" in rec


def test_transfer_example(tmp_path):
    out = tmp_path / "run"
    rc = run_command(["transfer", "--rho-i", "stripe", "--rho-f", "stripe-shifted:1.0",
                      "--norm", "l2", "--out", str(out)])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["reached"]
    assert 0 <= summary["m_upper"] <= 2 * math.pi * 1.0 * 1.01
    c = read_control(out / "control")
    assert c.n_nodes == 17


def test_transfer_unreachable_exit_code(tmp_path):
    rc = run_command(["transfer", "--n", "16", "--rho-i", "stripe", "--rho-f", "random:1",
                      "--out", str(tmp_path / "r")])
    assert rc == 2


def test_numerical_failure_exit_code(tmp_path):
    rc = run_command(["transport", "--n", "16", "--rho", "stripe", "--velocity", "constant:50,0",
                      "--dt", "0.1", "--out", str(tmp_path / "t")])
    assert rc == 2


def test_bad_field_name_is_usage_error(tmp_path):
    assert run_command(["make-field", "--density", "blob", "--out", str(tmp_path)]) == 1
    assert run_command(["make-field", "--n", "12", "--density", "stripe",
                        "--out", str(tmp_path)]) == 2


def test_mix_is_deterministic(tmp_path):
    argv = ["mix", "--n", "16", "--nt", "4", "--max-iters", "5", "--seed", "3"]
    assert run_command(argv + ["--out", str(tmp_path / "a")]) == 0
    assert run_command(argv + ["--out", str(tmp_path / "b")]) == 0
    da, db = digest(tmp_path / "a"), digest(tmp_path / "b")
    da.pop("run.json"), db.pop("run.json")
    assert da == db
    ra = json.loads((tmp_path / "a" / "run.json").read_text())
    rb = json.loads((tmp_path / "b" / "run.json").read_text())
    ra["flags"].pop("out"), rb["flags"].pop("out")
    assert ra == rb


def test_mix_outputs_reload(tmp_path):
    out = tmp_path / "m"
    assert run_command(["mix", "--n", "16", "--nt", "4", "--max-iters", "3",
                        "--out", str(out)]) == 0
    for sub in ("density", "costate", "control/psi"):
        t, fs = read_trajectory(out / sub)
        assert len(fs) >= 2
    log = (out / "log.csv").read_text().splitlines()
    assert log[0] == "iter,J,effort,penalty,grad_norm,step"


def test_diagnose_and_rescale(tmp_path):
    res = tmp_path / "m"
    assert run_command(["mix", "--n", "16", "--nt", "4", "--max-iters", "3",
                        "--out", str(res)]) == 0
    assert run_command(["diagnose", "--result", str(res), "--out", str(tmp_path / "d")]) == 0
    s = json.loads((tmp_path / "d" / "summary.json").read_text())
    assert s["speed_cv"] >= 0 and s["euler_residual_max"] is not None
    assert run_command(["rescale", "--control", str(res / "control"), "--T-new", "2",
                        "--out", str(tmp_path / "r")]) == 0
    r = json.loads((tmp_path / "r" / "summary.json").read_text())
    assert r["effort_rescaled"] * 2 == pytest.approx(r["effort_original"], rel=1e-12)
    assert run_command(["rescale", "--control", str(res / "control"), "--sigma", "power:2",
                        "--nodes", "9", "--out", str(tmp_path / "p")]) == 0
    assert run_command(["rescale", "--control", str(res / "control"), "--sigma", "cubic",
                        "--out", str(tmp_path / "q")]) == 1


def test_transport_with_control(tmp_path):
    res = tmp_path / "m"
    assert run_command(["mix", "--n", "16", "--nt", "4", "--max-iters", "2",
                        "--out", str(res)]) == 0
    out = tmp_path / "t"
    assert run_command(["transport", "--n", "16", "--rho", str(res / "rho_i.fld"), "--control",
                        str(res / "control"), "--dt", "0.0625", "--out", str(out)]) == 0
    t, fs = read_trajectory(out / "density")
    _, dens = read_trajectory(res / "density")
    assert np.max(np.abs(fs[-1].values - dens[-1].values)) < 1e-12
    s = json.loads((out / "summary.json").read_text())
    assert s["mass_drift"] < 1e-10


def test_make_field_decompose_select(tmp_path):
    assert run_command(["make-field", "--n", "32", "--velocity", "random:2", "--name", "v",
                        "--out", str(tmp_path)]) == 0
    assert run_command(["make-field", "--n", "32", "--density", "disk", "--name", "mu",
                        "--out", str(tmp_path)]) == 0
    v, _ = read_field(tmp_path / "v.fld")
    assert run_command(["decompose", "--velocity", str(tmp_path / "v.fld"), "--mu",
                        str(tmp_path / "mu.fld"), "--out", str(tmp_path / "dec")]) == 0
    vp, _ = read_field(tmp_path / "dec" / "potential.fld")
    vr, _ = read_field(tmp_path / "dec" / "rotational.fld")
    assert np.max(np.abs(vp.x + vr.x - v.x)) < 1e-12
    assert run_command(["make-field", "--n", "32", "--density", "stripe", "--name", "rho",
                        "--out", str(tmp_path)]) == 0
    assert run_command(["select-velocity", "--rho", str(tmp_path / "rho.fld"),
                        "--tau-velocity", "taylor-green", "--out", str(tmp_path / "sel")]) == 0
    s = json.loads((tmp_path / "sel" / "summary.json").read_text())
    assert s["constraint_residual"] <= 1e-8


def test_export_pgm(tmp_path):
    assert run_command(["make-field", "--n", "16", "--density", "stripe", "--name", "rho",
                        "--out", str(tmp_path)]) == 0
    assert run_command(["export-pgm", "--input", str(tmp_path / "rho.fld"), "--name", "img",
                        "--out", str(tmp_path)]) == 0
    raw = (tmp_path / "img.pgm").read_bytes()
    assert raw.startswith(b"P5\n16 16\n255\n")
    pix = np.frombuffer(raw[len(b"P5\n16 16\n255\n"):], np.uint8)
    assert pix.size == 256 and pix.min() == 0 and pix.max() == 255
    side = (tmp_path / "img.pgm.txt").read_text().split()
    rho, _ = read_field(tmp_path / "rho.fld")
    assert float(side[1]) == rho.min() and float(side[3]) == rho.max()


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "mixflow", "mix", "--badflag"],
                       capture_output=True, text=True)
    assert p.returncode == 1

import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from spinfridge import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SYSTEM = """
[system]
g = "{g}"
kappa = "185.1 kHz"
gamma = "140 kHz"
r = "{r}"
cavity_frequency = "2.891 GHz"

[bath]
polarization = 0.8
hyperfine = "{hyperfine}"

[env]
temperature = 290.0
"""


def write_config(tmp_path, mode, body, g="197.7 kHz", r="229.0 kHz", hyperfine="nv", name="run.toml"):
    text = f'schema_version = 1\nmode = "{mode}"\nseed = 3\n' + SYSTEM.format(g=g, r=r, hyperfine=hyperfine) + body
    p = tmp_path / name
    p.write_text(text)
    return p


def manifest(out):
    return json.loads((Path(out) / "run_manifest.json").read_text())


def test_oracle_check_passes(tmp_path, capsys):
    cfg = write_config(tmp_path, "oracle-check", "[oracle_check]\ntolerance = 1e-8\n", hyperfine="single")
    assert cli.main([str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert "max relative deviation" in capsys.readouterr().out
    res = manifest(tmp_path / "o")["results"]
    assert res["max_relative_deviation"] < 1e-8 and res["passed"]


def test_oracle_check_tolerance_breach_exits_4(tmp_path):
    cfg = write_config(tmp_path, "oracle-check", "[oracle_check]\ntolerance = 0.0\n", hyperfine="single")
    assert cli.main([str(cfg), "--out", str(tmp_path / "o")]) == 4


def test_uncoupled_spectrum_flat(tmp_path):
    cfg = write_config(tmp_path, "spectrum", "[spectrum]\nloss_db = 1.35\npoints = 201\n", g="0 Hz")
    assert cli.main([str(cfg), "--out", str(tmp_path / "s")]) == 0
    data = np.genfromtxt(tmp_path / "s" / "spectrum.csv", delimiter=",", names=True)
    assert data.size == 201
    assert np.max(np.abs(data["value_db"])) < 1e-12


def test_fit_bundled_fixture(tmp_path):
    out = tmp_path / "f"
    assert cli.main([str(CONFIGS / "fig4_fit.toml"), "--out", str(out)]) == 0
    m = manifest(out)
    res = m["results"]
    assert res["converged"]
    assert set(res["relative_error"]) == {"g", "r", "kappa", "loss_db"}
    assert max(res["relative_error"].values()) < 0.02
    assert m["inputs"][0]["path"].endswith("fig4_synthetic.csv")


def test_manifest_and_reproduction(tmp_path):
    out = tmp_path / "p1"
    assert cli.main([str(CONFIGS / "sweep_power.toml"), "--out", str(out), "--seed", "11"]) == 0
    m = manifest(out)
    assert m["seed"] == 11 and m["resolved_config"]["seed"] == 11
    assert len(m["config_sha256"]) == 64 and m["wall_time_s"] >= 0
    assert {"spinfridge", "numpy", "scipy", "python", "kernel_backend"} <= set(m["versions"])
    names = {o["path"] for o in m["outputs"]}
    assert {"cooling_vs_power.csv", "pump_band.csv", "summary.txt", "config.resolved.json"} <= names
    again = tmp_path / "p2"
    assert cli.main([str(out / "config.resolved.json"), "--out", str(again)]) == 0
    for name in ("cooling_vs_power.csv", "pump_band.csv"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_mode_override(tmp_path):
    cfg = write_config(tmp_path, "spectrum", "[spectrum]\nloss_db = 1.0\n[cable]\ndepth0 = 140.0\n"
                       "alpha = 5.3\nlengths = [6.0]\n")
    assert cli.main([str(cfg), "--mode", "cable", "--out", str(tmp_path / "c")]) == 0
    assert manifest(tmp_path / "c")["results"]["depth_k"][0] == pytest.approx(45.13, abs=0.01)


def test_config_error_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "spectrum", "[spectrum]\nloss_db = 1.0\nspan_hz = 3.0\n")
    assert cli.main([str(cfg), "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert "span_hz" in err and len(err.strip().splitlines()) == 1
    assert not (tmp_path / "x").exists()


def test_invalid_physical_value_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, "spectrum", "[spectrum]\nloss_db = 1.0\n", g="-5 kHz")
    assert cli.main([str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "g must be non-negative" in capsys.readouterr().err


def test_data_error_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("delta_hz,omega_hz,value_db\n0,0,-1\n0,1,nan\n1,0,-1\n1,1,-1\n")
    cfg = write_config(tmp_path, "fit", '[fit]\ninput = "bad.csv"\nloss_db = 1.35\n[fit.init]\ng = "150 kHz"\n')
    assert cli.main([str(cfg), "--out", str(tmp_path / "x")]) == 3
    err = capsys.readouterr().err
    assert "bad.csv" in err and "[3]" in err


def test_numerical_error_exit_4(tmp_path, capsys):
    # undamped, uncoupled spin mode: the response is singular on resonance
    cfg = write_config(tmp_path, "spectrum", "[spectrum]\nloss_db = 1.0\npoints = 11\n", g="0 Hz", r="0 Hz",
                       hyperfine="single")
    assert cli.main([str(cfg), "--out", str(tmp_path / "x")]) == 4
    assert "singular" in capsys.readouterr().err


def test_console_script(tmp_path):
    env = dict(os.environ, SPINFRIDGE_THREADS="1")
    proc = subprocess.run([sys.executable, "-m", "spinfridge.cli", str(CONFIGS / "cable.toml"),
                           "--out", str(tmp_path / "c")], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert "depth 45.13 K" in proc.stdout

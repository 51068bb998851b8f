import json

import numpy as np
import pytest

from spinfridge import io, sweeps
from spinfridge.config import bundled_path
from spinfridge.constants import TWO_PI
from spinfridge.errors import DataError
from spinfridge.fitting import NoiseMap


def sample_map(sigma=None):
    d = TWO_PI * np.array([-2e6, 0.0, 1.5e6])
    w = TWO_PI * np.array([-1e5, 0.0, 2.5e4, 1e5])
    v = np.arange(12.0).reshape(3, 4) / 7 - 1.1
    return NoiseMap(d, w, v, sigma)


@pytest.mark.parametrize("suffix", ["csv", "json"])
@pytest.mark.parametrize("sigma", [None, 0.05])
def test_round_trip(tmp_path, suffix, sigma):
    nm = sample_map(sigma)
    path = io.export_noise_map(nm, tmp_path / f"m.{suffix}")
    back = io.import_noise_map(path)
    np.testing.assert_allclose(back.delta_grid, nm.delta_grid, rtol=1e-15)
    np.testing.assert_allclose(back.omega_grid, nm.omega_grid, rtol=1e-15)
    assert np.array_equal(back.values, nm.values)
    if sigma is None:
        assert back.sigma is None
    else:
        assert np.array_equal(back.sigma, nm.sigma)


def write(tmp_path, text, name="m.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_nan_cell_named(tmp_path):
    p = write(tmp_path, "delta_hz,omega_hz,value_db\n0,0,-1\n0,1,nan\n1,0,-1\n1,1,-2\n")
    with pytest.raises(DataError, match=r"rows \[3\]"):
        io.import_noise_map(p)


def test_missing_column(tmp_path):
    p = write(tmp_path, "delta_hz,value_db\n0,1\n")
    with pytest.raises(DataError, match="omega_hz"):
        io.import_noise_map(p)


def test_unexpected_column(tmp_path):
    p = write(tmp_path, "delta_hz,omega_hz,value_db,extra\n0,0,1,2\n")
    with pytest.raises(DataError, match="extra"):
        io.import_noise_map(p)


def test_non_monotone_rows(tmp_path):
    p = write(tmp_path, "delta_hz,omega_hz,value_db\n0,1,-1\n0,0,-1\n1,0,-1\n1,1,-2\n")
    with pytest.raises(DataError, match="rows"):
        io.import_noise_map(p)


def test_incomplete_grid(tmp_path):
    p = write(tmp_path, "delta_hz,omega_hz,value_db\n0,0,-1\n0,1,-1\n1,0,-1\n")
    with pytest.raises(DataError, match="grid"):
        io.import_noise_map(p)


def test_bad_number(tmp_path):
    p = write(tmp_path, "delta_hz,omega_hz,value_db\n0,0,abc\n")
    with pytest.raises(DataError, match=":2:value_db"):
        io.import_noise_map(p)


def test_json_nan_named(tmp_path):
    doc = {"schema": io.NOISE_MAP_SCHEMA, "delta_hz": [0, 1], "omega_hz": [0],
           "value_db": [[1.0], [float("nan")]]}
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(DataError, match=r"\(1, 0\)"):
        io.import_noise_map(p)


def test_json_not_increasing(tmp_path):
    doc = {"schema": io.NOISE_MAP_SCHEMA, "delta_hz": [1, 0], "omega_hz": [0], "value_db": [[1.0], [2.0]]}
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(DataError, match="delta_hz"):
        io.import_noise_map(p)


def test_missing_file_and_format(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        io.import_noise_map(tmp_path / "none.csv")
    with pytest.raises(DataError, match="suffix"):
        io.import_noise_map(tmp_path / "m.dat")


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write_text(tmp_path / "a" / "x.txt", "hello")
    assert (tmp_path / "a" / "x.txt").read_text() == "hello"
    assert [p.name for p in (tmp_path / "a").iterdir()] == ["x.txt"]


def test_bundled_fixture_matches_manifest():
    meta = json.loads(bundled_path("fig4_synthetic.manifest.json").read_text())
    nm = io.import_noise_map(bundled_path(meta["file"]))
    assert nm.shape == (meta["delta_hz"]["points"], meta["omega_hz"]["points"])
    assert nm.delta_grid[0] / TWO_PI == pytest.approx(meta["delta_hz"]["min"], rel=1e-15)
    assert nm.delta_grid[-1] / TWO_PI == pytest.approx(meta["delta_hz"]["max"], rel=1e-15)
    assert nm.omega_grid[0] / TWO_PI == pytest.approx(meta["omega_hz"]["min"], rel=1e-15)
    assert nm.omega_grid[-1] / TWO_PI == pytest.approx(meta["omega_hz"]["max"], rel=1e-15)
    assert np.all(nm.sigma == meta["noise_db"])
    import hashlib
    assert hashlib.sha256(bundled_path(meta["file"]).read_bytes()).hexdigest() == meta["sha256"]


def test_bundled_fixture_regenerates():
    """The fixture is exactly the forward model plus its recorded seeded noise."""
    from spinfridge import model
    from spinfridge.fitting import default_grids, synthetic_map

    meta = json.loads(bundled_path("fig4_synthetic.manifest.json").read_text())
    d, w = default_grids()
    nm = synthetic_map(model.FIG4_SYSTEM, model.SpinBath.nv(0.8), model.ThermalEnv(290.0),
                       model.FIG4_LOSS_DB, d, w, meta["noise_db"], meta["seed"])
    stored = io.import_noise_map(bundled_path(meta["file"]))
    np.testing.assert_allclose(stored.values, nm.values, rtol=0, atol=1e-15)


def test_temperature_map_export(tmp_path):
    from spinfridge.model import ThermalEnv

    tmap = sweeps.min_temperature_map(TWO_PI * np.array([1e5, 1e6]), [1e4, 1e5], 0.8,
                                      ThermalEnv(290.0), TWO_PI * 2.87e9)
    p = io.export_temperature_map(tmap, tmp_path / "t.csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "g_hz,q,min_temperature_k,argmin_omega_hz" and len(lines) == 5
    meta = json.loads((tmp_path / "t.json").read_text())
    assert meta["omega_c_hz"] == pytest.approx(2.87e9) and meta["kappa_rule"] == "intracavity"

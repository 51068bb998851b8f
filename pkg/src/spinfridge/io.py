"""File formats: noise maps, fit results, sweep tables. Files carry Hz; memory holds rad/s."""
from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from spinfridge.constants import TWO_PI
from spinfridge.errors import DataError
from spinfridge.fitting import NoiseMap

NOISE_MAP_COLUMNS = ("delta_hz", "omega_hz", "value_db")
NOISE_MAP_SCHEMA = "spinfridge.noise_map"


def atomic_write_text(path, text):
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj):
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def write_csv(path, header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return atomic_write_text(path, buf.getvalue())


def export_noise_map(nm, path, fmt=None):
    path = Path(path)
    fmt = fmt or _infer_format(path)
    d_hz = nm.delta_grid / TWO_PI
    w_hz = nm.omega_grid / TWO_PI
    if fmt == "csv":
        header = list(NOISE_MAP_COLUMNS) + (["sigma_db"] if nm.sigma is not None else [])
        rows = []
        for i, d in enumerate(d_hz):
            for j, w in enumerate(w_hz):
                row = [d, w, nm.values[i, j]]
                if nm.sigma is not None:
                    row.append(nm.sigma[i, j])
                rows.append(row)
        return write_csv(path, header, rows)
    doc = {
        "schema": NOISE_MAP_SCHEMA,
        "schema_version": 1,
        "units": {"delta": "Hz", "omega": "Hz", "value": "dB re unpumped floor"},
        "delta_hz": d_hz.tolist(),
        "omega_hz": w_hz.tolist(),
        "value_db": nm.values.tolist(),
        "sigma_db": None if nm.sigma is None else nm.sigma.tolist(),
    }
    return write_json(path, doc)


def _infer_format(path):
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix == ".json":
        return "json"
    raise DataError(f"{path}: cannot infer format from suffix {suffix!r}; give csv or json")


def _float(text, where):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise DataError(f"{where}: not a number: {text!r}") from None


def import_noise_map(path, fmt=None):
    """Read and validate a noise map; frequencies are converted to rad/s."""
    path = Path(path)
    fmt = fmt or _infer_format(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    if fmt == "csv":
        return _import_csv(path)
    if fmt in ("json", "structured-text"):
        return _import_json(path)
    raise DataError(f"{path}: unknown format {fmt!r}")


def _import_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in NOISE_MAP_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        extra = [c for c in header if c not in NOISE_MAP_COLUMNS + ("sigma_db",)]
        if extra:
            raise DataError(f"{path}: unexpected columns {extra}")
        col = {c: header.index(c) for c in header}
        records, nan_rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            vals = [_float(row[col[c]], f"{path}:{lineno}:{c}") for c in header]
            if any(math.isnan(v) for v in vals):
                nan_rows.append(lineno)
            records.append(vals)
    if nan_rows:
        raise DataError(f"{path}: NaN cells in rows {nan_rows}")
    if not records:
        raise DataError(f"{path}: no data rows")
    data = np.array(records)
    d = data[:, col["delta_hz"]]
    w = data[:, col["omega_hz"]]
    deltas = np.unique(d)
    omegas = np.unique(w)
    nd, nw = deltas.size, omegas.size
    if data.shape[0] != nd * nw:
        raise DataError(f"{path}: {data.shape[0]} rows do not form a {nd} x {nw} grid")
    expect_d = np.repeat(deltas, nw)
    expect_w = np.tile(omegas, nd)
    bad = np.nonzero((d != expect_d) | (w != expect_w))[0]
    if bad.size:
        rows = (bad[:10] + 2).tolist()
        raise DataError(f"{path}: grid is not strictly increasing (delta outer, omega inner) at rows {rows}")
    values = data[:, col["value_db"]].reshape(nd, nw)
    sigma = data[:, col["sigma_db"]].reshape(nd, nw) if "sigma_db" in col else None
    if sigma is not None and np.any(sigma <= 0):
        rows = (np.nonzero(sigma.ravel() <= 0)[0][:10] + 2).tolist()
        raise DataError(f"{path}: non-positive sigma_db in rows {rows}")
    return NoiseMap(TWO_PI * deltas, TWO_PI * omegas, values, sigma)


def _import_json(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("schema") != NOISE_MAP_SCHEMA:
        raise DataError(f"{path}: not a {NOISE_MAP_SCHEMA} document")
    for key in ("delta_hz", "omega_hz", "value_db"):
        if key not in doc:
            raise DataError(f"{path}: missing field {key!r}")
    d = np.asarray(doc["delta_hz"], dtype=float)
    w = np.asarray(doc["omega_hz"], dtype=float)
    try:
        v = np.asarray(doc["value_db"], dtype=float)
    except (TypeError, ValueError):
        raise DataError(f"{path}: value_db is not a numeric matrix") from None
    if v.shape != (d.size, w.size):
        raise DataError(f"{path}: value_db has shape {v.shape}, expected ({d.size}, {w.size})")
    for name, grid in (("delta_hz", d), ("omega_hz", w)):
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise DataError(f"{path}: {name} is not strictly increasing")
    nan = np.argwhere(np.isnan(v))
    if nan.size:
        cells = [tuple(int(x) for x in c) for c in nan[:10]]
        raise DataError(f"{path}: NaN cells at (delta, omega) indices {cells}")
    sigma = doc.get("sigma_db")
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != v.shape or np.any(~(sigma > 0)):
            raise DataError(f"{path}: sigma_db must be a positive matrix shaped like value_db")
    return NoiseMap(TWO_PI * d, TWO_PI * w, v, sigma)


def fit_result_document(result):
    """FitResult as a JSON-ready dict; rates also reported in Hz."""
    doc = result.to_dict()
    for name, entry in doc["parameters"].items():
        if entry["unit"] == "rad/s":
            entry["value_hz"] = entry["value"] / TWO_PI
    if doc["covariance_diag"] is not None:
        doc["stderr"] = {}
        for k, var in doc["covariance_diag"].items():
            se = math.sqrt(var)
            doc["stderr"][k] = {"value": se, "unit": result.units[k]}
            if result.units[k] == "rad/s":
                doc["stderr"][k]["value_hz"] = se / TWO_PI
    return doc


def export_temperature_map(tmap, path):
    """Long-format CSV plus a ``.json`` metadata sidecar recording every assumption."""
    path = Path(path)
    rows = []
    for i, g in enumerate(tmap.g_grid):
        for j, q in enumerate(tmap.q_grid):
            rows.append([g / TWO_PI, q, tmap.min_temperature[i, j], tmap.argmin_omega[i, j] / TWO_PI])
    write_csv(path, ["g_hz", "q", "min_temperature_k", "argmin_omega_hz"], rows)
    meta = dict(tmap.metadata)
    meta["omega_c_hz"] = meta.pop("omega_c") / TWO_PI
    if meta.get("kappa") is not None:
        meta["kappa_hz"] = meta.pop("kappa") / TWO_PI
    else:
        meta.pop("kappa", None)
    write_json(path.with_suffix(".json"), meta)
    return path

"""Strict run-configuration loading.

A config is one TOML (or JSON) document with ``schema_version = 1``. Unknown
keys are errors. Physics parameters have no defaults; only numerical knobs
(grid sizes, tolerances, sample counts) do, and the resolved values are what
the run manifest records. Frequencies are ordinary Hz at this boundary,
either plain numbers or strings with a unit (``"197.7 kHz"``); they are
converted to rad/s by :func:`system_params` and friends, never elsewhere.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path

from spinfridge.constants import NV_HYPERFINE_OFFSETS, TWO_PI, parse_hz
from spinfridge.errors import ConfigError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
MODES = ("spectrum", "map", "fit", "sweep-power", "sweep-gq", "cable", "oracle-check")

REQUIRED = object()

# section -> key -> (kind, default). REQUIRED marks physics inputs.
SCHEMA = {
    "system": {
        "g": ("hz", REQUIRED),
        "kappa": ("hz", REQUIRED),
        "gamma": ("hz", REQUIRED),
        "r": ("hz", REQUIRED),
        "cavity_frequency": ("hz", REQUIRED),
    },
    "bath": {
        "polarization": ("float", REQUIRED),
        "hyperfine": ("hyperfine", REQUIRED),
        "coupling_split": ("choice:per_ensemble,equal_power", "per_ensemble"),
    },
    "env": {"temperature": ("float", REQUIRED)},
    "spectrum": {
        "delta": ("hz", 0.0),
        "loss_db": ("float", REQUIRED),
        "span": ("hz", 2e6),
        "points": ("int", 2001),
    },
    "map": {
        "loss_db": ("float", REQUIRED),
        "noise_db": ("float", 0.0),
        "delta_span": ("hz", 3.5e6),
        "delta_points": ("int", 201),
        "omega_span": ("hz", 1e6),
        "omega_points": ("int", 101),
    },
    "fit": {
        "input": ("path", REQUIRED),
        "format": ("choice:auto,csv,json", "auto"),
        "init": ("table", REQUIRED),
        "loss_db": ("float", None),
        "max_iter": ("int", 200),
        "grad_tol": ("float", 1e-6),
        "use_sigma": ("bool", True),
    },
    "pump": {
        "eta_pump": ("float", REQUIRED),
        "beam_diameter_mm": ("float", REQUIRED),
        "heating": ("float", REQUIRED),
        "base_temperature": ("float", REQUIRED),
        "t1": ("table", REQUIRED),
        "scaling": ("choice:sqrt,linear,constant", REQUIRED),
        "reference_polarization": ("float", None),
        "uncertain": ("list_table", []),
    },
    "sweep_power": {
        "powers": ("list_float", REQUIRED),
        "loss_db": ("float", REQUIRED),
        "samples": ("int", 2000),
        "percentiles": ("list_float", [16.0, 50.0, 84.0]),
        "detector_noise": ("float", 0.0),
        "span": ("hz", 2e6),
        "points": ("int", 2001),
    },
    "sweep_gq": {
        "g_min": ("hz", REQUIRED),
        "g_max": ("hz", REQUIRED),
        "g_points": ("int", 31),
        "q_min": ("float", REQUIRED),
        "q_max": ("float", REQUIRED),
        "q_points": ("int", 31),
        "r_ratio": ("float", REQUIRED),
        "kappa_rule": ("choice:intracavity,critical,fixed", REQUIRED),
        "kappa": ("hz", None),
    },
    "cable": {
        "depth0": ("float", REQUIRED),
        "alpha": ("float", REQUIRED),
        "lengths": ("list_float", REQUIRED),
    },
    "oracle_check": {
        "delta": ("hz", 0.0),
        "span": ("hz", 2e6),
        "points": ("int", 2001),
        "tolerance": ("float", 1e-8),
    },
    "io": {"out": ("path", "out"), "workers": ("int", 1)},
}

T1_KEYS = ("sample_rate", "raman_coeff", "orbital_rate", "orbital_energy")
UNCERTAIN_KEYS = {"name", "relative_width", "distribution", "central"}

# sections each mode needs, besides io
MODE_SECTIONS = {
    "spectrum": ("system", "bath", "env", "spectrum"),
    "map": ("system", "bath", "env", "map"),
    "fit": ("system", "bath", "env", "fit"),
    "sweep-power": ("system", "bath", "env", "pump", "sweep_power"),
    "sweep-gq": ("bath", "env", "sweep_gq", "system"),
    "cable": ("cable",),
    "oracle-check": ("system", "bath", "env", "oracle_check"),
}

# modes that read only part of a section; other keys there are optional
MODE_PARTIAL = {
    "sweep-gq": {"system": ("cavity_frequency",), "bath": ("polarization",)},
}


def _coerce(section, key, kind, value):
    where = f"{section}.{key}"
    try:
        if kind == "hz":
            return parse_hz(value)
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                raise ValueError
            return value
        if kind in ("str", "path"):
            if not isinstance(value, str):
                raise ValueError
            return value
        if kind.startswith("choice:"):
            options = kind[7:].split(",")
            if value not in options:
                raise ConfigError(f"{where}: {value!r} is not one of {options}")
            return value
        if kind == "list_float":
            if not isinstance(value, list):
                raise ValueError
            return [_coerce(section, key, "float", v) for v in value]
        if kind == "table":
            if not isinstance(value, dict):
                raise ValueError
            return dict(value)
        if kind == "list_table":
            if not isinstance(value, list) or not all(isinstance(v, dict) for v in value):
                raise ValueError
            return [dict(v) for v in value]
        if kind == "hyperfine":
            if value in ("single", "nv"):
                return value
            if isinstance(value, list) and value:
                return [parse_hz(v) for v in value]
            raise ValueError
    except ConfigError:
        raise
    except ValueError as exc:
        detail = f" ({exc})" if str(exc) else ""
        raise ConfigError(f"{where}: invalid {kind} value {value!r}{detail}") from None
    raise AssertionError(kind)


def parse_config(doc, mode_override=None, seed_override=None):
    """Validate a raw config mapping and return the resolved config dict."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a table")
    doc = copy.deepcopy(doc)
    allowed_top = {"schema_version", "mode", "seed"} | set(SCHEMA)
    unknown = sorted(set(doc) - allowed_top)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {unknown}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    mode = mode_override or doc.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode: {mode!r} is not one of {list(MODES)}")
    seed = doc.get("seed", 0) if seed_override is None else seed_override
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: must be a non-negative integer, got {seed!r}")
    resolved = {"schema_version": SCHEMA_VERSION, "mode": mode, "seed": seed}
    needed = set(MODE_SECTIONS[mode]) | {"io"}
    partial = MODE_PARTIAL.get(mode, {})
    for section, fields in SCHEMA.items():
        raw = doc.get(section)
        if raw is None:
            if section in needed and any(d is REQUIRED for _, d in fields.values()):
                raise ConfigError(f"missing section [{section}] required by mode {mode!r}")
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"[{section}] must be a table")
        bad = sorted(set(raw) - set(fields))
        if bad:
            raise ConfigError(f"[{section}]: unknown keys {bad}")
        if section not in needed and section not in doc:
            continue
        out = {}
        for key, (kind, default) in fields.items():
            if key in raw and not (raw[key] is None and default is not REQUIRED):
                out[key] = _coerce(section, key, kind, raw[key])
            elif default is REQUIRED:
                if section in needed and key in partial.get(section, (key,)):
                    raise ConfigError(f"{section}.{key}: required by mode {mode!r}")
            else:
                out[key] = copy.deepcopy(default)
        resolved[section] = out
    _check_tables(resolved)
    return resolved


def _check_tables(cfg):
    pump = cfg.get("pump")
    if pump and "t1" in pump:
        t1 = pump["t1"]
        bad = sorted(set(t1) - set(T1_KEYS))
        if bad:
            raise ConfigError(f"[pump.t1]: unknown keys {bad}")
        for k in T1_KEYS:
            if k not in t1:
                raise ConfigError(f"pump.t1.{k}: required")
            t1[k] = _coerce("pump.t1", k, "float", t1[k])
        for i, u in enumerate(pump.get("uncertain", [])):
            bad = sorted(set(u) - UNCERTAIN_KEYS)
            if bad:
                raise ConfigError(f"pump.uncertain[{i}]: unknown keys {bad}")
            for k in ("name", "relative_width"):
                if k not in u:
                    raise ConfigError(f"pump.uncertain[{i}].{k}: required")
    fit = cfg.get("fit")
    if fit and "init" in fit:
        from spinfridge.fitting import PARAMETERS

        for k, v in fit["init"].items():
            if k not in PARAMETERS:
                raise ConfigError(f"fit.init: unknown parameter {k!r}")
            unit = PARAMETERS[k][0]
            fit["init"][k] = _coerce("fit.init", k, "hz" if unit == "rad/s" else "float", v)
        if not fit["init"]:
            raise ConfigError("fit.init: at least one free parameter is required")
        if "loss_db" not in fit["init"] and fit.get("loss_db") is None:
            raise ConfigError("fit.loss_db: required when loss_db is not fitted")


BUNDLED_PREFIX = "bundled:"


def bundled_path(name):
    """Path of a data file shipped inside the package."""
    return Path(__file__).resolve().parent / "data" / name


def load_config(path, mode_override=None, seed_override=None):
    """Read ``path`` (TOML, or JSON by suffix) and return ``(resolved, raw_text)``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        doc = json.loads(text) if path.suffix.lower() == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from None
    resolved = parse_config(doc, mode_override, seed_override)
    fit = resolved.get("fit")
    if fit and "input" in fit:
        src = Path(fit["input"])
        if fit["input"].startswith(BUNDLED_PREFIX):
            src = bundled_path(fit["input"][len(BUNDLED_PREFIX):])
        elif not src.is_absolute():
            src = path.parent / src
        if not src.exists():
            raise ConfigError(f"fit.input: file not found: {src}")
        fit["input"] = str(src)
    return resolved, text


def system_params(cfg):
    from spinfridge.model import SystemParams

    s = cfg["system"]
    return SystemParams.from_hz(s["g"], s["kappa"], s["gamma"], s["r"], s["cavity_frequency"])


def hyperfine_offsets(cfg):
    h = cfg["bath"]["hyperfine"]
    if h == "single":
        return (0.0,)
    if h == "nv":
        return NV_HYPERFINE_OFFSETS
    return tuple(TWO_PI * x for x in h)


def spin_bath(cfg, polarization=None):
    from spinfridge.model import SpinBath

    b = cfg["bath"]
    p = b["polarization"] if polarization is None else polarization
    return SpinBath(p, hyperfine_offsets(cfg), b["coupling_split"])


def thermal_env(cfg):
    from spinfridge.model import ThermalEnv

    return ThermalEnv(cfg["env"]["temperature"])


def pump_config(cfg):
    from spinfridge.pump import PumpConfig, T1Model

    p = cfg["pump"]
    return PumpConfig(
        eta_pump=p["eta_pump"],
        beam_diameter_mm=p["beam_diameter_mm"],
        t1=T1Model(**p["t1"]),
        heating=p["heating"],
        base_temperature=p["base_temperature"],
    )


def uncertain_parameters(cfg):
    from spinfridge.pump import UncertainParameter

    return [UncertainParameter(**u) for u in cfg["pump"].get("uncertain", [])]

"""``spinfridge <config> [--mode M] [--seed N] [--out DIR]``.

Every run writes its artefacts plus ``run_manifest.json`` into the output
directory. Exit codes: 0 success, 2 configuration, 3 input data, 4 numerical.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import scipy

from spinfridge import __version__, config as cfgmod, io, kernels, model, oracle, pump, sweeps
from spinfridge.constants import TWO_PI
from spinfridge.errors import ConfigError, DataError, DomainError, NumericalError
from spinfridge.fitting import PARAMETERS, FitOptions, IdentifiabilityWarning, fit, synthetic_map
from spinfridge.model import CouplingSplit, SpinBath

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _grid(span_hz, points):
    if points < 2:
        raise ConfigError(f"grid needs at least 2 points, got {points}")
    if not span_hz > 0:
        raise ConfigError(f"grid span must be positive, got {span_hz!r} Hz")
    return np.linspace(-TWO_PI * span_hz / 2, TWO_PI * span_hz / 2, points)


class Run:
    """Output directory bookkeeping for one invocation."""

    def __init__(self, out_dir):
        self.out = Path(out_dir)
        self.outputs = []
        self.inputs = []
        self.lines = []

    def path(self, name):
        p = self.out / name
        self.outputs.append(p)
        return p

    def say(self, line):
        self.lines.append(line)
        print(line)


def _spectrum(cfg, run):
    params = cfgmod.system_params(cfg)
    bath = cfgmod.spin_bath(cfg)
    env = cfgmod.thermal_env(cfg)
    s = cfg["spectrum"]
    grid = _grid(s["span"], s["points"])
    n_t = env.n_T(params.omega_c)
    net = oracle.build_network(params, TWO_PI * s["delta"], bath, env)
    occ = oracle.frequency_spectrum(net, grid)
    detected = model.apply_loss(occ, s["loss_db"], n_t)
    db = detected.to_db(n_t).values
    temps = model.noise_ratio_to_temperature(db, env.temperature)
    rows = zip(grid / TWO_PI, occ.values, detected.values, db, temps)
    io.write_csv(run.path("spectrum.csv"),
                 ["omega_hz", "output_occupation", "detected_occupation", "value_db", "noise_temperature_k"],
                 rows)
    i = int(np.argmin(db))
    run.say(f"peak {db[i]:.4f} dB at {grid[i] / TWO_PI:.1f} Hz ({temps[i]:.2f} K naive)")
    return {"peak_db": float(db[i]), "peak_omega_hz": float(grid[i] / TWO_PI),
            "peak_noise_temperature_k": float(temps[i]), "n_T": n_t}


def _map(cfg, run):
    params = cfgmod.system_params(cfg)
    bath = cfgmod.spin_bath(cfg)
    env = cfgmod.thermal_env(cfg)
    m = cfg["map"]
    nm = synthetic_map(params, bath, env, m["loss_db"], _grid(m["delta_span"], m["delta_points"]),
                       _grid(m["omega_span"], m["omega_points"]), m["noise_db"], cfg["seed"])
    io.export_noise_map(nm, run.path("noise_map.csv"))
    peak = float(nm.values.min())
    run.say(f"map {nm.shape[0]} x {nm.shape[1]}, deepest {peak:.4f} dB")
    return {"shape": list(nm.shape), "min_db": peak}


def _fixed_values(cfg):
    p = cfgmod.system_params(cfg)
    return {
        "g": p.g, "r": p.r, "kappa": p.kappa, "gamma": p.gamma, "omega_c": p.omega_c,
        "temperature": cfg["env"]["temperature"], "polarization": cfg["bath"]["polarization"],
        "loss_db": cfg["fit"]["loss_db"],
    }


def _fit(cfg, run):
    f = cfg["fit"]
    src = Path(f["input"])
    run.inputs.append(src)
    fmt = None if f["format"] == "auto" else f["format"]
    nm = io.import_noise_map(src, fmt)
    init = {k: (TWO_PI * v if PARAMETERS[k][0] == "rad/s" else v) for k, v in f["init"].items()}
    fixed = {k: v for k, v in _fixed_values(cfg).items() if k not in init}
    opts = FitOptions(
        hyperfine_offsets=cfgmod.hyperfine_offsets(cfg),
        split_mode=CouplingSplit(cfg["bath"]["coupling_split"]),
        max_iter=f["max_iter"], grad_tol=f["grad_tol"], use_sigma=f["use_sigma"],
        workers=cfg["io"]["workers"],
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IdentifiabilityWarning)
        res = fit(nm, fixed, init, opts)
    doc = io.fit_result_document(res)
    doc["warnings"] = [str(w.message) for w in caught]
    truth = _fixture_truth(src)
    if truth is not None:
        doc["relative_error"] = {
            k: abs(res.parameters[k] - truth[k]) / abs(truth[k]) for k in res.free if k in truth
        }
    io.write_json(run.path("fit_result.json"), doc)
    for k in res.free:
        v = res.parameters[k]
        shown = f"{v / TWO_PI:.6g} Hz" if res.units[k] == "rad/s" else f"{v:.6g} {res.units[k]}"
        err = doc.get("relative_error", {}).get(k)
        run.say(f"{k} = {shown}" + (f" (rel. error {err:.2e})" if err is not None else ""))
    run.say(f"converged={res.converged} residual_norm={res.residual_norm:.6g}")
    summary = {k: doc[k] for k in ("parameters", "converged", "residual_norm", "iterations")}
    summary["relative_error"] = doc.get("relative_error")
    summary["stderr"] = doc.get("stderr")
    return summary


def _fixture_truth(src):
    """Generating parameters recorded next to a synthetic map, in internal units."""
    side = src.with_name(src.stem + ".manifest.json")
    if not side.exists():
        return None
    try:
        meta = json.loads(side.read_text())
        truth = meta["truth"]
    except (json.JSONDecodeError, KeyError):
        raise DataError(f"{side}: malformed fixture manifest") from None
    return {k: (TWO_PI * v if PARAMETERS[k][0] == "rad/s" else v)
            for k, v in ((k[:-3] if k.endswith("_hz") else k, v) for k, v in truth.items())
            if k in PARAMETERS}


def _sweep_power(cfg, run):
    params = cfgmod.system_params(cfg)
    env = cfgmod.thermal_env(cfg)
    pcfg = cfgmod.pump_config(cfg)
    p = cfg["pump"]
    s = cfg["sweep_power"]
    ref = p["reference_polarization"]
    if ref is None:
        ref = cfg["bath"]["polarization"]
    mode = pump.CouplingScaling(p["scaling"])
    powers = np.asarray(s["powers"], dtype=float)
    if np.any(powers < 0):
        raise ConfigError("sweep_power.powers: powers must be non-negative")
    points = sweeps.cooling_vs_power(
        powers, pcfg, params, env, mode=mode, hyperfine_offsets=cfgmod.hyperfine_offsets(cfg),
        split_mode=CouplingSplit(cfg["bath"]["coupling_split"]), loss_db=s["loss_db"],
        reference_polarization=ref, grid=_grid(s["span"], s["points"]),
        detector_noise=s["detector_noise"])
    io.write_csv(run.path("cooling_vs_power.csv"),
                 ["power_w", "polarization", "g_eff_hz", "peak_db", "temperature_k"],
                 [(c.power, c.polarization, c.g_eff / TWO_PI, c.peak_db, c.temperature) for c in points])
    band = pump.monte_carlo_band(pcfg, cfgmod.uncertain_parameters(cfg), powers, s["samples"],
                                 cfg["seed"], params, mode, ref, tuple(s["percentiles"]))
    header = ["power_w"] + [f"polarization_p{q:g}" for q in band.percentiles]
    header += [f"splitting_hz_p{q:g}" for q in band.percentiles]
    rows = []
    for i, pw in enumerate(powers):
        rows.append([pw] + [float(b[i]) for b in band.polarization]
                    + [float(b[i]) / TWO_PI for b in band.splitting])
    io.write_csv(run.path("pump_band.csv"), header, rows)
    best = min(points, key=lambda c: c.peak_db)
    run.say(f"deepest {best.peak_db:.4f} dB at {best.power:g} W ({best.temperature:.2f} K)")
    return {"best_power_w": best.power, "best_peak_db": best.peak_db,
            "best_temperature_k": best.temperature}


def _sweep_gq(cfg, run):
    s = cfg["sweep_gq"]
    if not (0 < s["g_min"] <= s["g_max"] and 0 < s["q_min"] <= s["q_max"]):
        raise ConfigError("sweep_gq: need 0 < g_min <= g_max and 0 < q_min <= q_max")
    g = TWO_PI * np.geomspace(s["g_min"], s["g_max"], s["g_points"])
    q = np.geomspace(s["q_min"], s["q_max"], s["q_points"])
    kappa = None if s["kappa"] is None else TWO_PI * s["kappa"]
    tmap = sweeps.min_temperature_map(
        g, q, cfg["bath"]["polarization"], cfgmod.thermal_env(cfg),
        TWO_PI * cfg["system"]["cavity_frequency"], s["r_ratio"], s["kappa_rule"], kappa,
        cfg["io"]["workers"])
    p = run.path("temperature_map.csv")
    io.export_temperature_map(tmap, p)
    run.outputs.append(p.with_suffix(".json"))
    lo = float(tmap.min_temperature.min())
    run.say(f"map {tmap.min_temperature.shape[0]} x {tmap.min_temperature.shape[1]}, coldest {lo:.4g} K")
    return {"min_temperature_k": lo, "max_temperature_k": float(tmap.min_temperature.max())}


def _cable(cfg, run):
    c = cfg["cable"]
    lengths = np.asarray(c["lengths"], dtype=float)
    depth = sweeps.cable_decay(c["depth0"], lengths, c["alpha"])
    loss = [sweeps.cable_loss_db(x, c["alpha"]) for x in lengths]
    io.write_csv(run.path("cable.csv"), ["length_m", "depth_k", "equivalent_loss_db"],
                 zip(lengths, depth, loss))
    for x, d in zip(lengths, depth):
        run.say(f"L = {x:g} m: depth {d:.4g} K")
    return {"depth_k": depth.tolist()}


def _oracle_check(cfg, run):
    params = cfgmod.system_params(cfg)
    env = cfgmod.thermal_env(cfg)
    o = cfg["oracle_check"]
    bath = SpinBath(cfg["bath"]["polarization"])
    grid = _grid(o["span"], o["points"])
    delta = TWO_PI * o["delta"]
    closed = model.output_spectrum(params, delta, bath, env, grid).values
    # the closed form's detuning convention, expressed in the network frame
    net = oracle.build_network(params, -delta, bath, env)
    numeric = oracle.frequency_spectrum(net, grid - delta).values
    dev_spec = float(np.max(np.abs(numeric - closed) / np.abs(closed)))
    dev_occ = None
    if delta == 0.0:
        lyap = oracle.steady_state_occupations(oracle.build_network(params, 0.0, bath, env))[0]
        n_cav = model.mean_photon_number(params, bath, env)
        dev_occ = abs(lyap - n_cav) / abs(n_cav)
    io.write_csv(run.path("oracle_check.csv"),
                 ["omega_hz", "closed_form", "network", "relative_deviation"],
                 zip(grid / TWO_PI, closed, numeric, np.abs(numeric - closed) / np.abs(closed)))
    worst = max(dev_spec, dev_occ or 0.0)
    run.say(f"max relative deviation {worst:.3e} (spectrum {dev_spec:.3e}"
            + (f", occupation {dev_occ:.3e})" if dev_occ is not None else ")"))
    ok = worst < o["tolerance"]
    if cfg["bath"]["hyperfine"] != "single":
        run.say("note: comparison uses one spin line; hyperfine setting ignored")
    return {"max_relative_deviation": worst, "spectrum_deviation": dev_spec,
            "occupation_deviation": dev_occ, "tolerance": o["tolerance"], "passed": ok}


MODE_RUNNERS = {
    "spectrum": _spectrum,
    "map": _map,
    "fit": _fit,
    "sweep-power": _sweep_power,
    "sweep-gq": _sweep_gq,
    "cable": _cable,
    "oracle-check": _oracle_check,
}


def _manifest(cfg, config_path, raw_text, run, results, started, wall):
    return {
        "schema": "spinfridge.run_manifest",
        "schema_version": 1,
        "mode": cfg["mode"],
        "seed": cfg["seed"],
        "config_path": str(config_path),
        "config_sha256": hashlib.sha256(raw_text.encode()).hexdigest(),
        "resolved_config": cfg,
        "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in run.inputs],
        "outputs": [{"path": p.name, "sha256": sha256_file(p)} for p in run.outputs],
        "versions": {
            "spinfridge": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kernel_backend": kernels.BACKEND,
        },
        "started_unix": started,
        "wall_time_s": wall,
        "results": results,
    }


def run(config_path, mode=None, seed=None, out=None):
    """Execute one configured run; returns ``(exit_code, results)``."""
    started = time.time()
    t0 = time.perf_counter()
    config_path = Path(config_path)
    cfg, raw_text = cfgmod.load_config(config_path, mode, seed)
    if out is None:
        out = Path(cfg["io"]["out"])
        if not out.is_absolute():
            out = config_path.parent / out
    out = Path(out).resolve()
    cfg["io"]["out"] = str(out)
    r = Run(out)
    results = MODE_RUNNERS[cfg["mode"]](cfg, r)
    io.write_json(r.path("config.resolved.json"), cfg)
    io.atomic_write_text(r.path("summary.txt"), "\n".join(r.lines) + "\n")
    wall = time.perf_counter() - t0
    manifest = _manifest(cfg, config_path, raw_text, r, results, started, wall)
    io.write_json(Path(out) / "run_manifest.json", manifest)
    code = EXIT_OK
    if cfg["mode"] == "oracle-check" and not results["passed"]:
        code = EXIT_NUMERICAL
    return code, results


def main(argv=None):
    parser = argparse.ArgumentParser(prog="spinfridge", description=__doc__.splitlines()[0])
    parser.add_argument("config", help="run configuration (TOML, or JSON by suffix)")
    parser.add_argument("--mode", choices=cfgmod.MODES, help="override the configured mode")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--out", help="output directory (default: io.out next to the config)")
    args = parser.parse_args(argv)
    try:
        code, _ = run(args.config, args.mode, args.seed, args.out)
    except ConfigError as exc:
        print(f"spinfridge: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"spinfridge: config error: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"spinfridge: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"spinfridge: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return code


if __name__ == "__main__":
    sys.exit(main())

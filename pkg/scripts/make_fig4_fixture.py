"""Regenerate the bundled synthetic noise map and its manifest."""
import json
from pathlib import Path

from spinfridge import io, model
from spinfridge.constants import NV_HYPERFINE_OFFSETS, TWO_PI
from spinfridge.fitting import FIG4_FREE, default_grids, fig4_truth, synthetic_map

NOISE_DB = 0.05
SEED = 4

DATA = Path(__file__).resolve().parents[1] / "src" / "spinfridge" / "data"


def main():
    truth = fig4_truth()
    params = model.FIG4_SYSTEM
    bath = model.SpinBath(model.FIG4_POLARIZATION, NV_HYPERFINE_OFFSETS, "per_ensemble")
    env = model.ThermalEnv(model.FIG4_TEMPERATURE)
    d, w = default_grids()
    nm = synthetic_map(params, bath, env, model.FIG4_LOSS_DB, d, w, NOISE_DB, SEED)
    csv_path = io.export_noise_map(nm, DATA / "fig4_synthetic.csv")
    meta = {
        "schema": "spinfridge.fixture_manifest",
        "file": csv_path.name,
        "sha256": __import__("hashlib").sha256(csv_path.read_bytes()).hexdigest(),
        "truth": {
            (k + "_hz" if k in ("g", "r", "kappa", "gamma", "omega_c") else k):
            (v / TWO_PI if k in ("g", "r", "kappa", "gamma", "omega_c") else v)
            for k, v in truth.items()
        },
        "free": list(FIG4_FREE),
        "hyperfine_offsets_hz": [x / TWO_PI for x in NV_HYPERFINE_OFFSETS],
        "coupling_split": "per_ensemble",
        "delta_hz": {"min": d[0] / TWO_PI, "max": d[-1] / TWO_PI, "points": d.size},
        "omega_hz": {"min": w[0] / TWO_PI, "max": w[-1] / TWO_PI, "points": w.size},
        "noise_db": NOISE_DB,
        "seed": SEED,
    }
    (DATA / "fig4_synthetic.manifest.json").write_text(json.dumps(meta, indent=2) + "\n")


if __name__ == "__main__":
    main()

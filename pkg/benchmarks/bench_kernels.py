"""Compare the compiled and NumPy kernel backends on the workloads the package runs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from spinfridge import kernels, model, oracle
from spinfridge.constants import NV_HYPERFINE_OFFSETS
from spinfridge.fitting import default_grids


def workloads():
    p = model.FIG4_SYSTEM
    env = model.ThermalEnv(290.0)
    deltas, omegas = default_grids()
    nv = model.SpinBath(0.8, NV_HYPERFINE_OFFSETS)
    stack = np.ascontiguousarray(np.stack([oracle.build_network(p, d, nv, env).drift for d in deltas]))
    single = np.ascontiguousarray(oracle.build_network(p, 0.0, model.SpinBath(0.8), env).drift)
    dense = np.linspace(-2e7, 2e7, 2001)
    wide = np.linspace(-2e7, 2e7, 100_001)
    return {
        "fit map: 201 x 101, 4x4 stack": lambda k: k.resolvent_rows_stack(stack, omegas, 0),
        "spectrum: 2001 pts, 2x2": lambda k: k.resolvent_row(single, dense, 0),
        "closed form: 1e5 pts": lambda k: k.closed_form_denominator(wide, p.g, p.linewidth, p.r, 0.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the NumPy backend is available")
    names = sorted(backends)
    print(f"{'workload':34s}" + "".join(f"{n:>14s}" for n in names) + ("   speedup" if len(names) > 1 else ""))
    for label, fn in workloads().items():
        best = {}
        for n in names:
            impl = backends[n]
            number = 3
            t = min(timeit.repeat(lambda: fn(impl), number=number, repeat=args.repeat)) / number
            best[n] = t
        row = f"{label:34s}" + "".join(f"{best[n] * 1e3:11.3f} ms" for n in names)
        if len(names) > 1:
            row += f"   {best['python'] / best['cython']:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()

import math

import numpy as np
import pytest

from spinfridge import kernels, model
from spinfridge.constants import NV_HYPERFINE_OFFSETS

BACKENDS = sorted(kernels.available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel implementation."""
    impl = kernels.available_backends()[request.param]
    for name in ("closed_form_denominator", "resolvent_row", "resolvent_rows_stack"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


@pytest.fixture
def fig4():
    return model.FIG4_SYSTEM


@pytest.fixture
def env290():
    return model.ThermalEnv(290.0)


@pytest.fixture
def bath08():
    return model.SpinBath(0.8)


@pytest.fixture
def nv_bath():
    return model.SpinBath(0.8, NV_HYPERFINE_OFFSETS, "per_ensemble")


def random_draws(n, seed):
    """Parameter draws over the validation domain: rates log-uniform 1 kHz to 10 MHz (angular)."""
    rng = np.random.default_rng(seed)
    lo, hi = math.log(2 * math.pi * 1e3), math.log(2 * math.pi * 1e7)
    rates = np.exp(rng.uniform(lo, hi, size=(n, 4)))
    pol = rng.uniform(0.05, 1.0, size=n)
    temp = rng.uniform(4.0, 400.0, size=n)
    out = []
    for (g, kappa, gamma, r), p, t in zip(rates, pol, temp):
        params = model.SystemParams(g=g, kappa=kappa, gamma=gamma, r=r, omega_c=2 * math.pi * 2.87e9)
        out.append((params, model.SpinBath(float(p)), model.ThermalEnv(float(t))))
    return out


def adaptive_grid(params, points=401):
    scale = 10.0 * max(params.g, params.kappa, params.gamma, params.r)
    return np.linspace(-scale, scale, points)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """``acceptance(criterion, check, ok, detail)`` records one check and prints it."""
    book = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(criterion, check, ok, detail):
        book.setdefault(criterion, []).append((check, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {criterion} / {check}: {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, config):
    book = config.stash.get(_ACCEPTANCE, None)
    if not book:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, checks in book.items():
        ok = all(c[1] for c in checks)
        detail = "; ".join(f"{name}: {d}{'' if good else ' [FAIL]'}" for name, good, d in checks)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {criterion}  ({detail})")

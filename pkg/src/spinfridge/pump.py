"""Optical pumping of the spin ensemble: two-level rate model and P-dependent coupling.

Steady state of dP/dt = G_p (1 - P) - G_1(T) P is P = G_p / (G_p + G_1). The
optical pump rate G_p grows linearly with intensity; the spin-lattice rate
G_1 grows with the diamond temperature, which the absorbed pump raises.
Together they flatten P(power) at high power.

Default coefficients are order-of-magnitude values for an ensemble NV sample
at room temperature (T1 of a few ms, Raman T^5 and ~73 meV two-phonon
Orbach terms). They are configuration, not fitted physics: ``eta_pump`` and
``heating`` were chosen so that P(3 W) = 0.8 with a 5 mm beam and the curve
is flat within a few percent between 3 and 10 W.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from spinfridge.constants import BOLTZMANN_EV
from spinfridge.errors import ConfigError, DomainError
from spinfridge.oracle import hybrid_mode_splitting


class CouplingScaling(enum.Enum):
    SQRT = "sqrt"
    LINEAR = "linear"
    CONSTANT = "constant"


@dataclass(frozen=True)
class T1Model:
    """G_1(T) = sample + raman * T^5 + orbital / (exp(orbital_energy / kT) - 1), in 1/s."""

    sample_rate: float = 20.0
    raman_coeff: float = 2.2e-11  # 1/(s K^5)
    orbital_rate: float = 2.1e3
    orbital_energy: float = 0.073  # eV

    def __post_init__(self):
        for name in ("sample_rate", "raman_coeff", "orbital_rate", "orbital_energy"):
            v = getattr(self, name)
            if not (np.all(np.asarray(v) >= 0) and np.all(np.isfinite(v))):
                raise ConfigError(f"t1.{name} must be finite and non-negative, got {v!r}")


@dataclass(frozen=True)
class PumpConfig:
    eta_pump: float = 8.1e6  # 1/s per mW/um^2
    beam_diameter_mm: float = 5.0
    t1: T1Model = field(default_factory=T1Model)
    heating: float = 15.0  # K/W
    base_temperature: float = 295.0  # K

    def __post_init__(self):
        if not np.all(np.asarray(self.eta_pump) >= 0):
            raise ConfigError("eta_pump must be non-negative")
        if not np.all(np.asarray(self.beam_diameter_mm) > 0):
            raise ConfigError("beam_diameter_mm must be positive")
        if not np.all(np.asarray(self.heating) >= 0):
            raise ConfigError("heating must be non-negative")
        if not np.all(np.asarray(self.base_temperature) > 0):
            raise ConfigError("base_temperature must be positive")

    def intensity(self, power):
        """Mean intensity in mW/um^2 of ``power`` watts over the beam disc."""
        radius_um = 0.5e3 * np.asarray(self.beam_diameter_mm)
        return 1e3 * np.asarray(power, dtype=float) / (math.pi * radius_um**2)

    def temperature(self, power):
        return self.base_temperature + self.heating * np.asarray(power, dtype=float)


def t1_rate(t1_model, temperature):
    temperature = np.asarray(temperature, dtype=float)
    if np.any(temperature <= 0):
        raise DomainError("temperature must be positive")
    m = t1_model
    x = np.asarray(m.orbital_energy) / (BOLTZMANN_EV * temperature)
    with np.errstate(over="ignore"):
        orbach = np.where(x > 0, np.exp(-x) / -np.expm1(-np.maximum(x, 1e-300)), 0.0)
    rate = m.sample_rate + m.raman_coeff * temperature**5 + m.orbital_rate * orbach
    return float(rate) if np.ndim(rate) == 0 else rate


def steady_polarization(cfg, power):
    """P = G_p / (G_p + G_1(T)); zero without pump light."""
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise DomainError("power must be non-negative")
    pump = cfg.eta_pump * cfg.intensity(power)
    relax = t1_rate(cfg.t1, cfg.temperature(power))
    with np.errstate(invalid="ignore"):
        p = np.where(pump > 0, pump / (pump + relax), 0.0)
    return float(p) if p.ndim == 0 else p


def coupling_scaling(g0, polarization, mode):
    p = np.asarray(polarization, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("polarization must lie in [0, 1]")
    mode = CouplingScaling(mode)
    if mode is CouplingScaling.SQRT:
        out = g0 * np.sqrt(p)
    elif mode is CouplingScaling.LINEAR:
        out = g0 * p
    else:
        out = g0 * np.ones_like(p)
    return float(out) if out.ndim == 0 else out


def bare_coupling(g_ref, reference_polarization, mode):
    """Coupling at P = 1 that reproduces ``g_ref`` at ``reference_polarization``."""
    return g_ref / coupling_scaling(1.0, reference_polarization, mode)


def _effective_coupling(params, polarization, mode, reference_polarization):
    g0 = params.g
    if reference_polarization is not None:
        g0 = bare_coupling(g0, reference_polarization, mode)
    return coupling_scaling(g0, polarization, mode)


def splitting_vs_power(cfg, params, powers, mode=CouplingScaling.SQRT, reference_polarization=None):
    """Hybrid-mode splitting (rad/s) of the resonant one-ensemble network per pump power."""
    p = steady_polarization(cfg, np.asarray(powers, dtype=float))
    g_eff = _effective_coupling(params, p, mode, reference_polarization)
    return np.atleast_1d(hybrid_mode_splitting(g_eff, params.linewidth, params.r))


@dataclass(frozen=True)
class UncertainParameter:
    """``name`` is a PumpConfig field or ``t1.<field>``; ``central`` defaults to the config value."""

    name: str
    relative_width: float
    distribution: str = "lognormal"
    central: float | None = None

    def __post_init__(self):
        if self.distribution not in ("lognormal", "normal"):
            raise ConfigError(f"unknown distribution {self.distribution!r} for {self.name}")
        if self.relative_width < 0:
            raise ConfigError(f"relative_width of {self.name} must be non-negative")


_PUMP_FIELDS = ("eta_pump", "beam_diameter_mm", "heating", "base_temperature")
_T1_FIELDS = ("sample_rate", "raman_coeff", "orbital_rate", "orbital_energy")


def _get(cfg, name):
    if name in _PUMP_FIELDS:
        return getattr(cfg, name)
    if name.startswith("t1.") and name[3:] in _T1_FIELDS:
        return getattr(cfg.t1, name[3:])
    raise ConfigError(f"unknown uncertain parameter {name!r}")


def _with(cfg, values):
    pump = {k: v for k, v in values.items() if k in _PUMP_FIELDS}
    t1 = {k[3:]: v for k, v in values.items() if k.startswith("t1.")}
    return replace(cfg, t1=replace(cfg.t1, **t1), **pump)


def _draw(rng, spec, central, n):
    z = rng.standard_normal(n)
    if spec.distribution == "lognormal":
        sigma = math.sqrt(math.log1p(spec.relative_width**2))
        return central * np.exp(sigma * z)
    return np.clip(central * (1.0 + spec.relative_width * z), 0.0, None)


@dataclass(frozen=True, eq=False)
class MonteCarloBand:
    power_grid: np.ndarray
    percentiles: tuple
    polarization: tuple  # (lower, median, upper) arrays
    splitting: tuple | None = None  # rad/s, same layout


MC_CHUNK = 1024


def sample_configs(cfg, uncertain, samples, seed):
    """Vectorized PumpConfig whose uncertain fields hold ``samples``-long arrays.

    Draws come in fixed chunks of MC_CHUNK samples, each from its own child
    of ``SeedSequence(seed)``, so a sample's value depends only on the seed
    and its index.
    """
    centrals = {u.name: (_get(cfg, u.name) if u.central is None else u.central) for u in uncertain}
    children = np.random.SeedSequence(seed).spawn(-(-samples // MC_CHUNK))
    columns = {u.name: [] for u in uncertain}
    for c, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        n = min(MC_CHUNK, samples - c * MC_CHUNK)
        for u in uncertain:
            columns[u.name].append(_draw(rng, u, centrals[u.name], MC_CHUNK)[:n])
    values = {k: np.concatenate(v)[:, None] for k, v in columns.items()}
    return _with(cfg, values)


def monte_carlo_band(cfg, uncertain, powers, samples=10_000, seed=0, params=None,
                     mode=CouplingScaling.SQRT, reference_polarization=None,
                     percentiles=(16.0, 50.0, 84.0)):
    """Percentile bands of P (and of the splitting, when ``params`` is given) per power."""
    if samples < 100:
        raise DomainError("monte_carlo_band needs at least 100 samples")
    powers = np.asarray(powers, dtype=float)
    vcfg = sample_configs(cfg, uncertain, samples, seed)
    p = np.broadcast_to(steady_polarization(vcfg, powers[None, :]), (samples, powers.size))
    pol = tuple(np.percentile(p, q, axis=0) for q in percentiles)
    split = None
    if params is not None:
        g_eff = _effective_coupling(params, p, mode, reference_polarization)
        dnu = hybrid_mode_splitting(g_eff, params.linewidth, params.r)
        split = tuple(np.percentile(dnu, q, axis=0) for q in percentiles)
    return MonteCarloBand(powers, tuple(percentiles), pol, split)

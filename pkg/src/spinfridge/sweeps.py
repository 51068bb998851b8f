"""Parameter-space studies built from the model, the oracle and the pump model."""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from spinfridge import model, oracle
from spinfridge.errors import DomainError
from spinfridge.model import SpinBath, SystemParams
from spinfridge.pump import CouplingScaling, _effective_coupling, steady_polarization
from spinfridge.workers import worker_count


class KappaRule(enum.Enum):
    """Output coupling used for each (g, Q) cell."""

    INTRACAVITY = "intracavity"  # no output port; occupation seen by the mode itself
    CRITICAL = "critical"  # kappa = gamma, the minimized output-port spectrum
    FIXED = "fixed"  # a given kappa for every cell


@dataclass(frozen=True, eq=False)
class TemperatureMap:
    g_grid: np.ndarray
    q_grid: np.ndarray
    min_temperature: np.ndarray  # (len(g_grid), len(q_grid)), K
    argmin_omega: np.ndarray  # rad/s, the positive root when split
    metadata: dict


def _cell_minimum(g, gamma, polarization, env, n_t, omega_c, r_ratio, rule, kappa):
    r = r_ratio * g
    n_c = model.cold_bath_occupation(polarization)
    if rule is KappaRule.INTRACAVITY:
        # Bath-weighted occupation of the mode: the kappa -> 0 limit with the
        # cavity probed directly. Largest cold weight sits on the spin line.
        g2 = g * g
        w = 4.0 * g2 / (4.0 * g2 + r * gamma) if g2 > 0 else 0.0
        return n_t + (n_c - n_t) * w, 0.0
    k = gamma if rule is KappaRule.CRITICAL else kappa
    params = SystemParams(g=g, kappa=k, gamma=gamma, r=r, omega_c=omega_c)
    bath = SpinBath(polarization)
    info = model.peak_analysis(params, bath, env)
    return n_t - info.depth, info.minima_locations[-1]


def min_temperature_map(g_grid, q_grid, polarization, env, omega_c, r_ratio=1.0,
                        kappa_rule=KappaRule.INTRACAVITY, kappa=None, workers=None):
    """Minimum mode temperature over frequency for every (g, Q) cell.

    Per cell gamma = omega_c / Q and r = r_ratio * g. The minimum occupation
    comes from the closed-form peak analysis and is converted to kelvin with
    the Bose-Einstein inverse at ``omega_c``.
    """
    g_grid = np.asarray(g_grid, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    if g_grid.size == 0 or q_grid.size == 0:
        raise DomainError("grids must be non-empty")
    if np.any(q_grid <= 0) or np.any(g_grid < 0):
        raise DomainError("need Q > 0 and g >= 0")
    rule = KappaRule(kappa_rule)
    if rule is KappaRule.FIXED and (kappa is None or kappa < 0):
        raise DomainError("kappa_rule 'fixed' needs a non-negative kappa")
    n_t = env.n_T(omega_c)

    def row(i):
        out = np.empty((q_grid.size, 2))
        for j, q in enumerate(q_grid):
            out[j] = _cell_minimum(g_grid[i], omega_c / q, polarization, env, n_t, omega_c,
                                   r_ratio, rule, kappa)
        return out

    with ThreadPoolExecutor(worker_count(workers)) as pool:
        rows = list(pool.map(row, range(g_grid.size)))
    cells = np.stack(rows)
    occ = np.minimum(cells[..., 0], n_t)
    temps = model.occupation_to_temperature(occ, omega_c)
    meta = {
        "polarization": polarization,
        "ambient_temperature": env.temperature,
        "omega_c": omega_c,
        "r_ratio": r_ratio,
        "kappa_rule": rule.value,
        "kappa": kappa,
        "delta": 0.0,
    }
    return TemperatureMap(g_grid, q_grid, np.atleast_2d(temps), cells[..., 1], meta)


@dataclass(frozen=True)
class CoolingPoint:
    power: float
    polarization: float
    g_eff: float
    peak_db: float
    temperature: float


def cooling_vs_power(powers, cfg, params, env, mode=CouplingScaling.SQRT,
                     hyperfine_offsets=(0.0,), split_mode=model.CouplingSplit.PER_ENSEMBLE,
                     loss_db=model.FIG4_LOSS_DB, reference_polarization=model.FIG4_POLARIZATION,
                     grid=None, detector_noise=0.0):
    """Peak output-noise change (dB) and inferred temperature per pump power.

    ``params.g`` is the coupling at ``reference_polarization`` (the value a fit
    at that polarization reports); ``mode`` sets how it scales with P.
    """
    if grid is None:
        grid = np.linspace(-2 * math.pi * 2e6, 2 * math.pi * 2e6, 2001)
    n_t = env.n_T(params.omega_c)
    points = []
    for power in np.atleast_1d(np.asarray(powers, dtype=float)):
        p = float(steady_polarization(cfg, power))
        if p == 0.0:
            points.append(CoolingPoint(float(power), 0.0, 0.0, 0.0, env.temperature))
            continue
        g_eff = float(_effective_coupling(params, p, mode, reference_polarization))
        bath = SpinBath(p, hyperfine_offsets, split_mode)
        net = oracle.build_network(params.replace(g=g_eff), 0.0, bath, env)
        spec = model.apply_loss(oracle.frequency_spectrum(net, grid), loss_db, n_t)
        db = float(np.min(spec.to_db(n_t).values))
        t = model.noise_ratio_to_temperature(db, env.temperature, detector_noise)
        points.append(CoolingPoint(float(power), p, g_eff, db, t))
    return points


def cable_decay(depth0, lengths, alpha):
    """Cooling depth after ``lengths`` metres of line with decay length ``alpha``."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    lengths = np.asarray(lengths, dtype=float)
    return depth0 * np.exp(-lengths / alpha)


def cable_loss_db(length, alpha):
    """Attenuation in dB equivalent to ``length`` metres: eta = exp(-L/alpha)."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    return 10.0 * length / (alpha * math.log(10.0))


def cable_spectrum(spec, length, alpha, ambient):
    """Spectrum after the line, as a thermal beam splitter at ``ambient``."""
    return model.apply_loss(spec, cable_loss_db(length, alpha), ambient)

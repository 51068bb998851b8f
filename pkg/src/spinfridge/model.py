"""Closed-form linear model of a cavity mode cooled by a polarized spin bath.

All rates are angular frequencies (rad/s). Occupations are mean excitation
numbers and may be large (a 3 GHz mode at room temperature holds ~2000
photons).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from spinfridge import kernels
from spinfridge.constants import BOLTZMANN, HBAR, NV_HYPERFINE_OFFSETS, TWO_PI
from spinfridge.errors import DomainError, NumericalError


class CouplingSplit(enum.Enum):
    """How a collective coupling ``g`` is shared among hyperfine sub-ensembles."""

    EQUAL_POWER = "equal_power"  # g_k = g / sqrt(K), total g^2 preserved
    PER_ENSEMBLE = "per_ensemble"  # g_k = g for every sub-ensemble


@dataclass(frozen=True)
class SystemParams:
    g: float
    kappa: float
    gamma: float
    r: float
    omega_c: float

    def __post_init__(self):
        for name in ("g", "kappa", "gamma", "r", "omega_c"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
            if v < 0:
                raise DomainError(f"{name} must be non-negative, got {v!r}")
        if self.omega_c <= 0:
            raise DomainError("omega_c must be positive")
        if self.kappa + self.gamma <= 0:
            raise DomainError("kappa + gamma must be positive (finite cavity linewidth)")

    @classmethod
    def from_hz(cls, g, kappa, gamma, r, cavity_frequency):
        """Build from ordinary frequencies in Hz ("2 pi x kHz" values)."""
        return cls(
            g=TWO_PI * g,
            kappa=TWO_PI * kappa,
            gamma=TWO_PI * gamma,
            r=TWO_PI * r,
            omega_c=TWO_PI * cavity_frequency,
        )

    @property
    def linewidth(self):
        """Total cavity energy-decay rate kappa + gamma."""
        return self.kappa + self.gamma

    @property
    def quality_factor(self):
        return self.omega_c / self.gamma if self.gamma > 0 else math.inf

    def replace(self, **changes):
        values = {k: getattr(self, k) for k in ("g", "kappa", "gamma", "r", "omega_c")}
        values.update(changes)
        return SystemParams(**values)


@dataclass(frozen=True)
class SpinBath:
    polarization: float
    hyperfine_offsets: tuple = (0.0,)
    coupling_split_mode: CouplingSplit = CouplingSplit.PER_ENSEMBLE

    def __post_init__(self):
        if not 0.0 < self.polarization <= 1.0:
            raise DomainError(f"polarization must lie in (0, 1], got {self.polarization!r}")
        offsets = tuple(float(x) for x in self.hyperfine_offsets)
        if not offsets:
            raise DomainError("hyperfine_offsets must be non-empty")
        object.__setattr__(self, "hyperfine_offsets", offsets)
        object.__setattr__(self, "coupling_split_mode", CouplingSplit(self.coupling_split_mode))

    @property
    def n_c(self):
        return cold_bath_occupation(self.polarization)

    @property
    def n_ensembles(self):
        return len(self.hyperfine_offsets)

    @classmethod
    def nv(cls, polarization, coupling_split_mode=CouplingSplit.PER_ENSEMBLE):
        """Three 14N hyperfine lines at -2.15, 0, +2.15 MHz."""
        return cls(polarization, NV_HYPERFINE_OFFSETS, coupling_split_mode)


@dataclass(frozen=True)
class ThermalEnv:
    temperature: float

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature!r}")

    def n_T(self, omega):
        return bose_occupation(omega, self.temperature)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Occupation-valued spectral density on a detuning grid (rad/s)."""

    detuning_grid: np.ndarray
    values: np.ndarray
    unit: str = "occupation"

    def __post_init__(self):
        grid = np.asarray(self.detuning_grid, dtype=float)
        vals = np.asarray(self.values)
        if grid.ndim != 1 or grid.shape != vals.shape:
            raise DomainError("grid and values must be 1-D arrays of equal length")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise DomainError("detuning grid must be strictly increasing")
        object.__setattr__(self, "detuning_grid", grid)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    def to_db(self, reference):
        return spectrum_to_db(self, reference)

    def to_kelvin(self, omega):
        """Bose-Einstein temperature of every bin at mode frequency ``omega``."""
        return occupation_to_temperature(self.values, omega)

    def to_noise_temperature(self, reference, reference_temperature):
        """Linear noise temperature, as a power meter calibrated at one point reads it."""
        return reference_temperature * self.values / reference


@dataclass(frozen=True)
class PeakInfo:
    split: bool
    minima_locations: tuple
    depth: float
    bracket: float
    regime_threshold: float


def bose_occupation(omega, temperature):
    """Mean thermal occupation 1/(exp(hbar w / k T) - 1)."""
    omega = np.asarray(omega, dtype=float)
    temperature = np.asarray(temperature, dtype=float)
    if np.any(omega <= 0) or np.any(temperature <= 0):
        raise DomainError("bose_occupation needs omega > 0 and temperature > 0")
    x = HBAR * omega / (BOLTZMANN * temperature)
    # e^-x / (1 - e^-x) neither overflows for small T nor loses digits for large T
    n = np.exp(-x) / -np.expm1(-x)
    return float(n) if n.ndim == 0 else n


def occupation_to_temperature(n, omega):
    """Inverse of :func:`bose_occupation`: hbar w / (k ln(1 + 1/n))."""
    n = np.asarray(n, dtype=float)
    if np.any(~(n > 0)):
        raise DomainError("occupation must be positive (below vacuum has no temperature)")
    if omega <= 0:
        raise DomainError("omega must be positive")
    t = HBAR * omega / (BOLTZMANN * np.log1p(1.0 / n))
    return float(t) if t.ndim == 0 else t


def cold_bath_occupation(polarization):
    """Effective occupation (1 - P) / (2P) of a spin bath with polarization P."""
    if not 0.0 < polarization <= 1.0:
        raise DomainError(f"polarization must lie in (0, 1], got {polarization!r}")
    return (1.0 - polarization) / (2.0 * polarization)


def cooling_ratio(params):
    """Return ``(xi, sin2theta)``.

    ``xi`` reduces the broadening ``r`` to the effective cooling rate ``xi*r``;
    ``sin2theta`` is the weight of the cold bath in the intracavity occupation.
    An uncoupled system (g = 0) returns (0, 0).
    """
    g2 = params.g**2
    if g2 == 0.0:
        return 0.0, 0.0
    xi = 4.0 * g2 / (4.0 * g2 + params.r * (params.r + params.linewidth))
    cooling = xi * params.r
    return xi, cooling / (params.linewidth + cooling)


def _single_offset(bath):
    if bath.n_ensembles != 1:
        raise DomainError(
            "closed forms describe one spin pseudo-mode; use spinfridge.oracle for "
            f"{bath.n_ensembles} sub-ensembles"
        )
    return bath.hyperfine_offsets[0]


def mean_photon_number(params, bath, env):
    """Steady-state intracavity occupation for resonant spins."""
    if _single_offset(bath) != 0.0:
        raise DomainError("mean_photon_number is the resonant result; offset must be 0")
    n_t = env.n_T(params.omega_c)
    _, s2 = cooling_ratio(params)
    return (1.0 - s2) * n_t + s2 * bath.n_c


def closed_form_bracket(params, grid, delta=0.0):
    """Fraction of the cold bath reaching the output port, kappa r g^2 / D(w)."""
    grid = np.ascontiguousarray(grid, dtype=float)
    den = kernels.closed_form_denominator(grid, params.g, params.linewidth, params.r, delta)
    if np.any(~(den > 0)):
        raise NumericalError("closed-form denominator is not positive; parameters invalid")
    return params.kappa * params.r * params.g**2 / den


def output_spectrum(params, delta, bath, env, grid):
    """Output-port noise spectrum N_P(w) of the single-pseudo-mode model.

    ``delta`` enters exactly as in the closed form: the cavity factor of the
    denominator is evaluated at ``w - delta``. In the network picture of
    :mod:`spinfridge.oracle` (cavity at 0, spins at ``delta``) this is the
    same system with ``delta -> -delta`` and the frequency axis shifted by
    ``delta``; the two agree identically at ``delta = 0``.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise DomainError("grid must be non-empty")
    delta = delta + _single_offset(bath)
    n_t = env.n_T(params.omega_c)
    values = n_t + (bath.n_c - n_t) * closed_form_bracket(params, grid, delta)
    return Spectrum(grid, values)


def peak_analysis(params, bath, env):
    """Location and depth of the output-noise minimum for resonant spins.

    The minimum sits at w = 0 unless 8g^2 > r^2 + (kappa+gamma)^2, in which
    case it splits to w = +-sqrt(g^2 - [r^2 + (kappa+gamma)^2]/8). Equality is
    assigned to the unsplit branch, where both expressions coincide.

    The unsplit depth uses 16 kappa r g^2 / (4g^2 + r(kappa+gamma))^2, which is
    the closed-form spectrum evaluated at w = 0. (A coefficient of 2 in place of
    16 does not reproduce the spectrum.)
    """
    _single_offset(bath)
    n_t = env.n_T(params.omega_c)
    g2 = params.g**2
    s = params.linewidth
    r = params.r
    threshold = 8.0 * g2 - (r * r + s * s)
    if threshold > 0:
        w2 = g2 - (r * r + s * s) / 8.0
        w0 = math.sqrt(w2)
        den = (params.gamma + params.kappa + r) ** 2 * (16.0 * g2 - (params.gamma + params.kappa - r) ** 2)
        bracket = 64.0 * params.kappa * r * g2 / den
        depth = 64.0 * params.kappa * r * g2 * (n_t - bath.n_c) / den
        locations = (-w0, w0)
    else:
        den = (4.0 * g2 + r * s) ** 2
        bracket = 16.0 * params.kappa * r * g2 / den if den > 0 else 0.0
        depth = (n_t - bath.n_c) * bracket
        locations = (0.0,)
    return PeakInfo(
        split=threshold > 0,
        minima_locations=locations,
        depth=depth,
        bracket=bracket,
        regime_threshold=threshold,
    )


def spectrum_to_db(spec, reference):
    """Map every value to 10 log10(value / reference)."""
    if not reference > 0:
        raise DomainError("reference must be positive")
    if np.any(~(spec.values > 0)):
        raise DomainError("dB conversion needs strictly positive values")
    return Spectrum(spec.detuning_grid, 10.0 * np.log10(spec.values / reference), unit="dB")


def loss_transmission(loss_db):
    if not loss_db >= 0:
        raise DomainError(f"loss must be non-negative, got {loss_db!r} dB")
    return 10.0 ** (-loss_db / 10.0)


def apply_loss(spec, loss_db, ambient):
    """Passive attenuator at occupation ``ambient``: v -> eta v + (1 - eta) ambient."""
    eta = loss_transmission(loss_db)
    return Spectrum(spec.detuning_grid, eta * spec.values + (1.0 - eta) * ambient, spec.unit)


def noise_ratio_to_temperature(ratio_db, ambient_temperature, detector_noise=0.0):
    """Effective temperature implied by a noise-power change in dB.

    With ``detector_noise = 0`` this is the naive conversion T_amb * 10^(dB/10).
    A detector adding ``detector_noise`` kelvin to both the pumped and the
    reference measurement gives T = ratio (T_amb + T_det) - T_det.
    """
    ratio = 10.0 ** (np.asarray(ratio_db, dtype=float) / 10.0)
    t = ratio * (ambient_temperature + detector_noise) - detector_noise
    return float(t) if t.ndim == 0 else t


# Fig. 4 fit of the experiment: 2891 MHz cavity, P = 0.8, 1.35 dB detection loss.
FIG4_SYSTEM = SystemParams.from_hz(
    g=197.7e3, kappa=185.1e3, gamma=140e3, r=229.0e3, cavity_frequency=2.891e9
)
FIG4_POLARIZATION = 0.8
FIG4_TEMPERATURE = 290.0
FIG4_LOSS_DB = 1.35


def dip_fwhm(grid, values, baseline=0.0):
    """Full width of the dip containing the global minimum, at half its depth below ``baseline``.

    Crossings are linearly interpolated between grid points. Raises
    DomainError when the dip does not return above half depth inside the grid.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float) - baseline
    i = int(np.argmin(values))
    half = 0.5 * values[i]
    if not half < 0:
        raise DomainError("no dip below the baseline")
    above = values > half
    left = np.nonzero(above[:i])[0]
    right = np.nonzero(above[i:])[0]
    if left.size == 0 or right.size == 0:
        raise DomainError("dip is wider than the grid")
    a = left[-1]
    b = i + right[0]

    def cross(j, k):
        return grid[j] + (half - values[j]) * (grid[k] - grid[j]) / (values[k] - values[j])

    return float(cross(b - 1, b) - cross(a, a + 1))

"""Physical constants and unit helpers.

SI values are the exact 2019 redefinition numbers; everything else in the
package takes angular frequencies in rad/s.
"""
import math
import re

PLANCK = 6.62607015e-34  # J s, exact
HBAR = PLANCK / (2.0 * math.pi)  # 1.054571817646...e-34 J s
BOLTZMANN = 1.380649e-23  # J/K, exact
BOLTZMANN_EV = BOLTZMANN / 1.602176634e-19  # eV/K

TWO_PI = 2.0 * math.pi

# 14N hyperfine spacing of the NV ground-state spin lines.
NV_HYPERFINE_SPACING_HZ = 2.15e6
NV_HYPERFINE_OFFSETS = (
    -TWO_PI * NV_HYPERFINE_SPACING_HZ,
    0.0,
    TWO_PI * NV_HYPERFINE_SPACING_HZ,
)

_SUFFIX = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_FREQ_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*([a-zA-Z]*)\s*$")


def parse_hz(value):
    """Parse a plain-Hz number or a string such as ``"197.7 kHz"`` into Hz."""
    if isinstance(value, bool):
        raise ValueError(f"not a frequency: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"not a frequency: {value!r}")
    m = _FREQ_RE.match(value)
    if m is None:
        raise ValueError(f"not a frequency: {value!r}")
    number, unit = m.groups()
    unit = unit.lower() or "hz"
    if unit not in _SUFFIX:
        raise ValueError(f"unknown frequency unit {unit!r} in {value!r}")
    return float(number) * _SUFFIX[unit]


def hz_to_angular(f_hz):
    return TWO_PI * f_hz


def angular_to_hz(omega):
    return omega / TWO_PI

"""Linear Langevin network: cavity mode plus one damped pseudo-mode per sub-ensemble.

The Lorentzian-broadened spin ensemble is replaced by a single bosonic mode
damped at the broadening rate ``r`` into a bath at the cold occupation n_c.
Everything here is solved numerically (resolvent per frequency, dense
Lyapunov solve), which makes it an independent check of the closed forms in
:mod:`spinfridge.model` and the only route for several hyperfine lines.

Frame and sign conventions: the frame rotates at the cavity frequency,
``dx/dt = A x + sum_j sqrt(rate_j) x_in,j`` with ``A[m, m] = -i*detuning_m -
damping_m/2`` and ``A[0, k] = A[k, 0] = -i g_k``. The monitored field is
``a_out = sqrt(kappa) a - a_in,kappa`` and spectra are normally ordered, so a
bare thermal port reads exactly its occupation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from spinfridge import kernels
from spinfridge.model import CouplingSplit, Spectrum
from spinfridge.errors import DomainError, NumericalError


@dataclass(frozen=True, eq=False)
class LinearNetwork:
    """Drift matrix, input channels per mode, and the monitored port.

    ``input_rates[m]`` lists ``(rate, occupation)`` for every bath mode ``m``
    couples to. The first entry of the output mode is the monitored channel.
    """

    drift: np.ndarray
    input_rates: tuple
    output_port: tuple  # (mode index, rate)

    @property
    def dimension(self):
        return self.drift.shape[0]

    @property
    def n_ensembles(self):
        return self.dimension - 1

    def diffusion(self):
        return np.diag([sum(rate * n for rate, n in chans) for chans in self.input_rates])

    def is_stable(self):
        return bool(np.all(np.linalg.eigvals(self.drift).real < 0))


def sub_ensemble_couplings(g, n, mode):
    mode = CouplingSplit(mode)
    if mode is CouplingSplit.EQUAL_POWER:
        return [g / math.sqrt(n)] * n
    return [g] * n


def build_network(params, delta, bath, env):
    """Cavity at detuning 0; sub-ensemble k at ``delta + offset_k``."""
    k = bath.n_ensembles
    n_t = env.n_T(params.omega_c)
    n_c = bath.n_c
    drift = np.zeros((k + 1, k + 1), dtype=complex)
    drift[0, 0] = -0.5 * params.linewidth
    for i, (off, gk) in enumerate(
        zip(bath.hyperfine_offsets, sub_ensemble_couplings(params.g, k, bath.coupling_split_mode)),
        start=1,
    ):
        drift[i, i] = -1j * (delta + off) - 0.5 * params.r
        drift[0, i] = drift[i, 0] = -1j * gk
    inputs = [((params.kappa, n_t), (params.gamma, n_t))]
    inputs += [((params.r, n_c),)] * k
    return LinearNetwork(drift, tuple(inputs), (0, params.kappa))


def _rows(net, grid, port=None):
    grid = np.ascontiguousarray(np.atleast_1d(np.asarray(grid, dtype=float)))
    if grid.size == 0:
        raise DomainError("grid must be non-empty")
    port = net.output_port[0] if port is None else port
    rows, bad = kernels.resolvent_row(np.ascontiguousarray(net.drift), grid, port)
    if bad >= 0:
        raise NumericalError(f"singular network response at omega = {grid[bad]!r} rad/s")
    return grid, rows


def _output_occupation(net, rows):
    port, rate_out = net.output_port
    root_out = math.sqrt(rate_out)
    total = np.zeros(rows.shape[:-1])
    for m, chans in enumerate(net.input_rates):
        for j, (rate, n) in enumerate(chans):
            t = root_out * math.sqrt(rate) * rows[..., m]
            if m == port and j == 0:
                t = t - 1.0
            total += (t.real**2 + t.imag**2) * n
    return total


def frequency_spectrum(net, grid):
    """Normally ordered output occupation spectrum at the monitored port."""
    grid, rows = _rows(net, grid)
    return Spectrum(grid, _output_occupation(net, rows))


def frequency_spectrum_stack(nets, grid):
    """Output spectra of networks sharing one channel layout; shape (len(nets), len(grid)).

    One kernel call covers every network, which is what map-sized workloads need.
    """
    grid = np.ascontiguousarray(np.atleast_1d(np.asarray(grid, dtype=float)))
    first = nets[0]
    drifts = np.ascontiguousarray(np.stack([n.drift for n in nets]))
    rows, bad = kernels.resolvent_rows_stack(drifts, grid, first.output_port[0])
    if bad >= 0:
        k, i = divmod(bad, grid.size)
        raise NumericalError(f"singular network response (network {k}) at omega = {grid[i]!r} rad/s")
    return _output_occupation(first, rows)


def intracavity_spectrum(net, grid, mode=0):
    """Spectral density S(w) of mode ``mode``; (1/2pi) * integral = occupation."""
    grid, rows = _rows(net, grid, port=mode)
    total = np.zeros(grid.size)
    for m, chans in enumerate(net.input_rates):
        absr2 = rows[:, m].real ** 2 + rows[:, m].imag ** 2
        for rate, n in chans:
            total += rate * n * absr2
    return Spectrum(grid, total, unit="occupation/(rad/s)")


def intracavity_occupation_spectrum(net, grid, mode=0):
    """Bath-weighted occupation seen by ``mode`` at each frequency.

    Each bath contributes to S(w) with weight ``rate * |chi|^2``; this returns
    the weighted mean of the bath occupations, i.e. the occupation an ideal,
    infinitesimally coupled probe of the mode would read at ``w``.
    """
    grid, rows = _rows(net, grid, port=mode)
    num = np.zeros(grid.size)
    den = np.zeros(grid.size)
    for m, chans in enumerate(net.input_rates):
        absr2 = rows[:, m].real ** 2 + rows[:, m].imag ** 2
        for rate, n in chans:
            num += rate * n * absr2
            den += rate * absr2
    return Spectrum(grid, num / den)


def steady_state_occupations(net):
    """Mode occupations from A C + C A^dagger + D = 0."""
    if not net.is_stable():
        raise NumericalError("drift matrix has an eigenvalue with non-negative real part")
    cov = solve_continuous_lyapunov(net.drift, -net.diffusion())
    return np.real(np.diag(cov)).copy()


def reflection_spectrum(net, grid):
    """Complex reflection S11(w) = 1 - kappa * chi_cc(w) at the monitored port."""
    port, rate_out = net.output_port
    _, rows = _rows(net, grid)
    return 1.0 - rate_out * rows[:, port]


def hybrid_mode_splitting(g, linewidth, r):
    """Frequency separation of the two hybrid modes of a resonant cavity-spin pair.

    Vectorized closed form of the 2x2 drift eigenvalues: 2 sqrt(g^2 - ((s - r)/4)^2),
    zero when the radicand is not positive.
    """
    g = np.asarray(g, dtype=float)
    rad = g**2 - ((np.asarray(linewidth) - np.asarray(r)) / 4.0) ** 2
    out = 2.0 * np.sqrt(np.clip(rad, 0.0, None))
    return float(out) if out.ndim == 0 else out


def mode_splitting(net):
    """Real-frequency separation |Im l+ - Im l-| of the hybrid eigenmodes (rad/s)."""
    if net.n_ensembles != 1:
        raise DomainError("mode_splitting needs one sub-ensemble; use reflection_spectrum")
    a = net.drift
    if a[0, 0].imag != 0.0 or a[1, 1].imag != 0.0:
        raise DomainError("mode_splitting needs resonant spins (zero detuning)")
    half_c, half_s = -a[0, 0].real, -a[1, 1].real
    g = abs(a[0, 1])
    # unresolved regime: eigenvalues are real up to rounding
    if 4.0 * g * g <= (half_c - half_s) ** 2:
        return 0.0
    lam = np.linalg.eigvals(a)
    return float(abs(lam[0].imag - lam[1].imag))

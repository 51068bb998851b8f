import math

import numpy as np
import pytest

from spinfridge import model, oracle, sweeps
from spinfridge.constants import NV_HYPERFINE_OFFSETS, TWO_PI
from spinfridge.errors import DomainError
from spinfridge.model import SpinBath, SystemParams, ThermalEnv
from spinfridge.pump import PumpConfig
from spinfridge.sweeps import KappaRule
from spinfridge.workers import worker_count

OMEGA_C = TWO_PI * 2.87e9
ENV = ThermalEnv(290.0)
G = TWO_PI * np.geomspace(1e4, 1e7, 25)
Q = np.geomspace(1e3, 1e6, 25)


@pytest.fixture(scope="module")
def tmap():
    return sweeps.min_temperature_map(G, Q, 0.8, ENV, OMEGA_C)


class TestTemperatureMap:
    def test_monotone(self, tmap):
        t = tmap.min_temperature
        assert np.all(np.diff(t, axis=0) <= 0)
        assert np.all(np.diff(t, axis=1) <= 0)

    def test_uncoupled_row_is_ambient(self):
        m = sweeps.min_temperature_map([0.0], Q, 0.8, ENV, OMEGA_C)
        np.testing.assert_allclose(m.min_temperature, 290.0, rtol=1e-12)

    def test_floor(self):
        floor = model.occupation_to_temperature(model.cold_bath_occupation(0.8), OMEGA_C)
        assert floor == pytest.approx(0.063, abs=0.001)
        m = sweeps.min_temperature_map(TWO_PI * np.array([1e8, 1e9]), [1e8, 1e9], 0.8, ENV, OMEGA_C)
        assert np.all(m.min_temperature >= floor)
        assert m.min_temperature[-1, -1] == pytest.approx(floor, rel=0.01)

    def test_cryogenic_cell(self):
        m = sweeps.min_temperature_map([TWO_PI * 1e6], [3e4], 0.8, ENV, OMEGA_C)
        assert m.min_temperature[0, 0] < 77.0

    def test_critical_rule_is_not_monotone(self):
        """Recorded behaviour of the output-port alternative: depth is lost once the dip splits."""
        m = sweeps.min_temperature_map(G, Q, 0.8, ENV, OMEGA_C, kappa_rule="critical")
        assert np.any(np.diff(m.min_temperature, axis=0) > 0)

    def test_intracavity_matches_network_probe(self):
        g, gamma = TWO_PI * 3e5, OMEGA_C / 5e4
        p = SystemParams(g=g, kappa=0.0, gamma=gamma, r=g, omega_c=OMEGA_C)
        net = oracle.build_network(p, 0.0, SpinBath(0.8), ENV)
        probe = oracle.intracavity_occupation_spectrum(net, [0.0]).values[0]
        cell = sweeps.min_temperature_map([g], [5e4], 0.8, ENV, OMEGA_C)
        assert model.occupation_to_temperature(probe, OMEGA_C) == pytest.approx(
            cell.min_temperature[0, 0], rel=1e-12)

    def test_critical_rule_uses_peak_analysis(self):
        g, q = TWO_PI * 2e5, 2e4
        m = sweeps.min_temperature_map([g], [q], 0.8, ENV, OMEGA_C, kappa_rule="critical")
        gamma = OMEGA_C / q
        p = SystemParams(g=g, kappa=gamma, gamma=gamma, r=g, omega_c=OMEGA_C)
        info = model.peak_analysis(p, SpinBath(0.8), ENV)
        expect = model.occupation_to_temperature(ENV.n_T(OMEGA_C) - info.depth, OMEGA_C)
        assert m.min_temperature[0, 0] == pytest.approx(expect, rel=1e-14)
        assert m.argmin_omega[0, 0] == info.minima_locations[-1]

    def test_fixed_rule_needs_kappa(self):
        with pytest.raises(DomainError):
            sweeps.min_temperature_map(G[:2], Q[:2], 0.8, ENV, OMEGA_C, kappa_rule="fixed")
        m = sweeps.min_temperature_map(G[:2], Q[:2], 0.8, ENV, OMEGA_C, kappa_rule="fixed", kappa=1e5)
        assert m.metadata["kappa"] == 1e5

    def test_workers_do_not_change_result(self, tmap):
        m = sweeps.min_temperature_map(G, Q, 0.8, ENV, OMEGA_C, workers=4)
        assert np.array_equal(m.min_temperature, tmap.min_temperature)

    def test_metadata(self, tmap):
        assert tmap.metadata["kappa_rule"] == "intracavity"
        assert tmap.metadata["polarization"] == 0.8

    def test_bad_grid(self):
        with pytest.raises(DomainError):
            sweeps.min_temperature_map([], Q, 0.8, ENV, OMEGA_C)
        with pytest.raises(DomainError):
            sweeps.min_temperature_map(G, [0.0], 0.8, ENV, OMEGA_C)


class TestCoolingVsPower:
    def test_dark_point(self, fig4, env290):
        (pt,) = sweeps.cooling_vs_power([0.0], PumpConfig(), fig4, env290)
        assert pt.peak_db == 0.0 and pt.temperature == 290.0

    def test_three_watts(self, fig4, env290):
        (pt,) = sweeps.cooling_vs_power([3.0], PumpConfig(), fig4, env290,
                                        hyperfine_offsets=NV_HYPERFINE_OFFSETS)
        assert pt.peak_db == pytest.approx(-2.3, abs=0.3)
        assert pt.g_eff == pytest.approx(fig4.g, rel=0.01)

    def test_detector_noise_lowers_estimate(self, fig4, env290):
        naive = sweeps.cooling_vs_power([3.0], PumpConfig(), fig4, env290)[0]
        corr = sweeps.cooling_vs_power([3.0], PumpConfig(), fig4, env290, detector_noise=80.0)[0]
        assert corr.peak_db == naive.peak_db and corr.temperature < naive.temperature


class TestCable:
    def test_identities(self):
        assert sweeps.cable_decay(140.0, 0.0, 5.3) == 140.0
        assert sweeps.cable_decay(140.0, 5.3, 5.3) == pytest.approx(140.0 / math.e, rel=1e-15)

    def test_six_metres(self):
        d = float(sweeps.cable_decay(140.0, 6.0, 5.3))
        assert d == pytest.approx(45.0, abs=0.5)
        assert d == pytest.approx(40.0, rel=0.15)

    @pytest.mark.parametrize("length", [0.5, 6.0, 17.0])
    def test_scalar_equals_spectrum_level(self, length):
        ambient = 290.0
        spec = model.Spectrum(np.array([-1.0, 0.0, 1.0]), np.array([250.0, 150.0, 250.0]))
        after = sweeps.cable_spectrum(spec, length, 5.3, ambient)
        depth_after = ambient - after.values.min()
        scalar = float(sweeps.cable_decay(ambient - spec.values.min(), length, 5.3))
        assert depth_after == pytest.approx(scalar, rel=1e-12)

    def test_alpha_positive(self):
        with pytest.raises(DomainError):
            sweeps.cable_decay(1.0, 1.0, 0.0)


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("SPINFRIDGE_THREADS", "2")
    assert worker_count(8) == 2
    assert worker_count() == 1
    monkeypatch.delenv("SPINFRIDGE_THREADS")
    assert worker_count(8) == 8

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import E0, FIG3_PHASE, SIGMA_E, pulse
from fessi.constants import HBAR
from fessi.interferometer import (FWHM_PER_SIGMA, Interferogram, MeasurementConfig,
                                  check_constraints, delay, fessi_arms, fringe_visibility,
                                  interfere, measure, measure_spectrum, simulate_measurement,
                                  spectrometer_response, three_term_expansion)
from fessi.lem import shear
from fessi.wavepacket import EnergyGrid

FIG3 = MeasurementConfig(tau=30.0, delta_E=0.1, resolution=0.01)


def _tau_with_carrier(cycles):
    """Delay that puts ``cycles`` carrier periods of ``E0`` into ``tau``."""
    return 2 * math.pi * HBAR * cycles / E0


class TestDelay:
    @given(st.floats(0.5, 500.0))
    def test_magnitude_unchanged(self, tau):
        psi = pulse(SIGMA_E, FIG3_PHASE)
        assert np.max(np.abs(np.abs(delay(psi, tau).samples) - np.abs(psi.samples))) < 1e-14

    def test_composition(self, fig3_pulse):
        a = delay(delay(fig3_pulse, 12.5), 17.5).samples
        b = delay(fig3_pulse, 30.0).samples
        assert np.max(np.abs(a - b)) < 1e-9

    def test_zero_is_identity(self, fig3_pulse):
        assert delay(fig3_pulse, 0.0) is fig3_pulse

    def test_absolute_energy_phase(self, tl_pulse):
        tau = 30.0
        ratio = delay(tl_pulse, tau).samples / tl_pulse.samples
        k = tl_pulse.grid.count // 2 + 7
        expected = -tl_pulse.grid.energies[k] * tau / HBAR
        assert np.angle(ratio[k] * np.exp(-1j * expected)) == pytest.approx(0.0, abs=1e-8)


class TestInterference:
    @given(st.floats(5.0, 400.0), st.floats(-0.8, 0.8))
    def test_three_term_identity(self, tau, delta_E):
        psi = pulse(SIGMA_E, FIG3_PHASE)
        a, b = fessi_arms(psi, tau, delta_E)
        direct = interfere(a, b).intensity
        assert np.max(np.abs(direct - three_term_expansion(a, b))) < 1e-12 * direct.max()

    def test_cosine_argument(self, fig3_pulse):
        tau, de = 30.0, 0.1
        a, b = fessi_arms(fig3_pulse, tau, de)
        e = fig3_pulse.grid.energies
        q = fig3_pulse.grid.offsets
        core = np.abs(q - de / 2) < 3 * SIGMA_E
        ra, rb = np.abs(a.samples), np.abs(b.samples)
        arg = FIG3_PHASE(q) - FIG3_PHASE(q - de) - e * tau / HBAR
        ref = ra ** 2 + rb ** 2 + 2 * ra * rb * np.cos(arg)
        got = interfere(a, b).intensity
        assert np.max(np.abs(got - ref)[core]) < 1e-8 * got.max()

    def test_constructive_and_destructive(self, tl_pulse):
        k = round(30.0 * E0 / (2 * math.pi * HBAR))
        mid = tl_pulse.grid.count // 2
        peak = tl_pulse.density[mid]
        on = interfere(*fessi_arms(tl_pulse, _tau_with_carrier(k), 0.0)).intensity
        off = interfere(*fessi_arms(tl_pulse, _tau_with_carrier(k + 0.5), 0.0)).intensity
        assert on[mid] == pytest.approx(4 * peak, rel=1e-8)
        assert off[mid] < 1e-8 * peak

    def test_mismatched_grids(self, tl_pulse):
        other = pulse(SIGMA_E, None, count=2048)
        with pytest.raises(ValueError):
            interfere(tl_pulse, other)


class TestConstraints:
    def test_fig3_window(self):
        rep = check_constraints(SIGMA_E, FIG3)
        assert rep.tau_min == pytest.approx(4.8654914077694156, rel=1e-12)
        assert rep.tau_max == pytest.approx(413.56676966040032, rel=1e-12)
        assert rep.fringe_period == pytest.approx(0.13785558988680011, rel=1e-12)
        assert rep.visibility == pytest.approx(math.exp(-0.01 / (4 * SIGMA_E ** 2)))
        assert rep.ok

    @pytest.mark.parametrize("cfg, failing", [
        (MeasurementConfig(3.0, 0.1), "tau_ok"),
        (MeasurementConfig(500.0, 0.1), "tau_ok"),
        (MeasurementConfig(30.0, 1.0), "shear_ok"),
        (MeasurementConfig(30.0, 0.1, resolution=0.2), "fringes_resolved"),
    ])
    def test_violations(self, cfg, failing):
        rep = check_constraints(SIGMA_E, cfg)
        assert not getattr(rep, failing) and not rep.ok
        assert len(rep.lines()) == 4

    def test_measured_fringe_period(self, tl_pulse):
        # conjugate peak of the fringe term sits at tau, i.e. period 2 pi hbar / tau
        sig = interfere(*fessi_arms(tl_pulse, 30.0, 0.0)).intensity
        spec = np.abs(np.fft.rfft(sig))
        k = np.argmax(spec[5:]) + 5
        period = tl_pulse.grid.spacing * tl_pulse.grid.count / k
        assert period == pytest.approx(0.13785558988680011, rel=0.01)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(tau=0.0, delta_E=0.1), dict(tau=30, delta_E=0.1, resolution=0),
        dict(tau=30, delta_E=0.1, jitter_fraction=-1), dict(tau=30, delta_E=0.1, shots=0),
        dict(tau=30, delta_E=0.1, shots=1.5), dict(tau=30, delta_E=0.1, detector="ccd"),
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            MeasurementConfig(**kwargs)

    def test_calibration_drops_shear(self):
        cal = MeasurementConfig(30, 0.1, jitter_fraction=1e-5, shots=10).calibration()
        assert cal.delta_E == 0 and cal.shots == 10 and cal.jitter_fraction == 1e-5

    def test_negative_intensity_rejected(self):
        with pytest.raises(ValueError):
            Interferogram(EnergyGrid(E0, 0.01, 4), np.array([1.0, -1.0, 0.0, 0.0]))


class TestSpectrometer:
    def test_cosine_attenuation(self):
        grid = EnergyGrid(E0, 0.001, 4096)
        period = grid.count * grid.spacing / 64
        x = 1.0 + np.cos(2 * np.pi * grid.offsets / period)
        out = spectrometer_response(x, grid, 0.02)
        sigma = 0.02 / FWHM_PER_SIGMA
        factor = math.exp(-0.5 * (2 * math.pi * sigma / period) ** 2)
        ref = 1.0 + factor * np.cos(2 * np.pi * grid.offsets / period)
        assert np.max(np.abs(out - ref)) < 1e-12

    def test_area_preserved(self, fig3_pulse):
        out = measure_spectrum(fig3_pulse, FIG3)
        assert np.sum(out.intensity) * out.grid.spacing == pytest.approx(1.0, abs=1e-9)
        assert out.grid.spacing == pytest.approx(0.005)

    def test_coarse_resolution_warns_and_washes_out(self, fig3_pulse):
        fine = MeasurementConfig(30.0, 0.1, resolution=0.01, detector="native")
        coarse = MeasurementConfig(30.0, 0.1, resolution=0.15, detector="native")
        a, b = fessi_arms(fig3_pulse, 30.0, 0.1)
        m_fine = measure(a, b, fine)
        m_coarse = measure(a, b, coarse)
        assert not m_fine.warnings
        assert any("unresolvable" in w for w in m_coarse.warnings)
        v_fine, v_coarse = fringe_visibility(m_fine, 30.0), fringe_visibility(m_coarse, 30.0)
        assert v_coarse < 0.5 * v_fine


class TestJitter:
    def _visibility(self, psi, frac, seed=7):
        cfg = MeasurementConfig(30.0, 0.0, jitter_fraction=frac, shots=1000, detector="native")
        return fringe_visibility(measure(delay(psi, 30.0), psi, cfg, seed), 30.0)

    def test_monotone_with_common_draws(self, tl_pulse):
        fracs = [0.0, 5e-7, 1e-6, 2e-6, 3e-6, 4e-6]
        vis = [self._visibility(tl_pulse, f) for f in fracs]
        assert all(a > b for a, b in zip(vis, vis[1:]))

    @pytest.mark.parametrize("frac", [1e-6, 2e-6, 4e-6])
    def test_matches_gaussian_dephasing(self, tl_pulse, frac):
        ratio = self._visibility(tl_pulse, frac) / self._visibility(tl_pulse, 0.0)
        s = E0 * frac * 30.0 / HBAR
        assert ratio == pytest.approx(math.exp(-s * s / 2), abs=0.05)

    def test_deterministic_under_seed(self, fig3_pulse):
        cfg = MeasurementConfig(30.0, 0.1, jitter_fraction=1e-5, shots=50)
        one = simulate_measurement(fig3_pulse, cfg, seed=3)
        two = simulate_measurement(fig3_pulse, cfg, seed=3)
        other = simulate_measurement(fig3_pulse, cfg, seed=4)
        for x, y in zip(one, two):
            assert np.array_equal(x.intensity, y.intensity)
        assert not np.array_equal(one[0].intensity, other[0].intensity)

    def test_shots_irrelevant_without_jitter(self, fig3_pulse):
        a, b = fessi_arms(fig3_pulse, 30.0, 0.1)
        one = measure(a, b, MeasurementConfig(30.0, 0.1, shots=1))
        many = measure(a, b, MeasurementConfig(30.0, 0.1, shots=100))
        assert np.array_equal(one.intensity, many.intensity)


def test_simulate_measurement_runs(fig3_pulse):
    signal, cal, spec = simulate_measurement(fig3_pulse, FIG3)
    assert signal.grid.same_as(cal.grid) and cal.grid.same_as(spec.grid)
    assert cal.config.delta_E == 0
    sheared = shear(fig3_pulse, 0.1)
    again, _, _ = simulate_measurement(fig3_pulse, FIG3, sheared=sheared)
    assert np.array_equal(signal.intensity, again.intensity)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import E0, FIG3_PHASE, SIGMA_E, pulse
from fessi.interferometer import Interferogram, MeasurementConfig, simulate_measurement
from fessi.reconstruction import (PhaseSamples, PhaseTrace, ReconstructionError, calibrate,
                                  concatenate, densify, extract_ac, fidelity, phase_difference,
                                  reconstruct, remove_gauge, super_gaussian)
from fessi.wavepacket import EnergyGrid, SpectralPhaseSpec, to_time_domain

FIG3 = MeasurementConfig(tau=30.0, delta_E=0.1, resolution=0.01)


def closed_loop(psi, cfg, phase, seed=0):
    sig, cal, spec = simulate_measurement(psi, cfg, seed)
    return reconstruct(sig, cal, spec, cfg, reference_phase=phase)


@pytest.fixture(scope="module")
def fig3_measurement(fig3_pulse):
    return simulate_measurement(fig3_pulse, FIG3)


def test_super_gaussian_shape():
    t = np.array([30.0, 15.0, 45.0, 0.0, 60.0])
    w = super_gaussian(t, 30.0, 30.0, 4)
    np.testing.assert_allclose(w[:3], [1.0, 0.5, 0.5], rtol=1e-14)
    assert w[3] < 1e-50 and w[4] < 1e-50
    assert super_gaussian(34.0, 30.0, 30.0) > 0.99


class TestExtraction:
    def test_peak_at_delay(self, fig3_measurement):
        sig = fig3_measurement[0]
        ac = extract_ac(sig, 30.0)
        step = ac.times[1] - ac.times[0]
        assert abs(ac.peak_time - 30.0) <= step
        assert 0.3 < ac.ac_to_dc < 0.5

    def test_flat_interferogram(self):
        flat = Interferogram(EnergyGrid(E0, 0.005, 2048), np.ones(2048))
        with pytest.raises(ReconstructionError, match="interference too weak"):
            extract_ac(flat, 30.0)

    def test_delay_beyond_conjugate_range(self, fig3_measurement):
        with pytest.raises(ReconstructionError, match="aliased"):
            extract_ac(fig3_measurement[0], 450.0)


class TestPhaseDifference:
    def test_matches_finite_difference(self, fig3_measurement):
        sig, cal, _ = fig3_measurement
        theta = calibrate(phase_difference(extract_ac(sig, 30.0)),
                          phase_difference(extract_ac(cal, 30.0)))
        q = theta.grid.offsets
        core = np.abs(q - 0.05) < 2 * SIGMA_E
        ref = FIG3_PHASE(q) - FIG3_PHASE(q - 0.1)
        assert np.max(np.abs(theta.values[core] - ref[core])) < 0.01

    def test_calibration_against_itself(self, fig3_measurement):
        p = phase_difference(extract_ac(fig3_measurement[1], 30.0))
        theta = calibrate(p, p)
        assert np.all(theta.values[theta.valid] == 0.0)

    def test_jittered_theta(self, fig3_pulse):
        cfg = MeasurementConfig(30.0, 0.1, jitter_fraction=1e-5, shots=1000)
        sig, cal, _ = simulate_measurement(fig3_pulse, cfg, seed=0)
        theta = calibrate(phase_difference(extract_ac(sig, 30.0)),
                          phase_difference(extract_ac(cal, 30.0)))
        q = theta.grid.offsets
        core = np.abs(q - 0.05) < 2 * SIGMA_E
        ref = FIG3_PHASE(q) - FIG3_PHASE(q - 0.1)
        # jitter leaves a constant offset between runs; it only adds a linear phase
        diff = theta.values[core] - ref[core]
        diff -= np.average(diff, weights=theta.amplitude[core])
        assert np.sqrt(np.mean(diff ** 2)) < 0.05

    def test_grid_mismatch(self, fig3_measurement):
        a = phase_difference(extract_ac(fig3_measurement[0], 30.0))
        other = PhaseTrace(EnergyGrid(E0, 0.001, 16), np.zeros(16))
        with pytest.raises(ValueError):
            calibrate(a, other)


def _trace(values, spacing=0.01, count=1001):
    grid = EnergyGrid(E0, spacing, count)
    return grid, PhaseTrace(grid, values(grid.offsets))


class TestConcatenation:
    def test_telescoping(self):
        f = lambda q: 3.0 * q ** 2 - 0.7 * q ** 3 + np.sin(4 * q)
        de = 0.05
        grid, theta = _trace(lambda q: f(q) - f(q - de))
        lat = concatenate(theta, de)
        q = lat.energies - E0
        np.testing.assert_allclose(lat.values, f(q) - f(0.0), atol=1e-10)
        assert np.allclose(np.diff(lat.energies), de)

    def test_constant_theta(self):
        _, theta = _trace(lambda q: np.full_like(q, 0.2))
        lat = concatenate(theta, 0.1)
        n = np.round((lat.energies - E0) / 0.1)
        np.testing.assert_allclose(lat.values, 0.2 * n, atol=1e-12)

    def test_linear_in_theta(self):
        _, a = _trace(lambda q: np.cos(3 * q))
        _, b = _trace(lambda q: q ** 3)
        both = PhaseTrace(a.grid, a.values + b.values)
        sa, sb, sab = (concatenate(x, 0.07) for x in (a, b, both))
        np.testing.assert_allclose(sab.values, sa.values + sb.values, atol=1e-10)

    def test_stops_at_mask(self):
        _, theta = _trace(lambda q: np.where(np.abs(q) < 1.0, 0.1, np.nan))
        lat = concatenate(theta, 0.1)
        assert lat.energies.min() >= E0 - 1.0 - 0.1 and lat.energies.max() <= E0 + 1.0

    def test_rejects_zero_shear_and_masked_anchor(self):
        _, theta = _trace(lambda q: np.where(q < 0, 0.1, np.nan))
        with pytest.raises(ValueError):
            concatenate(theta, 0.0, E0 - 1.0)
        with pytest.raises(ValueError):
            concatenate(theta, 0.1, E0 + 1.0)


class TestDensify:
    def test_cubic_reproduced(self):
        x = E0 + np.arange(-10, 11) * 0.1
        cubic = lambda e: (e - E0) ** 3 - 2 * (e - E0)
        lat = PhaseSamples(x, cubic(x), 0.1, E0)
        e = E0 + np.linspace(-0.95, 0.95, 77)
        out = densify(lat, e, np.ones(e.size, bool))
        np.testing.assert_allclose(out, cubic(e), atol=1e-12)

    def test_masked_outside_support(self):
        x = E0 + np.arange(-3, 4) * 0.1
        lat = PhaseSamples(x, np.zeros(7), 0.1, E0)
        support = np.array([True, False, True])
        out = densify(lat, E0 + np.array([0.0, 0.1, 5.0]), support)
        assert out[0] == 0 and np.isnan(out[1]) and out[2] == 0

    def test_needs_two_points(self):
        with pytest.raises(ReconstructionError):
            densify(PhaseSamples(np.array([E0]), np.zeros(1), 0.1, E0), np.array([E0]),
                    np.ones(1, bool))


class TestFidelity:
    q = np.linspace(-1, 1, 201)
    w = np.exp(-q ** 2 / (4 * 0.3 ** 2))

    def test_identical(self):
        phi = 2 * self.q ** 2
        f = fidelity(phi, phi, self.w, self.q)
        assert f.value == 1.0 and f.rms_error == 0.0

    def test_definition(self):
        support = np.ones(self.q.size, bool)
        o = remove_gauge(self.q, 2 * self.q ** 2, self.w)
        r = remove_gauge(self.q, 2 * self.q ** 2 + 0.1 * self.q ** 3, self.w)
        expect = np.sum(o ** 2) / (np.sum((r - o) ** 2) + np.sum(o ** 2))
        f = fidelity(2 * self.q ** 2, 2 * self.q ** 2 + 0.1 * self.q ** 3, self.w, self.q, support)
        assert f.value == pytest.approx(expect, rel=1e-14)

    def test_flat_phase_is_degenerate(self):
        f = fidelity(0.3 + 0.2 * self.q, 0.3 + 0.2 * self.q, self.w, self.q)
        assert f.degenerate and math.isnan(f.value)

    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_gauge_invariant(self, a, b):
        phi_o = 2 * self.q ** 2 - self.q ** 3
        phi_r = phi_o + 0.05 * np.sin(5 * self.q)
        base = fidelity(phi_o, phi_r, self.w, self.q).value
        moved = fidelity(phi_o, phi_r + a + b * self.q, self.w, self.q).value
        assert abs(base - moved) < 1e-6

    def test_ignores_nan(self):
        phi_r = 2 * self.q ** 2
        phi_r[:10] = np.nan
        assert fidelity(2 * self.q ** 2, phi_r, self.w, self.q).value == 1.0


class TestClosedLoop:
    @pytest.mark.parametrize("sigma, tau, de", [(0.2, 30.0, 0.05), (0.425, 30.0, 0.1),
                                                (4.25, 5.0, 1.0)])
    def test_bandwidths(self, sigma, tau, de):
        phase = SpectralPhaseSpec(poly={2: 0.5 / sigma ** 2, 3: 0.2 / sigma ** 3})
        psi = pulse(sigma, phase)
        res = closed_loop(psi, MeasurementConfig(tau, de), phase)
        assert res.fidelity.value > 0.99
        assert res.metadata["reference_plane"] == "LEM"

    def test_fig3_temporal_overlay(self, fig3_pulse):
        res = closed_loop(fig3_pulse, FIG3, FIG3_PHASE)
        assert res.fidelity.value > 0.9999
        orig = to_time_domain(fig3_pulse)
        ref = np.interp(res.temporal.times, orig.times, orig.intensity)
        dev = np.max(np.abs(res.temporal.intensity - ref)) / ref.max()
        assert dev < 0.01

    def test_shear_u_shape(self, fig3_pulse):
        # noise is amplified ~1/dE by concatenation; large dE loses the overlap
        def err(de):
            cfg = MeasurementConfig(30.0, de, jitter_fraction=1e-5, shots=1000)
            return closed_loop(fig3_pulse, cfg, FIG3_PHASE).fidelity.rms_error

        err = {de: err(de) for de in (0.005, 0.1, 0.85, 1.2)}
        assert err[0.005] > err[0.1] > err[0.85] < err[1.2]

    @pytest.mark.parametrize("tau", [3.0, 450.0])
    def test_delay_collapse(self, fig3_pulse, tau):
        try:
            res = closed_loop(fig3_pulse, MeasurementConfig(tau, 0.1), FIG3_PHASE)
        except ReconstructionError:
            return
        assert res.fidelity.value < 0.9

    def test_small_sinusoidal_phase(self):
        phase = SpectralPhaseSpec(oscillatory=(0.3, 0.4, 0.0))
        psi = pulse(SIGMA_E, phase)
        assert closed_loop(psi, FIG3, phase).fidelity.value > 0.99

    def test_zero_phase_stays_flat(self, tl_pulse):
        res = closed_loop(tl_pulse, FIG3, lambda q: np.zeros_like(q))
        assert res.fidelity.degenerate
        ok = res.support & np.isfinite(res.dense_phase)
        flat = remove_gauge(res.grid.offsets[ok], res.dense_phase[ok], res.amplitude[ok])
        assert np.max(np.abs(flat)) < 1e-3

    def test_mismatched_inputs(self, fig3_measurement):
        sig, cal, spec = fig3_measurement
        with pytest.raises(ValueError):
            reconstruct(sig, cal, spec.intensity[:-1], FIG3)

"""Spectral-phase retrieval from shearing interferograms.

Pipeline: transform the interferogram to the conjugate (pseudo-time) axis,
gate the a.c. sideband at ``+tau`` with a super-Gaussian, transform back and
take the argument, subtract a zero-shear calibration run, then concatenate the
phase differences on a lattice spaced by the shear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .constants import HBAR
from .interferometer import (Interferogram, MeasurementConfig, conjugate_axis, from_conjugate,
                             to_conjugate)
from .wavepacket import EnergyGrid, SpectralWavefunction, TemporalWavefunction, to_time_domain


class ReconstructionError(RuntimeError):
    """The interferogram does not carry a usable a.c. term."""


def super_gaussian(t, center: float, fwhm: float, order: int = 4) -> np.ndarray:
    """``exp(-ln2 * (2 (t - center) / fwhm)^(2 order))``; equals 1/2 at ``center +/- fwhm/2``."""
    x = 2.0 * (np.asarray(t, dtype=float) - center) / fwhm
    return np.exp(-math.log(2.0) * x ** (2 * order))


@dataclass(frozen=True)
class AcExtraction:
    grid: EnergyGrid
    times: np.ndarray
    filtered: np.ndarray
    window: np.ndarray
    tau: float
    fwhm: float
    order: int
    peak_time: float
    ac_to_dc: float


@dataclass(frozen=True)
class PhaseTrace:
    """Phase sampled on an energy grid; ``nan`` where the signal is masked."""

    grid: EnergyGrid
    values: np.ndarray
    amplitude: Optional[np.ndarray] = None

    @property
    def energies(self) -> np.ndarray:
        return self.grid.energies

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)


@dataclass(frozen=True)
class PhaseSamples:
    energies: np.ndarray
    values: np.ndarray
    delta_E: float
    anchor: float


@dataclass(frozen=True)
class Fidelity:
    value: float
    rms_error: float
    degenerate: bool = False


@dataclass(frozen=True)
class ReconstructionResult:
    phase: PhaseSamples
    grid: EnergyGrid
    amplitude: np.ndarray
    dense_phase: np.ndarray
    support: np.ndarray
    theta: PhaseTrace
    temporal: TemporalWavefunction
    fidelity: Optional[Fidelity] = None
    metadata: dict = field(default_factory=dict)

    @property
    def spectral(self) -> SpectralWavefunction:
        phase = np.where(np.isfinite(self.dense_phase), self.dense_phase, 0.0)
        return SpectralWavefunction(self.grid, self.amplitude * np.exp(1j * phase)).normalized()


def extract_ac(interferogram: Interferogram, tau: float, fwhm: Optional[float] = None,
               order: int = 4, min_ac_ratio: float = 1e-9) -> AcExtraction:
    """Gate the ``+tau`` sideband of the conjugate transform.

    Raises :class:`ReconstructionError` when the delay is outside the
    conjugate range or no a.c. peak is found within 25 % of ``tau``.
    """
    grid = interferogram.grid
    t = conjugate_axis(grid)
    if tau >= t[-1]:
        raise ReconstructionError(
            f"delay {tau} fs beyond the conjugate range {t[-1]:.4g} fs of the "
            f"{grid.spacing:.4g} eV sampling: fringes are aliased")
    fwhm = tau if fwhm is None else fwhm
    d = to_conjugate(np.asarray(interferogram.intensity, dtype=complex))
    window = super_gaussian(t, tau, fwhm, order)
    filtered = d * window
    mag = np.abs(filtered)
    k = int(np.argmax(mag))
    dc = abs(d[np.argmin(np.abs(t))])
    ratio = float(mag[k] / dc) if dc > 0 else 0.0
    if ratio < min_ac_ratio or abs(t[k] - tau) > 0.25 * tau:
        raise ReconstructionError(
            f"no a.c. peak near tau={tau} fs (found t={t[k]:.4g} fs, a.c./d.c.={ratio:.3g}): "
            "interference too weak")
    return AcExtraction(grid, t, filtered, window, tau, fwhm, order, float(t[k]), ratio)


def _unwrap_from_peak(wrapped: np.ndarray, amp: np.ndarray, floor: float) -> np.ndarray:
    """Nearest-branch unwrap outward from the amplitude peak; ``nan`` below the floor."""
    out = np.full(wrapped.shape, np.nan)
    keep = amp >= floor * amp.max()
    p = int(np.argmax(amp))
    lo = p
    while lo > 0 and keep[lo - 1]:
        lo -= 1
    hi = p
    while hi < amp.size - 1 and keep[hi + 1]:
        hi += 1
    right = np.unwrap(wrapped[p:hi + 1])
    left = np.unwrap(wrapped[lo:p + 1][::-1])[::-1]
    out[p:hi + 1] = right
    out[lo:p + 1] = left
    return out


def phase_difference(ac: AcExtraction, amplitude_floor: float = 1e-6) -> PhaseTrace:
    """``arg`` of the back-transformed a.c. term, unwrapped along energy.

    The known carrier ``E tau / hbar`` is removed before unwrapping (so fringes
    close to the sampling limit unwrap cleanly) and restored afterwards.
    """
    grid = ac.grid
    signal = from_conjugate(ac.filtered)
    amp = np.abs(signal)
    carrier = math.fmod(grid.center * ac.tau / HBAR, 2 * math.pi) + grid.offsets * ac.tau / HBAR
    demod = np.angle(signal * np.exp(1j * carrier))
    values = _unwrap_from_peak(demod, amp, amplitude_floor) - carrier
    return PhaseTrace(grid, values, amp)


def calibrate(signal_phase: PhaseTrace, calibration_phase: PhaseTrace) -> PhaseTrace:
    """``theta = signal - calibration``; masked wherever either input is."""
    if not signal_phase.grid.same_as(calibration_phase.grid):
        raise ValueError("signal and calibration phases are on different grids")
    theta = signal_phase.values - calibration_phase.values
    amp = signal_phase.amplitude
    if amp is not None:
        p = int(np.nanargmax(np.where(np.isfinite(theta), amp, np.nan)))
        theta = theta - 2 * math.pi * round(theta[p] / (2 * math.pi))
    return PhaseTrace(signal_phase.grid, theta, amp)


def _valid_run(valid: np.ndarray, start: int):
    lo = hi = start
    while lo > 0 and valid[lo - 1]:
        lo -= 1
    while hi < valid.size - 1 and valid[hi + 1]:
        hi += 1
    return lo, hi


def concatenate(theta: PhaseTrace, delta_E: float, anchor: Optional[float] = None) -> PhaseSamples:
    """Cumulative sum of ``theta`` on the lattice ``anchor + N * delta_E``.

    ``phi(anchor) = 0``; ``phi(anchor + N dE) = sum_{n=1..N} theta(anchor + n dE)``
    for ``N > 0`` and ``-sum_{n=N+1..0} theta(anchor + n dE)`` for ``N < 0``.
    ``theta`` is cubically interpolated onto the lattice; the lattice stops at
    the first point whose required ``theta`` sample is masked.
    """
    if delta_E == 0:
        raise ValueError("concatenation needs a non-zero shear")
    e = theta.energies
    valid = theta.valid
    if anchor is None:
        anchor = theta.grid.center
    ia = int(np.argmin(np.abs(e - anchor)))
    if not valid[ia]:
        raise ValueError(f"anchor {anchor} eV lies outside the valid phase support")
    lo, hi = _valid_run(valid, ia)
    spline = CubicSpline(e[lo:hi + 1], theta.values[lo:hi + 1])
    e_lo, e_hi = e[lo], e[hi]

    def inside(x):
        return e_lo - 1e-9 <= x <= e_hi + 1e-9

    step = delta_E
    energies = [anchor]
    values = [0.0]
    # forward: phi(a + N dE) needs theta at a + n dE for n = 1..N
    acc, n = 0.0, 1
    while inside(anchor + n * step):
        acc += float(spline(anchor + n * step))
        energies.append(anchor + n * step)
        values.append(acc)
        n += 1
    # backward: phi(a + N dE), N < 0, needs theta at a + n dE for n = N+1..0
    acc, n = 0.0, 0
    while inside(anchor + n * step):
        acc -= float(spline(anchor + n * step))
        energies.append(anchor + (n - 1) * step)
        values.append(acc)
        n -= 1
    order = np.argsort(energies)
    return PhaseSamples(np.asarray(energies)[order], np.asarray(values)[order], delta_E, anchor)


def densify(phase: PhaseSamples, energies: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Cubic interpolation of the lattice phase onto ``energies``.

    Inside the lattice a not-a-knot spline is used; inside ``support`` but
    beyond the lattice the spline is extrapolated by at most one lattice step,
    then held constant. Outside ``support`` the result is ``nan``.
    """
    if phase.energies.size < 2:
        raise ReconstructionError("fewer than two concatenation lattice points")
    k = 'not-a-knot' if phase.energies.size >= 4 else 'natural'
    spline = CubicSpline(phase.energies, phase.values, bc_type=k)
    step = abs(phase.delta_E)
    lo = phase.energies[0] - step
    hi = phase.energies[-1] + step
    x = np.clip(energies, lo, hi)
    out = spline(x)
    return np.where(support, out, np.nan)


def _gauge_fit(x, y, w):
    """Weighted least-squares ``c0 + c1 x`` fit."""
    a = np.vstack([np.ones_like(x), x]).T * np.sqrt(w)[:, None]
    coef, *_ = np.linalg.lstsq(a, y * np.sqrt(w), rcond=None)
    return coef[0] + coef[1] * x


def remove_gauge(offsets, phase, weights):
    """Subtract the amplitude-weighted best-fit constant + linear phase."""
    return phase - _gauge_fit(offsets, phase, weights)


def fidelity(phi_original, phi_reconstructed, amplitude_weights, offsets=None,
             support=None) -> Fidelity:
    """``F = sum phi_o^2 / (sum (phi_r - phi_o)^2 + sum phi_o^2)`` on the support.

    Both phases first lose their amplitude-weighted best-fit constant and
    linear parts (the same projection for both), so ``F`` is insensitive to the
    unmeasurable gauge terms. ``support`` defaults to ``|psi| >= 1 %`` of peak.
    """
    phi_o = np.asarray(phi_original, dtype=float)
    phi_r = np.asarray(phi_reconstructed, dtype=float)
    w = np.asarray(amplitude_weights, dtype=float)
    if offsets is None:
        offsets = np.arange(phi_o.size, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    if support is None:
        support = w >= 0.01 * w.max()
    support = support & np.isfinite(phi_r) & np.isfinite(phi_o)
    x = offsets[support]
    ww = w[support]
    o = remove_gauge(x, phi_o[support], ww)
    r = remove_gauge(x, phi_r[support], ww)
    err = np.sum((r - o) ** 2)
    ref = np.sum(o ** 2)
    rms = float(math.sqrt(err / max(o.size, 1)))
    if ref <= 1e-24 * max(o.size, 1):
        return Fidelity(float("nan"), rms, True)
    return Fidelity(float(ref / (err + ref)), rms)


def amplitude_support(amplitude: np.ndarray, level: float = 0.01) -> np.ndarray:
    return amplitude >= level * amplitude.max()


def reconstruct(signal: Interferogram, calibration: Interferogram, single_arm_spectrum,
                config: MeasurementConfig, anchor: Optional[float] = None,
                reference_phase=None, amplitude_floor: float = 1e-6,
                filter_order: int = 4, filter_fwhm: Optional[float] = None) -> ReconstructionResult:
    """Full retrieval: amplitude from the single-arm spectrum, phase by FESSI.

    ``reference_phase`` (a callable of ``E - E0`` or an array on the detector
    grid) enables the fidelity score; the temporal waveform is then built from
    the gauge-aligned phase so it can be overlaid on the original.
    """
    if not signal.grid.same_as(calibration.grid):
        raise ValueError("signal and calibration interferograms are on different grids")
    grid = signal.grid
    spectrum = np.asarray(getattr(single_arm_spectrum, "intensity", single_arm_spectrum), dtype=float)
    if spectrum.shape != (grid.count,):
        raise ValueError("single-arm spectrum does not match the interferogram grid")
    amplitude = np.sqrt(np.clip(spectrum, 0.0, None))
    support = amplitude_support(amplitude)

    ac_sig = extract_ac(signal, config.tau, filter_fwhm, filter_order)
    ac_cal = extract_ac(calibration, config.tau, filter_fwhm, filter_order)
    theta = calibrate(phase_difference(ac_sig, amplitude_floor),
                      phase_difference(ac_cal, amplitude_floor))
    if anchor is None:
        anchor = grid.energies[int(np.argmax(amplitude))]
    lattice = concatenate(theta, config.delta_E, anchor)
    dense = densify(lattice, grid.energies, support)

    fid = None
    phase_for_time = np.where(support, dense, np.nan)
    if reference_phase is not None:
        ref = reference_phase(grid.offsets) if callable(reference_phase) else np.asarray(reference_phase)
        fid = fidelity(ref, dense, amplitude, grid.offsets, support)
        ok = support & np.isfinite(dense)
        aligned = dense.copy()
        aligned[ok] = dense[ok] - _gauge_fit(grid.offsets[ok], dense[ok] - ref[ok], amplitude[ok])
        phase_for_time = aligned
    filled = _fill_outside(phase_for_time)
    psi = SpectralWavefunction(grid, amplitude * np.exp(1j * filled)).normalized()
    temporal = to_time_domain(psi)
    meta = {
        "reference_plane": "LEM",
        "tau_fs": config.tau,
        "delta_E_eV": config.delta_E,
        "lattice_points": int(lattice.energies.size),
        "ac_peak_fs": ac_sig.peak_time,
        "ac_to_dc": ac_sig.ac_to_dc,
        "warnings": tuple(signal.warnings),
    }
    return ReconstructionResult(lattice, grid, amplitude, phase_for_time, support, theta,
                                temporal, fid, meta)


def _fill_outside(phase: np.ndarray) -> np.ndarray:
    """Hold the edge values beyond the finite region (amplitude there is < 1 % of peak)."""
    out = np.array(phase, dtype=float)
    ok = np.flatnonzero(np.isfinite(out))
    if ok.size == 0:
        return np.zeros_like(out)
    out[:ok[0]] = out[ok[0]]
    out[ok[-1] + 1:] = out[ok[-1]]
    mid = ~np.isfinite(out)
    if mid.any():
        idx = np.arange(out.size)
        out[mid] = np.interp(idx[mid], idx[~mid], out[~mid])
    return out

"""Measurement chain: Wien-filter delay, recombination, time jitter and the
spectrometer (Gaussian response plus pixel sampling).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .constants import HBAR, TWO_PI_HBAR
from .lem import shear
from .wavepacket import EnergyGrid, SpectralWavefunction, trig_interpolate

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class MeasurementConfig:
    """Settings of one FESSI measurement.

    ``tau`` (fs) is the Wien-filter delay, ``delta_E`` (eV) the shear and
    ``resolution`` (eV) the spectrometer FWHM. Shot-to-shot delay jitter is
    Gaussian with standard deviation ``jitter_fraction * tau``. ``detector``
    is ``"nyquist"`` (pixels every ``resolution / 2``) or ``"native"`` (keep
    the simulation lattice).
    """

    tau: float
    delta_E: float
    resolution: float = 0.01
    jitter_fraction: float = 0.0
    shots: int = 1
    detector: str = "nyquist"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if self.jitter_fraction < 0:
            raise ValueError("jitter_fraction must be non-negative")
        if int(self.shots) != self.shots or self.shots < 1:
            raise ValueError(f"shots must be a positive integer, got {self.shots}")
        if self.detector not in ("nyquist", "native"):
            raise ValueError(f"detector must be 'nyquist' or 'native', got {self.detector!r}")

    @property
    def pixel_pitch(self) -> float:
        return self.resolution / 2.0

    def calibration(self) -> "MeasurementConfig":
        return MeasurementConfig(self.tau, 0.0, self.resolution, self.jitter_fraction,
                                 self.shots, self.detector)


@dataclass(frozen=True)
class Interferogram:
    grid: EnergyGrid
    intensity: np.ndarray
    config: Optional[MeasurementConfig] = None
    warnings: tuple = field(default=())

    def __post_init__(self):
        a = np.array(self.intensity, dtype=float)
        if a.shape != (self.grid.count,):
            raise ValueError(f"expected {self.grid.count} samples, got shape {a.shape}")
        if np.any(a < 0):
            raise ValueError("interferogram intensity must be non-negative")
        a.setflags(write=False)
        object.__setattr__(self, "intensity", a)

    @property
    def energies(self) -> np.ndarray:
        return self.grid.energies


@dataclass(frozen=True)
class ConstraintReport:
    tau_min: float
    tau_max: float
    tau_ok: bool
    shear_ratio: float
    shear_ok: bool
    visibility: float
    fringe_period: float
    fringes_resolved: bool

    @property
    def ok(self) -> bool:
        return self.tau_ok and self.shear_ok and self.fringes_resolved

    def lines(self):
        return [
            f"tau_window_fs=({self.tau_min:.4f}, {self.tau_max:.4f}) ok={self.tau_ok}",
            f"shear_ratio={self.shear_ratio:.4f} ok={self.shear_ok}",
            f"ac_dc_visibility={self.visibility:.4f}",
            f"fringe_period_eV={self.fringe_period:.5f} resolved={self.fringes_resolved}",
        ]


def _carrier_phase(grid: EnergyGrid, tau: float) -> np.ndarray:
    # E0*tau/hbar is ~1e5 rad at 10 keV; reduce it before adding the small ramp
    base = math.fmod(grid.center * tau / HBAR, 2.0 * math.pi)
    return base + grid.offsets * tau / HBAR


def delay(psi: SpectralWavefunction, tau: float) -> SpectralWavefunction:
    """Multiply by ``exp(-i E tau / hbar)`` using absolute energies."""
    if tau == 0:
        return psi
    return psi.with_samples(psi.samples * np.exp(-1j * _carrier_phase(psi.grid, tau)))


def fessi_arms(psi: SpectralWavefunction, tau: float, delta_E: float):
    """The two recombined replicas: the delayed arm and the sheared arm.

    With this pairing ``|a + b|^2`` expands to
    ``|psi(E)|^2 + |psi(E-dE)|^2 + 2|..||..| cos(phi(E) - phi(E-dE) - E tau/hbar)``.
    """
    return delay(psi, tau), shear(psi, delta_E)


def interfere(arm_a: SpectralWavefunction, arm_b: SpectralWavefunction,
              config: Optional[MeasurementConfig] = None) -> Interferogram:
    if not arm_a.grid.same_as(arm_b.grid):
        raise ValueError("arms live on different energy grids")
    total = np.asarray(arm_a.samples) + np.asarray(arm_b.samples)
    return Interferogram(arm_a.grid, total.real ** 2 + total.imag ** 2, config)


def three_term_expansion(arm_a: SpectralWavefunction, arm_b: SpectralWavefunction) -> np.ndarray:
    """``|a|^2 + |b|^2 + 2|a||b| cos(arg a - arg b)`` evaluated term by term."""
    ra, rb = np.abs(arm_a.samples), np.abs(arm_b.samples)
    return ra ** 2 + rb ** 2 + 2 * ra * rb * np.cos(np.angle(arm_a.samples) - np.angle(arm_b.samples))


def detector_grid(grid: EnergyGrid, config: MeasurementConfig) -> EnergyGrid:
    if config.detector == "native":
        return grid
    pitch = config.pixel_pitch
    half = grid.spacing * (grid.count // 2 - 1)
    count = 2 * int(half // pitch)
    if count < 16:
        raise ValueError("simulation grid is too narrow for the detector pixel pitch")
    return EnergyGrid(grid.center, pitch, count)


def conjugate_axis(grid: EnergyGrid) -> np.ndarray:
    return grid.conjugate().times


def to_conjugate(values: np.ndarray) -> np.ndarray:
    """``sum_E f(E) exp(+i (E - E0) t / hbar)`` on the centred conjugate axis."""
    return np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(values)))


def from_conjugate(values: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.fft(np.fft.ifftshift(values)))


def spectrometer_response(intensity: np.ndarray, grid: EnergyGrid, resolution: float) -> np.ndarray:
    """Convolve with a unit-area Gaussian of FWHM ``resolution``.

    Applied as a multiplication on the conjugate axis, which is exact for a
    band-limited periodic signal.
    """
    sigma = resolution / FWHM_PER_SIGMA
    t = conjugate_axis(grid)
    kernel = np.exp(-0.5 * (sigma * t / HBAR) ** 2)
    out = from_conjugate(to_conjugate(np.asarray(intensity, dtype=complex)) * kernel).real
    return out


def _detect(intensity: np.ndarray, grid: EnergyGrid, config: MeasurementConfig):
    smooth = spectrometer_response(intensity, grid, config.resolution)
    dgrid = detector_grid(grid, config)
    if dgrid is not grid:
        smooth = trig_interpolate(smooth, grid, dgrid.energies)
    # Gaussian smoothing of a non-negative signal stays non-negative; clip roundoff
    return dgrid, np.clip(smooth, 0.0, None)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def measure(delayed: SpectralWavefunction, other: SpectralWavefunction, config: MeasurementConfig,
            seed: Union[int, np.random.Generator, None] = 0, chunk: int = 64) -> Interferogram:
    """Shot-averaged, resolution-limited interferogram.

    Every shot re-delays ``delayed`` by a Gaussian ``d_tau`` with the full
    ``exp(-i E d_tau / hbar)`` phase; shots are summed in draw order so the
    result is reproducible for a given seed.
    """
    if not delayed.grid.same_as(other.grid):
        raise ValueError("arms live on different energy grids")
    grid = delayed.grid
    rng = _rng(seed)
    a = np.asarray(delayed.samples)
    b = np.asarray(other.samples)
    sigma_tau = config.jitter_fraction * config.tau
    if sigma_tau == 0:
        total = a + b
        mean = total.real ** 2 + total.imag ** 2
    else:
        jitter = rng.normal(0.0, sigma_tau, size=config.shots)
        acc = np.zeros(grid.count)
        for s in range(0, config.shots, chunk):
            dt = jitter[s:s + chunk]
            base = np.fmod(grid.center * dt / HBAR, 2.0 * np.pi)
            phase = base[:, None] + np.outer(dt, grid.offsets) / HBAR
            shot = a[None, :] * np.exp(-1j * phase) + b[None, :]
            acc += (shot.real ** 2 + shot.imag ** 2).sum(axis=0)
        mean = acc / config.shots
    dgrid, out = _detect(mean, grid, config)
    warnings = []
    if config.resolution > TWO_PI_HBAR / config.tau:
        warnings.append(
            f"spectrometer resolution {config.resolution} eV exceeds the fringe period "
            f"{TWO_PI_HBAR / config.tau:.4g} eV: fringes unresolvable")
    return Interferogram(dgrid, out, config, tuple(warnings))


def measure_spectrum(psi: SpectralWavefunction, config: MeasurementConfig) -> Interferogram:
    """Single-arm spectrum through the same spectrometer as :func:`measure`."""
    dgrid, out = _detect(psi.density, psi.grid, config)
    return Interferogram(dgrid, out, config)


def simulate_measurement(psi: SpectralWavefunction, config: MeasurementConfig, seed=0,
                         sheared: Optional[SpectralWavefunction] = None):
    """Signal run, calibration run (no shear) and single-arm spectrum.

    ``sheared`` overrides the exact shear (e.g. with a PINEM-modulated arm).
    Signal and calibration draw their jitter from independent child streams.
    """
    ss = np.random.SeedSequence(seed)
    sig_seed, cal_seed = ss.spawn(2)
    delayed = delay(psi, config.tau)
    other = sheared if sheared is not None else shear(psi, config.delta_E)
    signal = measure(delayed, other, config, np.random.default_rng(sig_seed))
    calibration = measure(delayed, psi, config.calibration(), np.random.default_rng(cal_seed))
    spectrum = measure_spectrum(psi, config)
    return signal, calibration, spectrum


def fringe_visibility(interferogram: Interferogram, tau: float) -> float:
    """Ratio of the conjugate-domain amplitude at ``tau`` to the d.c. peak."""
    d = np.abs(to_conjugate(np.asarray(interferogram.intensity, dtype=complex)))
    t = conjugate_axis(interferogram.grid)
    window = np.abs(t - tau) <= 0.25 * tau
    if not window.any():
        return 0.0
    return float(d[window].max() / d[np.argmin(np.abs(t))])


def check_constraints(sigma_E: float, config: MeasurementConfig) -> ConstraintReport:
    if not sigma_E > 0:
        raise ValueError("sigma_E must be positive")
    tau_min = math.pi * HBAR / sigma_E
    tau_max = TWO_PI_HBAR / config.resolution
    period = TWO_PI_HBAR / config.tau
    de = abs(config.delta_E)
    return ConstraintReport(
        tau_min=tau_min,
        tau_max=tau_max,
        tau_ok=tau_min < config.tau < tau_max,
        shear_ratio=de / (2.0 * sigma_E),
        shear_ok=de < 2.0 * sigma_E,
        visibility=math.exp(-de ** 2 / (4.0 * sigma_E ** 2)),
        fringe_period=period,
        fringes_resolved=config.resolution < period,
    )

"""Light-electron modulator: PINEM sidebands, spectral shear and a split-step
propagator for the relativistically corrected 1D Schrodinger equation.

The propagator works in the frame co-moving with the central velocity ``v0``.
Its coordinate is the arrival time ``t`` of a slice at the foil (the same axis
as :class:`~fessi.wavepacket.TemporalWavefunction`), so the foil sweeps across
the packet as the lab clock runs. The conjugate variable is the energy offset
``eps = v0 (p - p0)``, giving the kinetic term ``eps^2 / (2 gamma^3 m v0^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from . import constants as const
from .bessel import completeness_order, sideband_amplitudes
from .wavepacket import (SpectralWavefunction, TemporalWavefunction, to_energy_domain,
                         to_time_domain)


@dataclass(frozen=True)
class LemParams:
    """Laser and foil description.

    Attributes
    ----------
    wavelength_um : float
        Laser central wavelength in micrometres.
    field_peak : float
        Peak longitudinal field in V/m.
    foil_thickness_nm : float
        Interaction length ``L``.
    phase_delay : float
        Laser phase at the foil when the packet centre arrives (rad).
    kinetic_energy : float
        Electron kinetic energy in eV.
    beta, gamma : float
        Reduced velocity and Lorentz factor; must satisfy
        ``gamma = 1/sqrt(1 - beta^2)`` to 1e-12.
    """

    wavelength_um: float = 10.33
    field_peak: float = 0.0
    foil_thickness_nm: float = 50.0
    phase_delay: float = 0.0
    kinetic_energy: float = 10e3
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if not self.wavelength_um > 0:
            raise ValueError("wavelength must be positive")
        if not self.foil_thickness_nm > 0:
            raise ValueError("foil thickness must be positive")
        if self.beta == 0.0 and self.gamma == 0.0:
            gamma = 1.0 + self.kinetic_energy / const.ELECTRON_REST_ENERGY
            object.__setattr__(self, "gamma", gamma)
            object.__setattr__(self, "beta", math.sqrt(1.0 - 1.0 / gamma ** 2))
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if abs(self.gamma - 1.0 / math.sqrt(1.0 - self.beta ** 2)) > 1e-12:
            raise ValueError(f"gamma={self.gamma} inconsistent with beta={self.beta}")

    @property
    def photon_energy(self) -> float:
        return const.photon_energy(self.wavelength_um)

    @property
    def omega(self) -> float:
        """Angular frequency in rad/fs."""
        return self.photon_energy / const.HBAR

    @property
    def period(self) -> float:
        return const.optical_period(self.wavelength_um)

    @property
    def velocity(self) -> float:
        """Central velocity in nm/fs."""
        return self.beta * const.C_NM_PER_FS

    @property
    def transit_time(self) -> float:
        return self.foil_thickness_nm / self.velocity

    @property
    def dispersion_energy(self) -> float:
        """``gamma^3 m v0^2`` in eV (denominator of the kinetic term, over 2)."""
        return self.gamma ** 3 * const.ELECTRON_REST_ENERGY * self.beta ** 2

    def with_field(self, field_peak: float) -> "LemParams":
        return LemParams(self.wavelength_um, field_peak, self.foil_thickness_nm,
                         self.phase_delay, self.kinetic_energy, self.beta, self.gamma)


@dataclass(frozen=True)
class CouplingStrength:
    g: complex

    @property
    def magnitude(self) -> float:
        return abs(self.g)

    @property
    def shear(self) -> float:
        """Argument ``2|g|`` of the sideband Bessel amplitudes."""
        return 2.0 * abs(self.g)


def constant_field_profile(params: LemParams, samples: int = 201):
    z = np.linspace(-params.foil_thickness_nm / 2, params.foil_thickness_nm / 2, samples)
    return z, np.full_like(z, params.field_peak)


def coupling_from_field(params: LemParams, z_nm, field) -> CouplingStrength:
    """``2g = (e / hbar w) * integral F(z) exp(-i w z / v0) dz`` by trapezoid quadrature.

    ``z_nm`` in nm over the foil, ``field`` in V/m.
    """
    z = np.asarray(z_nm, dtype=float)
    f = np.asarray(field, dtype=float)
    if z.size < 2 or z.shape != f.shape:
        raise ValueError("field profile needs at least two (z, F) samples of equal length")
    integrand = f * 1e-9 * np.exp(-1j * params.omega * z / params.velocity)
    two_g = trapezoid(integrand, z)
    return CouplingStrength(complex(two_g) / (2.0 * params.photon_energy))


def thin_foil_coupling(params: LemParams) -> float:
    """Closed form of ``2|g|`` for a uniform field across the foil."""
    x = params.omega * params.transit_time / 2.0
    return params.field_peak * 1e-9 * params.foil_thickness_nm / params.photon_energy * np.sinc(x / np.pi)


def field_for_coupling(params: LemParams, two_g: float) -> LemParams:
    """Return ``params`` with the uniform field that yields ``2|g| = two_g``."""
    unit = thin_foil_coupling(params.with_field(1.0))
    return params.with_field(two_g / unit)


def shear(psi: SpectralWavefunction, delta_E: float) -> SpectralWavefunction:
    """Translate the complex spectrum: ``out(E) = psi(E - delta_E)``.

    Done with the Fourier-shift theorem, so off-lattice shifts keep full phase
    fidelity.
    """
    if abs(delta_E) >= psi.grid.span / 4:
        raise ValueError(
            f"shear {delta_E} eV exceeds the grid headroom (span/4 = {psi.grid.span / 4:.4g} eV)")
    if delta_E == 0:
        return psi
    t = to_time_domain(psi)
    ramp = np.exp(-1j * delta_E * t.times / const.HBAR)
    return to_energy_domain(TemporalWavefunction(t.grid, t.samples * ramp, t.center_energy))


def pinem_modulate(psi: SpectralWavefunction, g: CouplingStrength, photon_energy: float,
                   max_order: Optional[int] = None) -> SpectralWavefunction:
    """Sideband sum ``sum_n J_n(2|g|) e^{i n arg g} psi(E - n hbar w)``.

    Each copy is shifted with the Fourier-shift theorem, so the sum becomes a
    time-domain modulation. Without ``max_order`` the full series is used in
    its closed form ``exp(i 2|g| sin(arg g - w t))``; ``max_order`` still sets
    the grid-span requirement. An explicit ``max_order`` truncates the sum.
    """
    z = g.shear
    if z == 0:
        return psi
    exact = max_order is None
    if exact:
        max_order = completeness_order(z, cap=int(z) + 40)
    need = (max_order + 4) * photon_energy
    half = psi.grid.spacing * (psi.grid.count // 2 - 1)
    if half < need:
        raise ValueError(
            f"grid must cover E0 +/- {need:.4g} eV for {max_order} sideband orders "
            f"(required span {2 * need:.4g} eV, have {psi.grid.span:.4g} eV)")
    t = to_time_domain(psi)
    w = photon_energy / const.HBAR
    arg = np.angle(g.g)
    theta = arg - w * t.times
    if exact:
        # Jacobi-Anger: the untruncated sideband sum is a pure phase
        modulation = np.exp(1j * z * np.sin(theta))
    else:
        amps = sideband_amplitudes(z, max_order)
        modulation = np.zeros(t.grid.count, dtype=complex)
        for n, a in zip(range(-max_order, max_order + 1), amps):
            modulation += a * np.exp(1j * n * theta)
    return to_energy_domain(TemporalWavefunction(t.grid, t.samples * modulation, t.center_energy))


@dataclass(frozen=True)
class TdseResult:
    psi: TemporalWavefunction
    steps: int
    step_size: float
    norm_drift: float
    under_resolved: bool


def _interaction_phase(times, t0, t1, params: LemParams) -> np.ndarray:
    """Exact ``-(1/hbar) * integral_{t0}^{t1} V dt`` for every arrival time.

    ``V = -e v0 A(t) * box``: the slice arriving at ``t_a`` sits inside the
    foil for lab times ``|t - t_a| < L / (2 v0)``.
    """
    w = params.omega
    phi = params.phase_delay
    half = params.transit_time / 2.0
    a = np.maximum(t0, times - half)
    b = np.minimum(t1, times + half)
    inside = b > a
    # e v0 A0 / (hbar w), with A0 = -F / w
    k = -(params.field_peak * 1e-9) * params.velocity / (const.HBAR * w * w)
    out = np.zeros_like(times)
    out[inside] = k * (np.cos(w * a[inside] + phi) - np.cos(w * b[inside] + phi))
    return out


def tdse_propagate(psi: TemporalWavefunction, params: LemParams, steps: Optional[int] = None,
                   t_start: Optional[float] = None, t_stop: Optional[float] = None,
                   steps_per_cycle: int = 200) -> TdseResult:
    """Strang split-step propagation through the laser-driven foil.

    The kinetic half-steps are applied in energy space. The interaction step
    integrates the foil potential exactly over each lab-time interval, so the
    accumulated phase does not depend on how the foil edges fall on the step
    lattice. Only the dominant ``p0`` part of ``(A p + p A)`` is kept; the
    ``p - p0`` correction is smaller by ``eps / (gamma m v0^2) ~ 1e-5``.

    The lab clock runs from ``t_start`` to ``t_stop`` (default: the window in
    which the foil overlaps the populated part of the packet).
    """
    times = psi.times
    if t_start is None or t_stop is None:
        dens = psi.intensity
        populated = np.flatnonzero(dens > 1e-16 * dens.max())
        pad = params.transit_time
        t_start = times[populated[0]] - pad if t_start is None else t_start
        t_stop = times[populated[-1]] + pad if t_stop is None else t_stop
    duration = t_stop - t_start
    if not duration > 0:
        raise ValueError("t_stop must exceed t_start")
    if steps is None:
        steps = max(1, int(math.ceil(duration * steps_per_cycle / params.period)))
    dt = duration / steps

    n = psi.grid.count
    eps = 2.0 * math.pi * const.HBAR * np.fft.fftfreq(n, psi.grid.spacing)
    half_kin = np.exp(-1j * eps ** 2 * (dt / 2) / (2.0 * params.dispersion_energy * const.HBAR))

    n0 = psi.norm()
    field_on = params.field_peak != 0.0
    # time-domain samples in FFT order; the kinetic factor is even in eps
    data = np.fft.ifftshift(np.asarray(psi.samples))
    t_fft = np.fft.ifftshift(times)
    for i in range(steps):
        data = np.fft.ifft(np.fft.fft(data) * half_kin)
        if field_on:
            kick = _interaction_phase(t_fft, t_start + i * dt, t_start + (i + 1) * dt, params)
            data *= np.exp(1j * kick)
        data = np.fft.ifft(np.fft.fft(data) * half_kin)
    out = TemporalWavefunction(psi.grid, np.fft.fftshift(data), psi.center_energy)
    drift = abs(out.norm() - n0)
    coarse = field_on and dt > params.period / steps_per_cycle * (1 + 1e-12)
    return TdseResult(out, steps, dt, drift, bool(coarse or drift > 1e-6))


def free_dispersion_phase(offsets, params: LemParams, duration: float) -> np.ndarray:
    """Spectral phase accumulated by free propagation for ``duration`` fs."""
    return -np.asarray(offsets) ** 2 * duration / (2.0 * params.dispersion_energy * const.HBAR)


def sideband_populations(psi: SpectralWavefunction, photon_energy: float, max_order: int) -> np.ndarray:
    """Probability in windows ``E0 + n hbar w +/- hbar w / 2``, ``n = -max_order..max_order``."""
    q = psi.grid.offsets
    dens = psi.density * psi.grid.spacing
    idx = np.rint(q / photon_energy).astype(int)
    return np.array([dens[idx == n].sum() for n in range(-max_order, max_order + 1)])

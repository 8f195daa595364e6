"""Physical constants in the eV / fs / nm unit system used throughout."""

import math

HBAR = 0.6582119569  # eV fs
HC = 1239.841984  # eV nm
C_NM_PER_FS = 299.792458
ELECTRON_REST_ENERGY = 510998.95  # eV

TWO_PI_HBAR = 2.0 * math.pi * HBAR


def photon_energy(wavelength_um: float) -> float:
    """Photon energy in eV for a vacuum wavelength given in micrometres."""
    return HC / (wavelength_um * 1e3)


def optical_period(wavelength_um: float) -> float:
    """Optical cycle in fs."""
    return wavelength_um * 1e3 / C_NM_PER_FS

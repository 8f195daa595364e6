"""Simulation and phase retrieval for free-electron spectral shearing interferometry."""

from .constants import HBAR
from .interferometer import MeasurementConfig, check_constraints, simulate_measurement
from .lem import LemParams, pinem_modulate, shear, tdse_propagate
from .pulse_analysis import DurationModel, duration, locality_check, parameter_diagram
from .reconstruction import ReconstructionError, reconstruct
from .wavepacket import (EnergyGrid, SpectralPhaseSpec, SpectralWavefunction, TemporalWavefunction,
                         default_grid, intensity_moments, make_gaussian_spectrum, to_energy_domain,
                         to_time_domain)

__version__ = "0.1.0"

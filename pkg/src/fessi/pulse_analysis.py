"""Pulse broadening by second- and third-order spectral phase, the
quarter-cycle locality criterion and the (sigma_E, phi_n) duration diagrams.

Phase inputs are Taylor derivatives ``phi_n = d^n phi / dE^n`` in rad eV^-n,
i.e. ``phi(E) = phi2 q^2 / 2 + phi3 q^3 / 6`` with ``q = E - E0``. The duration
formulas need them in fs^n, so they enter as ``phi_n * hbar^n``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from contourpy import contour_generator

from .constants import HBAR, optical_period


@dataclass(frozen=True)
class DurationModel:
    """Gaussian pulse described by its intrinsic width and phase derivatives.

    Attributes
    ----------
    sigma_t0 : float
        Transform-limited rms duration ``hbar / (2 sigma_E)`` in fs.
    phi2, phi3 : float
        Second and third spectral-phase derivatives (rad eV^-2, rad eV^-3).
    optical_period : float
        Laser cycle ``T`` in fs.
    """

    sigma_t0: float
    phi2: float = 0.0
    phi3: float = 0.0
    optical_period: float = optical_period(10.33)

    def __post_init__(self):
        if not self.sigma_t0 > 0:
            raise ValueError(f"sigma_t0 must be positive, got {self.sigma_t0}")
        if not self.optical_period > 0:
            raise ValueError(f"optical_period must be positive, got {self.optical_period}")

    @classmethod
    def from_bandwidth(cls, sigma_E: float, phi2: float = 0.0, phi3: float = 0.0,
                       wavelength_um: float = 10.33) -> "DurationModel":
        if not sigma_E > 0:
            raise ValueError(f"sigma_E must be positive, got {sigma_E}")
        return cls(HBAR / (2.0 * sigma_E), phi2, phi3, optical_period(wavelength_um))

    @property
    def sigma_E(self) -> float:
        return HBAR / (2.0 * self.sigma_t0)

    @property
    def quarter_period(self) -> float:
        return self.optical_period / 4.0

    @property
    def chirp_time(self) -> float:
        """``phi2`` in fs^2."""
        return self.phi2 * HBAR ** 2

    @property
    def cubic_time(self) -> float:
        """``phi3`` in fs^3."""
        return self.phi3 * HBAR ** 3


def _duration(sigma_t0, phi2, phi3):
    s0 = np.asarray(sigma_t0, dtype=float)
    a = np.asarray(phi2, dtype=float) * HBAR ** 2 / (2.0 * s0)
    b = np.asarray(phi3, dtype=float) * HBAR ** 3 / (4.0 * s0 ** 2)
    return np.sqrt(s0 ** 2 + a ** 2 + 0.5 * b ** 2)


def duration(model: DurationModel) -> float:
    """Rms duration of a Gaussian pulse with second- and third-order phase.

    ``sigma_t^2 = sigma_t0^2 + (phi2~ / 2 sigma_t0)^2 + (phi3~ / 4 sigma_t0^2)^2 / 2``
    with ``phi_n~ = phi_n hbar^n``. Both terms are exact second moments of the
    Gaussian spectrum (the cross term vanishes by symmetry), so this is the rms
    of the numerically synthesised pulse, not an approximation.
    """
    return float(_duration(model.sigma_t0, model.phi2, model.phi3))


def chirp_duration(sigma_t0: float, phi2: float) -> float:
    """Pure second-order law ``sqrt(sigma_t0^2 + (hbar^2 phi2 / 2 sigma_t0)^2)``."""
    return math.sqrt(sigma_t0 ** 2 + (phi2 * HBAR ** 2 / (2.0 * sigma_t0)) ** 2)


@dataclass(frozen=True)
class LocalityReport:
    sigma_t: float
    quarter_period: float
    passed: bool
    margin: float
    advisories: tuple

    def lines(self):
        out = [f"sigma_t_fs={self.sigma_t:.6g}",
               f"quarter_period_fs={self.quarter_period:.6g}",
               f"locality={'pass' if self.passed else 'fail'} margin_fs={self.margin:.6g}"]
        out.extend(f"advisory: {a}" for a in self.advisories)
        return out


def locality_check(model: DurationModel, sigma_t: Optional[float] = None) -> LocalityReport:
    """Compare the rms duration with a quarter of the optical cycle.

    ``margin = T/4 - sigma_t`` (positive when local). A numerically measured
    ``sigma_t`` replaces the closed form, e.g. for phases with terms beyond
    third order. Three rule-of-thumb conditions are reported as advisories
    only: ``sigma_t0 < T/4``, ``|phi2~| < sigma_t0 T / 2`` and
    ``phi2~ < T^2 / 64``.
    """
    s = duration(model) if sigma_t is None else float(sigma_t)
    q = model.quarter_period
    t = model.optical_period
    notes = []
    if not model.sigma_t0 < q:
        notes.append(f"intrinsic duration {model.sigma_t0:.4g} fs is not below T/4 = {q:.4g} fs")
    if not abs(model.chirp_time) < model.sigma_t0 * t / 2.0:
        notes.append(f"|phi2| hbar^2 = {abs(model.chirp_time):.4g} fs^2 exceeds "
                     f"sigma_t0 T/2 = {model.sigma_t0 * t / 2:.4g} fs^2")
    if not model.chirp_time < t ** 2 / 64.0:
        notes.append(f"phi2 hbar^2 = {model.chirp_time:.4g} fs^2 exceeds T^2/64 = {t ** 2 / 64:.4g} fs^2")
    return LocalityReport(s, q, s < q, q - s, tuple(notes))


@dataclass(frozen=True)
class ParameterDiagram:
    """Durations on a ``(phi_n, sigma_E)`` grid with the ``T/4`` contour.

    ``durations[i, j]`` belongs to ``phases[i]`` and ``sigma_E[j]``. Contour
    lines are ``(k, 2)`` arrays of ``(sigma_E, phi_n)`` vertices.
    """

    sigma_E: np.ndarray
    phases: np.ndarray
    order: int
    durations: np.ndarray
    level: float
    contours: tuple

    def window(self, row: int):
        """``(lower, upper)`` sigma_E where row ``row`` crosses the level; ``nan`` if absent."""
        d = self.durations[row] - self.level
        x = self.sigma_E
        inside = d < 0
        idx = np.flatnonzero(np.diff(inside.astype(np.int8)))
        lower = upper = float("nan")
        for i in idx:
            cross = x[i] - d[i] * (x[i + 1] - x[i]) / (d[i + 1] - d[i])
            if inside[i + 1]:
                lower = float(cross) if math.isnan(lower) else lower
            else:
                upper = float(cross)
        return lower, upper


def _threads(limit: Optional[int]) -> int:
    return max(1, int(limit)) if limit else 1


def parameter_diagram(sigma_E_range: Sequence[float], phase_range: Sequence[float],
                      resolution=(200, 200), order: int = 2, wavelength_um: float = 10.33,
                      threads: Optional[int] = None) -> ParameterDiagram:
    """Evaluate the duration over ``sigma_E x phi_order`` and trace ``sigma_t = T/4``.

    ``resolution`` is ``(n_sigma, n_phase)``; a 1x1 grid evaluates a single
    point. Rows are evaluated independently (optionally on ``threads``
    workers) and stacked in row order.
    """
    if order not in (2, 3):
        raise ValueError(f"diagram order must be 2 or 3, got {order}")
    s_lo, s_hi = (float(v) for v in sigma_E_range)
    p_lo, p_hi = (float(v) for v in phase_range)
    if not (0 < s_lo <= s_hi):
        raise ValueError("sigma_E range must be positive and increasing")
    if p_lo > p_hi or p_lo < 0:
        raise ValueError("phase range must be non-negative and increasing")
    n_s, n_p = (int(v) for v in resolution)
    if n_s < 1 or n_p < 1:
        raise ValueError("resolution must be at least 1 x 1")
    sig = np.linspace(s_lo, s_hi, n_s)
    phases = np.linspace(p_lo, p_hi, n_p)
    s0 = HBAR / (2.0 * sig)

    def row(p):
        return _duration(s0, p, 0.0) if order == 2 else _duration(s0, 0.0, p)

    workers = _threads(threads)
    if workers > 1 and n_p > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, phases))
    else:
        rows = [row(p) for p in phases]
    grid = np.vstack(rows)
    level = optical_period(wavelength_um) / 4.0
    lines = ()
    if n_s > 1 and n_p > 1:
        gen = contour_generator(sig, phases, grid)
        lines = tuple(np.asarray(l) for l in gen.lines(level))
    return ParameterDiagram(sig, phases, order, grid, level, lines)

"""End-to-end scenario execution: synthesis, LEM, measurement, retrieval,
sweeps and duration diagrams, plus writing their output files.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional

import numpy as np

from . import io
from .interferometer import (MeasurementConfig, check_constraints, fringe_visibility,
                             simulate_measurement)
from .lem import CouplingStrength, pinem_modulate, shear
from .pulse_analysis import DurationModel, locality_check, parameter_diagram
from .reconstruction import ReconstructionError, reconstruct
from .scenario import ScenarioConfig
from .wavepacket import (SpectralWavefunction, fourier_resample, intensity_moments,
                         make_gaussian_spectrum, to_time_domain)


def thread_limit(default: Optional[int] = None) -> int:
    """Worker count: ``FESSI_THREADS`` caps the CPU count (or ``default``)."""
    n = default or os.cpu_count() or 1
    env = os.environ.get("FESSI_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"FESSI_THREADS must be an integer, got {env!r}") from None
        if cap < 1:
            raise ValueError("FESSI_THREADS must be at least 1")
        n = min(n, cap)
    return max(1, n)


def synthesize(cfg: ScenarioConfig) -> SpectralWavefunction:
    cfg.require("pulse")
    p = cfg.pulse
    return make_gaussian_spectrum(p.grid(), p.sigma_E, p.phase)


def sheared_arm(psi: SpectralWavefunction, cfg: ScenarioConfig,
                delta_E: Optional[float] = None) -> SpectralWavefunction:
    """The LEM output: exact shear or the full PINEM sideband sum."""
    lem = cfg.lem
    de = lem.delta_E if delta_E is None else delta_E
    if lem.model == "pinem":
        hw = lem.params.photon_energy
        g = CouplingStrength(0.5 * de / hw * np.exp(1j * lem.params.phase_delay))
        return pinem_modulate(psi, g, hw)
    return shear(psi, de)


@dataclass(frozen=True)
class RunOutcome:
    """Everything a single end-to-end run produces."""

    psi: SpectralWavefunction
    measurement: MeasurementConfig
    signal: object
    calibration: object
    spectrum: object
    result: object
    summary: Dict[str, object]
    warnings: tuple
    constraints_ok: bool
    timings: Dict[str, float]
    error: Optional[str] = None


def _phase_model(cfg: ScenarioConfig) -> DurationModel:
    spec = cfg.pulse.phase
    return DurationModel.from_bandwidth(cfg.pulse.sigma_E, spec.taylor(2), spec.taylor(3),
                                        cfg.lem.params.wavelength_um if cfg.lem else 10.33)


def run_chain(cfg: ScenarioConfig, measurement: Optional[MeasurementConfig] = None,
              seed: Optional[int] = None, psi: Optional[SpectralWavefunction] = None) -> RunOutcome:
    """Synthesize, modulate, measure and reconstruct one scenario.

    Constraint violations become warnings. A failed retrieval is reported in
    ``error`` (with ``result = None``) instead of raising.
    """
    cfg.require("pulse", "lem", "measurement")
    meas = measurement or cfg.measurement
    seed = cfg.seed if seed is None else seed
    timings = {}
    t0 = time.perf_counter()
    psi = synthesize(cfg) if psi is None else psi
    other = sheared_arm(psi, cfg, meas.delta_E)
    timings["synth_lem_s"] = time.perf_counter() - t0

    warnings: List[str] = []
    report = check_constraints(cfg.pulse.sigma_E, meas)
    numeric = None
    if cfg.pulse.phase.oscillatory is not None:
        numeric = intensity_moments(to_time_domain(psi)).rms
    locality = locality_check(_phase_model(cfg), numeric)
    if not report.tau_ok:
        warnings.append(f"delay {meas.tau} fs outside the window "
                        f"({report.tau_min:.4g}, {report.tau_max:.4g}) fs")
    if not report.shear_ok:
        warnings.append(f"shear {meas.delta_E} eV is not below 2 sigma_E = {2 * cfg.pulse.sigma_E} eV")
    if not report.fringes_resolved:
        warnings.append("spectrometer resolution exceeds the fringe period")
    if not locality.passed:
        warnings.append(f"pulse duration {locality.sigma_t:.4g} fs exceeds T/4 = "
                        f"{locality.quarter_period:.4g} fs: shear not local")
    constraints_ok = report.ok and locality.passed

    t1 = time.perf_counter()
    signal, calibration, spectrum = simulate_measurement(psi, meas, seed, sheared=other)
    timings["measure_s"] = time.perf_counter() - t1
    for w in signal.warnings:
        if w not in warnings:
            warnings.append(w)

    summary: Dict[str, object] = {
        "sigma_E_eV": cfg.pulse.sigma_E,
        "tau_fs": meas.tau,
        "delta_E_eV": meas.delta_E,
        "resolution_eV": meas.resolution,
        "jitter_fraction": meas.jitter_fraction,
        "shots": meas.shots,
        "seed": seed,
        "lem_model": cfg.lem.model,
    }
    summary.update({f"bound_{k}": v for k, v in (
        ("tau_min_fs", report.tau_min), ("tau_max_fs", report.tau_max),
        ("tau_ok", report.tau_ok), ("shear_ratio", report.shear_ratio),
        ("shear_ok", report.shear_ok), ("visibility_estimate", report.visibility),
        ("fringes_resolved", report.fringes_resolved))})
    summary["sigma_t_fs"] = locality.sigma_t
    summary["quarter_period_fs"] = locality.quarter_period
    summary["locality_ok"] = locality.passed
    summary["ac_to_dc_measured"] = fringe_visibility(signal, meas.tau)

    rc = cfg.reconstruction
    t2 = time.perf_counter()
    error = None
    result = None
    try:
        result = reconstruct(signal, calibration, spectrum, meas, anchor=rc.anchor,
                             reference_phase=cfg.pulse.phase, amplitude_floor=rc.amplitude_floor,
                             filter_order=rc.filter_order, filter_fwhm=rc.filter_fwhm)
    except (ReconstructionError, ValueError) as exc:
        error = str(exc)
    timings["reconstruct_s"] = time.perf_counter() - t2
    timings["total_s"] = time.perf_counter() - t0

    if result is not None:
        fid = result.fidelity
        orig = to_time_domain(fourier_resample(psi, result.grid))
        dev = np.max(np.abs(result.temporal.intensity - orig.intensity)) / orig.intensity.max()
        m_o = intensity_moments(to_time_domain(psi))
        m_r = intensity_moments(result.temporal)
        summary.update({
            "fidelity": fid.value,
            "rms_phase_error_rad": fid.rms_error,
            "fidelity_degenerate": fid.degenerate,
            "temporal_max_deviation": float(dev),
            "fwhm_original_fs": m_o.fwhm,
            "fwhm_reconstructed_fs": m_r.fwhm,
            "rms_original_fs": m_o.rms,
            "rms_reconstructed_fs": m_r.rms,
            "lattice_points": result.metadata["lattice_points"],
            "reference_plane": result.metadata["reference_plane"],
            "status": "ok",
        })
    else:
        summary.update({"fidelity": float("nan"), "status": "reconstruction_failed",
                        "error": error})
    summary["warnings"] = len(warnings)
    return RunOutcome(psi, meas, signal, calibration, spectrum, result, summary,
                      tuple(warnings), constraints_ok, timings, error)


def write_run(outcome: RunOutcome, out_dir: str) -> Dict[str, str]:
    """Write inputs, interferograms, retrieval files and ``summary.txt``.

    Wall-clock timings go to ``timing.txt`` so every other file is
    byte-identical between runs with the same configuration and seed.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = write_pulse(outcome.psi, out_dir)
    for name in ("signal", "calibration", "spectrum"):
        p = os.path.join(out_dir, f"interferogram_{name}.txt")
        io.write_interferogram(p, getattr(outcome, name))
        paths[f"interferogram_{name}"] = p
    if outcome.result is not None:
        paths.update(io.write_reconstruction(out_dir, outcome.result))
    record = dict(outcome.summary)
    for i, w in enumerate(outcome.warnings):
        record[f"warning_{i}"] = w
    paths["summary"] = os.path.join(out_dir, "summary.txt")
    io.write_summary(paths["summary"], record)
    paths["timing"] = os.path.join(out_dir, "timing.txt")
    io.write_summary(paths["timing"], outcome.timings)
    return paths


def write_pulse(psi: SpectralWavefunction, out_dir: str) -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {"spectral": os.path.join(out_dir, "pulse_spectral.txt"),
             "temporal": os.path.join(out_dir, "pulse_temporal.txt")}
    io.write_spectral(paths["spectral"], psi)
    io.write_temporal(paths["temporal"], to_time_domain(psi))
    return paths


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    seed: int
    fidelity: float
    rms_error: float
    ac_to_dc: float
    temporal_deviation: float
    failed: bool


def _sweep_point(cfg: ScenarioConfig, axis: str, value: float, seed: int,
                 psi: SpectralWavefunction) -> SweepRow:
    meas = replace(cfg.measurement, **{axis: value})
    out = run_chain(cfg, meas, seed, psi)
    s = out.summary
    nan = float("nan")
    return SweepRow(axis, value, seed, float(s["fidelity"]),
                    float(s.get("rms_phase_error_rad", nan)), float(s["ac_to_dc_measured"]),
                    float(s.get("temporal_max_deviation", nan)), out.result is None)


def run_sweep(cfg: ScenarioConfig, axis: Optional[str] = None, values=None, seeds=None,
              threads: Optional[int] = None) -> List[SweepRow]:
    """Evaluate ``run_chain`` over one measurement axis.

    Seeds are ``cfg.seed + k`` for ``k < seeds``. Points fan out over a thread
    pool and are returned in (value, seed) order regardless of completion
    order.
    """
    cfg.require("pulse", "lem", "measurement")
    if axis is None or values is None:
        cfg.require("sweep")
    axis = axis or cfg.sweep.axis
    values = tuple(cfg.sweep.values if values is None else values)
    seeds = (cfg.sweep.seeds if cfg.sweep else 1) if seeds is None else seeds
    if not values:
        raise ValueError("sweep axis is empty")
    if axis not in ("tau", "delta_E", "jitter_fraction", "resolution"):
        raise ValueError(f"cannot sweep {axis!r}")
    psi = synthesize(cfg)
    jobs = [(float(v), cfg.seed + k) for v in values for k in range(seeds)]
    workers = min(thread_limit(threads), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda j: _sweep_point(cfg, axis, j[0], j[1], psi), jobs))
    return [_sweep_point(cfg, axis, v, s, psi) for v, s in jobs]


def write_sweep(rows: List[SweepRow], path: str) -> None:
    """Long-format table, one row per (value, seed)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# kind=sweep\n# axis={rows[0].axis if rows else ''}\n")
        fh.write("# columns=value,seed,fidelity,rms_phase_error_rad,ac_to_dc,"
                 "temporal_max_deviation,failed\n")
        for r in rows:
            fh.write(", ".join([io.FMT % r.value, str(r.seed), io.FMT % r.fidelity,
                                io.FMT % r.rms_error, io.FMT % r.ac_to_dc,
                                io.FMT % r.temporal_deviation, str(int(r.failed))]) + "\n")


def run_diagram(cfg: ScenarioConfig, threads: Optional[int] = None):
    cfg.require("diagram")
    d = cfg.diagram
    return parameter_diagram(d.sigma_E_range, d.phase_range, d.resolution, d.order,
                             d.wavelength_um, threads=thread_limit(threads))


def write_diagram(diagram, out_dir: str) -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    name = f"phi{diagram.order}"
    paths = {"grid": os.path.join(out_dir, f"diagram_{name}_grid.txt"),
             "contour": os.path.join(out_dir, f"diagram_{name}_contour.txt")}
    s, p = np.meshgrid(diagram.sigma_E, diagram.phases)
    io.write_table(paths["grid"], (s.ravel(), p.ravel(), diagram.durations.ravel()),
                   {"kind": "duration_grid", "order": diagram.order,
                    "n_sigma": diagram.sigma_E.size, "n_phase": diagram.phases.size,
                    "level_fs": diagram.level},
                   ("sigma_E_eV", f"phi{diagram.order}", "sigma_t_fs"))
    with open(paths["contour"], "w", encoding="utf-8") as fh:
        fh.write(f"# kind=contour\n# level_fs={io.FMT % diagram.level}\n"
                 f"# columns=line,sigma_E_eV,phi{diagram.order}\n")
        for i, line in enumerate(diagram.contours):
            for x, y in line:
                fh.write(f"{i}, {io.FMT % x}, {io.FMT % y}\n")
    return paths

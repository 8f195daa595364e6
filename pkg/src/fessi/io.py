"""Plain-text columnar files.

Every file starts with ``# key=value`` header lines followed by comma
separated rows written with 17 significant digits, so doubles survive a
write/read cycle bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import asdict
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from .interferometer import Interferogram, MeasurementConfig
from .wavepacket import EnergyGrid, SpectralWavefunction, TemporalWavefunction, TimeGrid

FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return FMT % value
    return str(value)


def write_table(path, columns: Iterable[np.ndarray], header: Mapping[str, object],
                names: Iterable[str]) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    lines = [f"# {k}={_fmt(v)}" for k, v in header.items()]
    lines.append("# columns=" + ",".join(names))
    body = np.column_stack(cols) if cols else np.empty((0, 0))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
        for row in body:
            fh.write(", ".join(FMT % v for v in row) + "\n")


def read_table(path) -> Tuple[Dict[str, str], np.ndarray]:
    header: Dict[str, str] = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                body = s[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    header[k.strip()] = v.strip()
                continue
            try:
                rows.append([float(x) for x in s.replace(",", " ").split()])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed row: {s!r}") from exc
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise ValueError(f"{path}: rows have inconsistent column counts {sorted(widths)}")
    return header, np.array(rows, dtype=float)


def _need(header, key, path):
    if key not in header:
        raise ValueError(f"{path}: missing header key {key!r}")
    return header[key]


def write_spectral(path, psi: SpectralWavefunction, **extra) -> None:
    g = psi.grid
    header = {"kind": "spectral", "center_eV": g.center, "spacing_eV": g.spacing, "count": g.count}
    header.update(extra)
    s = np.asarray(psi.samples)
    write_table(path, (g.energies, s.real, s.imag), header, ("E_eV", "re", "im"))


def read_spectral(path) -> SpectralWavefunction:
    h, data = read_table(path)
    if h.get("kind") != "spectral":
        raise ValueError(f"{path}: not a spectral wavefunction file")
    g = EnergyGrid(float(_need(h, "center_eV", path)), float(_need(h, "spacing_eV", path)),
                   int(_need(h, "count", path)))
    return SpectralWavefunction(g, data[:, 1] + 1j * data[:, 2])


def write_temporal(path, psi: TemporalWavefunction, **extra) -> None:
    g = psi.grid
    header = {"kind": "temporal", "center_fs": g.center, "spacing_fs": g.spacing, "count": g.count,
              "center_energy_eV": psi.center_energy}
    header.update(extra)
    s = np.asarray(psi.samples)
    write_table(path, (g.times, s.real, s.imag), header, ("t_fs", "re", "im"))


def read_temporal(path) -> TemporalWavefunction:
    h, data = read_table(path)
    if h.get("kind") != "temporal":
        raise ValueError(f"{path}: not a temporal wavefunction file")
    g = TimeGrid(float(_need(h, "center_fs", path)), float(_need(h, "spacing_fs", path)),
                 int(_need(h, "count", path)))
    return TemporalWavefunction(g, data[:, 1] + 1j * data[:, 2],
                                float(h.get("center_energy_eV", 0.0)))


_CONFIG_TYPES = {"tau": float, "delta_E": float, "resolution": float,
                 "jitter_fraction": float, "shots": int, "detector": str}


def write_interferogram(path, interferogram: Interferogram, **extra) -> None:
    g = interferogram.grid
    header = {"kind": "interferogram", "center_eV": g.center, "spacing_eV": g.spacing,
              "count": g.count}
    if interferogram.config is not None:
        header.update(asdict(interferogram.config))
    header.update(extra)
    write_table(path, (g.energies, interferogram.intensity), header, ("E_eV", "intensity"))


def read_interferogram(path) -> Interferogram:
    h, data = read_table(path)
    if h.get("kind") != "interferogram":
        raise ValueError(f"{path}: not an interferogram file")
    g = EnergyGrid(float(_need(h, "center_eV", path)), float(_need(h, "spacing_eV", path)),
                   int(_need(h, "count", path)))
    config = None
    if "tau" in h:
        config = MeasurementConfig(**{k: t(h[k]) for k, t in _CONFIG_TYPES.items() if k in h})
    return Interferogram(g, data[:, 1], config)


def read_field_profile(path) -> Tuple[np.ndarray, np.ndarray]:
    """Two-column ``(z_nm, F_V_per_m)`` text; ``#`` lines are comments."""
    _, data = read_table(path)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != 2:
        raise ValueError(f"{path}: field profile needs at least two rows of (z_nm, F)")
    return data[:, 0], data[:, 1]


def write_summary(path, record: Mapping[str, object]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in record.items():
            fh.write(f"{k}={_fmt(v)}\n")


def read_summary(path) -> Dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                k, v = line.rstrip("\n").split("=", 1)
                out[k] = v
    return out


def write_reconstruction(out_dir, result, prefix: str = "reconstruction") -> Dict[str, str]:
    """Phase lattice, dense amplitude + phase and temporal waveform files."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "lattice": os.path.join(out_dir, f"{prefix}_phase_lattice.txt"),
        "dense": os.path.join(out_dir, f"{prefix}_spectrum.txt"),
        "temporal": os.path.join(out_dir, f"{prefix}_temporal.txt"),
    }
    ph = result.phase
    write_table(paths["lattice"], (ph.energies, ph.values),
                {"kind": "phase_lattice", "delta_E_eV": ph.delta_E, "anchor_eV": ph.anchor},
                ("E_eV", "phase_rad"))
    g = result.grid
    write_table(paths["dense"], (g.energies, result.amplitude, result.dense_phase),
                {"kind": "reconstructed_spectrum", "center_eV": g.center, "spacing_eV": g.spacing,
                 "count": g.count}, ("E_eV", "amplitude", "phase_rad"))
    write_temporal(paths["temporal"], result.temporal, reference_plane="LEM")
    return paths

"""Scenario description, strict YAML loading and the named presets.

A scenario file is nested YAML. Every key is checked against a fixed schema
and unknown keys are rejected with the file line they appear on, so a
misspelt physics parameter can never be silently ignored.
"""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import yaml
from yaml.constructor import SafeConstructor

from .interferometer import MeasurementConfig
from .io import read_field_profile
from .lem import LemParams, coupling_from_field, thin_foil_coupling
from .wavepacket import SpectralPhaseSpec, default_grid


class ConfigError(ValueError):
    """Schema or invariant violation in a scenario description."""


# leaf kinds: "float", "int", "str", "bool", "floats" (list), "orders" (int -> float map)
SCHEMA = {
    "preset": "str",
    "seed": "int",
    "output": "str",
    "pulse": {
        "sigma_E": "float",
        "center_energy": "float",
        "phase": {
            "poly": "orders",
            "taylor": "orders",
            "oscillatory": {"amplitude": "float", "period": "float", "offset": "float"},
        },
        "grid": {"count": "int", "span_sigmas": "float"},
    },
    "lem": {
        "model": "str",
        "delta_E": "float",
        "coupling": "float",
        "field_peak": "float",
        "field_profile": "str",
        "wavelength_um": "float",
        "foil_thickness_nm": "float",
        "phase_delay": "float",
        "kinetic_energy": "float",
    },
    "measurement": {
        "tau": "float",
        "resolution": "float",
        "jitter_fraction": "float",
        "shots": "int",
        "detector": "str",
    },
    "reconstruction": {
        "filter_order": "int",
        "filter_fwhm": "float",
        "amplitude_floor": "float",
        "anchor": "float",
    },
    "sweep": {
        "axis": "str",
        "values": "floats",
        "start": "float",
        "stop": "float",
        "num": "int",
        "scale": "str",
        "seeds": "int",
    },
    "diagram": {
        "order": "int",
        "sigma_E_range": "floats",
        "phase_range": "floats",
        "resolution": "floats",
        "wavelength_um": "float",
    },
}

CHOICES = {
    ("lem", "model"): ("shear", "pinem"),
    ("measurement", "detector"): ("nyquist", "native"),
    ("sweep", "axis"): ("tau", "delta_E", "jitter_fraction", "resolution"),
    ("sweep", "scale"): ("linear", "log"),
}


def _where(source, node) -> str:
    m = node.start_mark
    return f"{source}:{m.line + 1}:{m.column + 1}"


def _to_float(value, where, key):
    if isinstance(value, bool):
        raise ConfigError(f"{where}: {key} must be a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        # YAML 1.1 reads '1e-5' (no dot) as a string
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"{where}: {key} must be a number, got {value!r}")


def _leaf(kind, node, source, key):
    where = _where(source, node)
    if kind in ("floats", "orders"):
        pass
    elif not isinstance(node, yaml.ScalarNode):
        raise ConfigError(f"{where}: {key} must be a single value")
    value = SafeConstructor().construct_object(node, deep=True)
    if kind == "float":
        out = _to_float(value, where, key)
        if not math.isfinite(out):
            raise ConfigError(f"{where}: {key} must be finite")
        return out
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: {key} must be an integer, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: {key} must be a string, got {value!r}")
        return value
    if kind == "floats":
        if not isinstance(value, list):
            raise ConfigError(f"{where}: {key} must be a list of numbers")
        return [_to_float(v, where, key) for v in value]
    if kind == "orders":
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: {key} must map phase orders to coefficients")
        out = {}
        for k, v in value.items():
            if isinstance(k, bool) or not isinstance(k, int):
                raise ConfigError(f"{where}: {key} order {k!r} is not an integer")
            out[k] = _to_float(v, where, f"{key}[{k}]")
        return out
    raise AssertionError(kind)


def _validate(node, schema, source, path, marks) -> dict:
    if not isinstance(node, yaml.MappingNode):
        name = ".".join(path) or "document"
        raise ConfigError(f"{_where(source, node)}: {name} must be a mapping")
    marks.setdefault(path, _where(source, node))
    out = {}
    for knode, vnode in node.value:
        key = knode.value
        sub = path + (key,)
        if key not in schema:
            allowed = ", ".join(sorted(schema))
            raise ConfigError(
                f"{_where(source, knode)}: unknown key {'.'.join(sub)!r} (allowed: {allowed})")
        if key in out:
            raise ConfigError(f"{_where(source, knode)}: duplicate key {'.'.join(sub)!r}")
        spec = schema[key]
        marks[sub] = _where(source, knode)
        if isinstance(spec, dict):
            out[key] = _validate(vnode, spec, source, sub, marks)
        else:
            value = _leaf(spec, vnode, source, ".".join(sub))
            choices = CHOICES.get(sub[-2:]) if len(sub) >= 2 else None
            if choices and value not in choices:
                raise ConfigError(
                    f"{_where(source, vnode)}: {'.'.join(sub)} must be one of {choices}, got {value!r}")
            out[key] = value
    return out


def parse_text(text: str, source: str = "<config>") -> Tuple[dict, dict]:
    """Validate YAML ``text``; return the plain data and a ``path -> file:line:col`` map."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: YAML syntax error: {exc}") from exc
    marks: Dict[tuple, str] = {}
    if node is None:
        return {}, marks
    return _validate(node, SCHEMA, source, (), marks), marks


_EXCLUSIVE = (("poly", "taylor"), ("delta_E", "coupling", "field_peak", "field_profile"),
              ("values", "start"), ("values", "stop"), ("values", "num"))


def _merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    # a layer that sets one member of an exclusive group replaces the others
    for group in _EXCLUSIVE:
        if any(k in top for k in group):
            for k in group:
                out.pop(k, None)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("poly", "taylor"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


# ---------------------------------------------------------------------------
# presets

_FIG3_PULSE = {"sigma_E": 0.425, "center_energy": 10000.0,
               "phase": {"poly": {2: 0.34, 3: 1.05}}}
_FIG3_MEASUREMENT = {"tau": 30.0, "resolution": 0.01, "jitter_fraction": 1e-5, "shots": 1000}
_FIG3 = {"pulse": _FIG3_PULSE, "lem": {"model": "shear", "delta_E": 0.1},
         "measurement": _FIG3_MEASUREMENT, "seed": 0}
_ATTO_PULSE = {"sigma_E": 4.25, "center_energy": 10000.0,
               "phase": {"poly": {2: 1.35e-2, 3: 2.6e-3}}}


def _with(base, **changes):
    return _merge(base, changes)


PRESETS = {
    "fig3-pulse": ({"pulse": _FIG3_PULSE}, "chirped 0.85 eV pulse, phase 0.34 q^2 + 1.05 q^3"),
    "transform-limited": ({"pulse": {"sigma_E": 0.425, "center_energy": 10000.0}},
                          "zero-phase 0.85 eV pulse"),
    "fig-s6-atto": ({"pulse": _ATTO_PULSE}, "8.5 eV attosecond pulse, 1.35e-2 q^2 + 2.6e-3 q^3"),
    "fig3": (_FIG3, "tau 30 fs, shear 0.1 eV, 10 meV resolution, jitter 1e-5, 1000 shots"),
    "fig3-pinem": (_with(_FIG3, lem={"model": "pinem"}),
                   "fig3 with the shear produced by PINEM sidebands (2|g| = 0.1 eV / hbar w)"),
    "fig-s2": (_with(_FIG3, measurement={"jitter_fraction": 7e-5}), "fig3 with jitter 7e-5"),
    "fig-s4a": ({**_FIG3, "pulse": {**_FIG3_PULSE, "phase": {"poly": {2: 1.35}}}},
                "fig3 chain, phase 1.35 q^2"),
    "fig-s4b": ({**_FIG3, "pulse": {**_FIG3_PULSE, "phase": {"poly": {3: 1.40}}}},
                "fig3 chain, phase 1.40 q^3"),
    "fig-s6": ({"pulse": _ATTO_PULSE, "lem": {"model": "shear", "delta_E": 1.0},
                "measurement": {**_FIG3_MEASUREMENT, "tau": 5.0}, "seed": 0},
               "attosecond chain: shear 1 eV, tau 5 fs, jitter 1e-5"),
    "oscillatory-small": (_with(_FIG3, pulse={"phase": {"oscillatory": {
        "amplitude": 0.3, "period": 0.4, "offset": 0.0}}}),
        "fig3 chain plus a 0.3 rad sinusoidal phase of period 0.4 eV"),
    "oscillatory-large": (_with(_FIG3, pulse={"phase": {"oscillatory": {
        "amplitude": 3.0, "period": 0.4, "offset": 0.0}}}),
        "fig3 chain plus a 3 rad sinusoidal phase of period 0.4 eV"),
    "fig-s5a": ({"diagram": {"order": 2, "sigma_E_range": [0.01, 4.0], "phase_range": [0.0, 10.0],
                             "resolution": [400, 200], "wavelength_um": 10.33}},
                "duration over (sigma_E, phi2) with the T/4 contour"),
    "fig-s5b": ({"diagram": {"order": 3, "sigma_E_range": [0.01, 4.0], "phase_range": [0.0, 10.0],
                             "resolution": [400, 200], "wavelength_um": 10.33}},
                "duration over (sigma_E, phi3) with the T/4 contour"),
}


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return yaml.safe_dump(PRESETS[name][0], sort_keys=True)


# ---------------------------------------------------------------------------
# scenario object


@dataclass(frozen=True)
class PulseSettings:
    sigma_E: float
    center_energy: float
    phase: SpectralPhaseSpec
    count: int = 4096
    span_sigmas: float = 16.0

    def grid(self):
        return default_grid(self.center_energy, self.sigma_E, self.count, self.span_sigmas)


@dataclass(frozen=True)
class LemSettings:
    model: str
    delta_E: float
    params: LemParams

    @property
    def coupling(self) -> float:
        """``2|g|`` giving the configured shear."""
        return self.delta_E / self.params.photon_energy


@dataclass(frozen=True)
class ReconstructionSettings:
    filter_order: int = 4
    filter_fwhm: Optional[float] = None
    amplitude_floor: float = 1e-6
    anchor: Optional[float] = None


@dataclass(frozen=True)
class SweepSettings:
    axis: str
    values: tuple
    seeds: int = 1


@dataclass(frozen=True)
class DiagramSettings:
    order: int
    sigma_E_range: tuple
    phase_range: tuple
    resolution: tuple
    wavelength_um: float = 10.33


@dataclass(frozen=True)
class ScenarioConfig:
    pulse: Optional[PulseSettings]
    lem: Optional[LemSettings]
    measurement: Optional[MeasurementConfig]
    reconstruction: ReconstructionSettings
    sweep: Optional[SweepSettings]
    diagram: Optional[DiagramSettings]
    seed: int = 0
    output: Optional[str] = None
    source: str = "<config>"
    data: dict = field(default_factory=dict, compare=False)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return _replace(self, seed=seed)

    def require(self, *sections):
        for s in sections:
            if getattr(self, s) is None:
                raise ConfigError(f"{self.source}: section {s!r} is required for this command")


def _replace(cfg, **kw):
    from dataclasses import replace
    return replace(cfg, **kw)


class _Ctx:
    def __init__(self, source, marks):
        self.source = source
        self.marks = marks

    def fail(self, path, message):
        where = self.marks.get(tuple(path)) or self.marks.get(tuple(path[:1])) or self.source
        raise ConfigError(f"{where}: {message}")


def _build_pulse(d, ctx):
    if "sigma_E" not in d:
        ctx.fail(("pulse",), "pulse.sigma_E is required")
    ph = d.get("phase", {})
    if "poly" in ph and "taylor" in ph:
        ctx.fail(("pulse", "phase"), "give either phase.poly or phase.taylor, not both")
    osc = ph.get("oscillatory")
    osc_t = None
    if osc is not None:
        osc_t = (osc.get("amplitude", 0.0), osc.get("period", 1.0), osc.get("offset", 0.0))
    try:
        if "taylor" in ph:
            spec = SpectralPhaseSpec.from_taylor(ph["taylor"], osc_t)
        else:
            spec = SpectralPhaseSpec(ph.get("poly", {}), osc_t)
    except ValueError as exc:
        ctx.fail(("pulse", "phase"), str(exc))
    g = d.get("grid", {})
    out = PulseSettings(d["sigma_E"], d.get("center_energy", 10000.0), spec,
                        g.get("count", 4096), g.get("span_sigmas", 16.0))
    if not out.sigma_E > 0:
        ctx.fail(("pulse", "sigma_E"), f"pulse.sigma_E must be positive, got {out.sigma_E}")
    try:
        from .wavepacket import make_gaussian_spectrum
        make_gaussian_spectrum(out.grid(), out.sigma_E)
    except ValueError as exc:
        ctx.fail(("pulse", "grid"), str(exc))
    return out


def _build_lem(d, ctx):
    kw = {k: d[k] for k in ("wavelength_um", "foil_thickness_nm", "phase_delay", "kinetic_energy")
          if k in d}
    given = [k for k in ("delta_E", "coupling", "field_peak", "field_profile") if k in d]
    if len(given) != 1:
        ctx.fail(("lem",), "lem needs exactly one of delta_E, coupling (2|g|), field_peak "
                           "or field_profile")
    try:
        params = LemParams(**kw)
        if "field_profile" in d:
            path = d["field_profile"]
            if not os.path.isabs(path) and not ctx.source.startswith("preset:"):
                path = os.path.join(os.path.dirname(ctx.source), path)
            try:
                z, f = read_field_profile(path)
            except OSError as exc:
                ctx.fail(("lem", "field_profile"), f"cannot read field profile: {exc.strerror}")
            delta = coupling_from_field(params, z, f).shear * params.photon_energy
        elif "field_peak" in d:
            params = params.with_field(d["field_peak"])
            delta = thin_foil_coupling(params) * params.photon_energy
        elif "coupling" in d:
            delta = d["coupling"] * params.photon_energy
        else:
            delta = d["delta_E"]
    except ConfigError:
        raise
    except ValueError as exc:
        ctx.fail(("lem",), str(exc))
    return LemSettings(d.get("model", "shear"), float(delta), params)


def _sweep_values(d, ctx):
    if "values" in d:
        if any(k in d for k in ("start", "stop", "num")):
            ctx.fail(("sweep",), "give either sweep.values or start/stop/num, not both")
        vals = tuple(d["values"])
    else:
        if not all(k in d for k in ("start", "stop", "num")):
            ctx.fail(("sweep",), "sweep needs values or start, stop and num")
        n = d["num"]
        if n < 1:
            ctx.fail(("sweep", "num"), "sweep.num must be at least 1")
        a, b = d["start"], d["stop"]
        if d.get("scale", "linear") == "log":
            if not (a > 0 and b > 0):
                ctx.fail(("sweep", "scale"), "log sweeps need positive start and stop")
            vals = tuple(a * (b / a) ** (i / (n - 1)) if n > 1 else a for i in range(n))
        else:
            vals = tuple(a + (b - a) * i / (n - 1) if n > 1 else a for i in range(n))
    if not vals:
        ctx.fail(("sweep",), "sweep axis is empty")
    return vals


def build(data: dict, marks: dict, source: str) -> ScenarioConfig:
    ctx = _Ctx(source, marks)
    pulse = _build_pulse(data["pulse"], ctx) if "pulse" in data else None
    lem = _build_lem(data["lem"], ctx) if "lem" in data else None
    meas = None
    if "measurement" in data:
        m = data["measurement"]
        if "tau" not in m:
            ctx.fail(("measurement",), "measurement.tau is required")
        if lem is None:
            ctx.fail(("measurement",), "a measurement needs a lem section for the shear")
        try:
            meas = MeasurementConfig(m["tau"], lem.delta_E, m.get("resolution", 0.01),
                                     m.get("jitter_fraction", 0.0), m.get("shots", 1),
                                     m.get("detector", "nyquist"))
        except ValueError as exc:
            # messages start with the offending field name
            key = str(exc).split()[0]
            ctx.fail(("measurement", key) if key in m else ("measurement",), str(exc))
    r = data.get("reconstruction", {})
    if r.get("filter_order", 4) < 1:
        ctx.fail(("reconstruction", "filter_order"), "filter_order must be >= 1")
    rec = ReconstructionSettings(r.get("filter_order", 4), r.get("filter_fwhm"),
                                 r.get("amplitude_floor", 1e-6), r.get("anchor"))
    sweep = None
    if "sweep" in data:
        s = data["sweep"]
        if "axis" not in s:
            ctx.fail(("sweep",), "sweep.axis is required")
        if s.get("seeds", 1) < 1:
            ctx.fail(("sweep", "seeds"), "sweep.seeds must be at least 1")
        sweep = SweepSettings(s["axis"], _sweep_values(s, ctx), s.get("seeds", 1))
    diagram = None
    if "diagram" in data:
        dg = data["diagram"]
        order = dg.get("order", 2)
        if order not in (2, 3):
            ctx.fail(("diagram", "order"), f"diagram.order must be 2 or 3, got {order}")
        rng_s = tuple(dg.get("sigma_E_range", (0.01, 4.0)))
        rng_p = tuple(dg.get("phase_range", (0.0, 10.0)))
        res = dg.get("resolution", (200, 200))
        if len(rng_s) != 2 or len(rng_p) != 2 or len(res) != 2:
            ctx.fail(("diagram",), "diagram ranges and resolution take two numbers each")
        if not (0 < rng_s[0] <= rng_s[1]) or not (0 <= rng_p[0] <= rng_p[1]):
            ctx.fail(("diagram",), "diagram ranges must be positive and increasing")
        if any(int(v) != v or v < 1 for v in res):
            ctx.fail(("diagram", "resolution"), "diagram.resolution must be positive integers")
        diagram = DiagramSettings(order, rng_s, rng_p, tuple(int(v) for v in res),
                                  dg.get("wavelength_um", 10.33))
    return ScenarioConfig(pulse, lem, meas, rec, sweep, diagram, data.get("seed", 0),
                          data.get("output"), source, data)


def load(config_path: Optional[str] = None, preset: Optional[str] = None) -> ScenarioConfig:
    """Load a preset, a YAML file, or a file layered on top of a preset.

    A file may name its base with a top-level ``preset:`` key; an explicit
    ``preset`` argument takes the same role.
    """
    data: dict = {}
    marks: dict = {}
    source = "<empty>"
    file_data: dict = {}
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{config_path}: cannot read config: {exc.strerror}") from exc
        file_data, marks = parse_text(text, config_path)
        source = config_path
    base = preset or file_data.get("preset")
    if preset and file_data.get("preset") and file_data["preset"] != preset:
        raise ConfigError(f"{config_path}: file extends preset {file_data['preset']!r} "
                          f"but --preset {preset!r} was given")
    if base is not None:
        data, pmarks = parse_text(preset_text(base), f"preset:{base}")
        for k, v in pmarks.items():
            marks.setdefault(k, v)
        if config_path is None:
            source = f"preset:{base}"
    data = _merge(data, {k: v for k, v in file_data.items() if k != "preset"})
    return build(data, marks, source)

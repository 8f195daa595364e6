"""Command-line driver.

Exit codes: 0 success, 2 configuration error, 3 constraint failure under
``--strict``, 4 reconstruction failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from typing import List, Optional

from . import pipeline
from .scenario import PRESETS, ConfigError, load

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STRICT = 3
EXIT_RECONSTRUCTION = 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML scenario file")
    common.add_argument("--preset", metavar="NAME", help="named scenario (see 'presets')")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--strict", action="store_true",
                        help="treat constraint violations as errors (exit 3)")

    p = argparse.ArgumentParser(prog="fessi", description=(
        "Simulate and invert free-electron spectral shearing interferometry."))
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write the configured pulse")
    sub.add_parser("run", parents=[common], help="full measurement and retrieval chain")
    sw = sub.add_parser("sweep", parents=[common], help="metric table over one parameter")
    sw.add_argument("--axis", choices=("tau", "delta_E", "jitter_fraction", "resolution"))
    sw.add_argument("--values", metavar="V", type=float, nargs="+", help="axis values")
    sub.add_parser("diagram", parents=[common], help="duration diagram with the T/4 contour")
    sub.add_parser("presets", help="list the named scenarios")
    return p


def _out_dir(args, cfg, default: str) -> str:
    return args.out or cfg.output or default


def _say(lines):
    for line in lines:
        print(line)


def _cmd_presets() -> int:
    width = max(len(k) for k in PRESETS)
    for name in sorted(PRESETS):
        print(f"{name:<{width}}  {PRESETS[name][1]}")
    return EXIT_OK


def _cmd_synth(args, cfg) -> int:
    psi = pipeline.synthesize(cfg)
    paths = pipeline.write_pulse(psi, _out_dir(args, cfg, "fessi-out"))
    _say(f"wrote {p}" for p in paths.values())
    return EXIT_OK


def _cmd_run(args, cfg) -> int:
    outcome = pipeline.run_chain(cfg)
    for w in outcome.warnings:
        print(f"warning: {w}", file=sys.stderr)
    paths = pipeline.write_run(outcome, _out_dir(args, cfg, "fessi-out"))
    s = outcome.summary
    _say(f"{k}={v}" for k, v in s.items())
    _say(f"{k}={v:.3f}" for k, v in outcome.timings.items())
    print(f"wrote {len(paths)} files to {os.path.dirname(paths['summary']) or '.'}")
    if args.strict and not outcome.constraints_ok:
        print("error: constraint check failed (--strict)", file=sys.stderr)
        return EXIT_STRICT
    if outcome.result is None:
        print(f"error: reconstruction failed: {outcome.error}", file=sys.stderr)
        return EXIT_RECONSTRUCTION
    return EXIT_OK


def _cmd_sweep(args, cfg) -> int:
    axis = args.axis
    values = args.values
    if (axis is None) != (values is None) and cfg.sweep is None:
        raise ConfigError("--axis and --values must be given together when the config has no sweep")
    if axis is None and values is not None:
        axis = cfg.sweep.axis
    if values is None and axis is not None and cfg.sweep is not None:
        values = cfg.sweep.values
    rows = pipeline.run_sweep(cfg, axis, values)
    out = _out_dir(args, cfg, "fessi-out")
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"sweep_{rows[0].axis}.txt")
    pipeline.write_sweep(rows, path)
    for r in rows:
        print(f"{r.axis}={r.value:.6g} seed={r.seed} F={r.fidelity:.6f} "
              f"ac/dc={r.ac_to_dc:.4g}{' failed' if r.failed else ''}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_diagram(args, cfg) -> int:
    d = pipeline.run_diagram(cfg)
    paths = pipeline.write_diagram(d, _out_dir(args, cfg, "fessi-out"))
    if d.durations.size == 1:
        print(f"sigma_t_fs={d.durations[0, 0]:.6g}")
    print(f"level_fs={d.level:.6g} contour_lines={len(d.contours)}")
    _say(f"wrote {p}" for p in paths.values())
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "presets":
        return _cmd_presets()
    try:
        if args.config is None and args.preset is None:
            raise ConfigError("give --config PATH and/or --preset NAME")
        cfg = load(args.config, args.preset)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        handler = {"synth": _cmd_synth, "run": _cmd_run, "sweep": _cmd_sweep,
                   "diagram": _cmd_diagram}[args.command]
        return handler(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # remaining input errors (e.g. FESSI_THREADS) are configuration problems too
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

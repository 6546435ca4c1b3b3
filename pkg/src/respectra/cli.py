"""Command line entry point: ``respectra <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .config import RunConfig, default_config, parse_config
from .errors import RespectraError
from .ion_model import manifold_weights, solve_ion
from .output import format_levels, format_lines, format_spectrum
from .spectroscopy import phase_of, render, single_ion_fields, sweep
from .magnetic_lattice import Phase

logger = logging.getLogger("respectra")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration (TOML)")
    common.add_argument("--field-axis", choices=("c", "b"), help="override sweep.field_axis")
    common.add_argument("--polarisation", choices=("pi", "sigma", "both"), help="override sweep.polarisations")
    common.add_argument("--out", type=Path, help="output file (default: output.path or stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="override output.format")
    common.add_argument("-v", "--verbose", action="store_true")

    fields = argparse.ArgumentParser(add_help=False)
    fields.add_argument("--field", type=float, action="append", metavar="TESLA",
                        help="applied field in Tesla (repeatable); default: the configured fields, else 0")

    p = argparse.ArgumentParser(prog="respectra", description="Crystal-field and exchange-pair optical line calculator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("levels", parents=[common, fields], help="single-ion energy levels vs field")
    sub.add_parser("lines", parents=[common, fields], help="main, satellite, hot-band and two-Nd lines")
    sub.add_parser("pair-lines", parents=[common, fields], help="two-Nd pair lines only")
    sw = sub.add_parser("sweep", parents=[common], help="line table over the configured field sweep")
    sw.add_argument("--workers", type=int, default=1, help="threads for independent field points")
    rd = sub.add_parser("render", parents=[common], help="absorption map over the configured sweep")
    rd.add_argument("--workers", type=int, default=1)
    sub.add_parser("validate", parents=[common], help="run the built-in invariant checks")
    return p


def _resolve(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else default_config()
    sw = cfg.sweep
    kw = {}
    if args.field_axis:
        kw["field_axis"] = args.field_axis
        if args.field_axis != sw.field_axis:
            kw["phase_boundaries"] = None  # boundaries belong to the configured axis
    if args.polarisation:
        kw["polarisations"] = ("pi", "sigma") if args.polarisation == "both" else (args.polarisation,)
    if getattr(args, "field", None):
        kw["field_values"] = tuple(sorted(set(args.field)))
    if kw:
        cfg = replace(cfg, sweep=replace(sw, **kw),
                      field_range=None if "field_values" in kw else cfg.field_range)
    out = cfg.output
    if args.format:
        out = replace(out, format=args.format)
    if args.out:
        out = replace(out, path=str(args.out))
    return replace(cfg, output=out)


def _fields(cfg: RunConfig) -> List[float]:
    return list(cfg.sweep.field_values) or [0.0]


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.output.path:
        Path(cfg.output.path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_levels(cfg: RunConfig) -> int:
    spec = cfg.ion_spec()
    rows = []
    for b in _fields(cfg):
        phase = phase_of(b, cfg.sweep.field_axis, cfg.sweep.boundaries)
        if phase is Phase.INTERMEDIATE:
            logger.warning("B = %g T is in the intermediate phase; no levels emitted", b)
            continue
        for s, bt in single_ion_fields(b, cfg.sweep.field_axis, phase, spec, cfg.exchange).items():
            es = solve_ion(spec, bt)
            weights = manifold_weights(es, spec)
            labels = list(weights)
            irreps = es.irreps(cfg.sweep.mixing_threshold)
            for i, e in enumerate(es.energies):
                dom = max(labels, key=lambda l: weights[l][i])
                rows.append((b, str(s), i, float(e), dom, irreps[i]))
    _emit(format_levels(rows, cfg, cfg.output.format), cfg)
    return 0


def _lines(cfg: RunConfig, workers: int = 1, classes: Optional[Sequence[str]] = None):
    sw = cfg.sweep
    if classes is not None:
        sw = replace(sw, include=tuple(classes))
    sw = replace(sw, field_values=tuple(_fields(cfg)) if not sw.field_values else sw.field_values)
    return sweep(sw, cfg.ion_spec(), cfg.exchange, workers=workers)


def cmd_lines(cfg: RunConfig) -> int:
    _emit(format_lines(_lines(cfg), cfg, cfg.output.format), cfg)
    return 0


def cmd_pair_lines(cfg: RunConfig) -> int:
    _emit(format_lines(_lines(cfg, classes=("two_nd",)), cfg, cfg.output.format), cfg)
    return 0


def cmd_sweep(cfg: RunConfig, workers: int = 1) -> int:
    _emit(format_lines(_lines(cfg, workers), cfg, cfg.output.format), cfg)
    return 0


def cmd_render(cfg: RunConfig, workers: int = 1) -> int:
    table = _lines(cfg, workers)
    _emit(format_spectrum(render(table, cfg.sweep), cfg, cfg.output.format), cfg)
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    from .validate import run_checks

    results = run_checks(cfg.ion_spec(), cfg.exchange)
    lines = [f"{'PASS' if ok else 'FAIL'}  {name}: {detail}" for name, ok, detail in results]
    n_ok = sum(ok for _, ok, _ in results)
    lines.append(f"{n_ok}/{len(results)} checks passed")
    _emit("\n".join(lines) + "\n", cfg)
    return 0 if n_ok == len(results) else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        workers = getattr(args, "workers", 1)
        if args.command == "levels":
            return cmd_levels(cfg)
        if args.command == "lines":
            return cmd_lines(cfg)
        if args.command == "pair-lines":
            return cmd_pair_lines(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, workers)
        if args.command == "render":
            return cmd_render(cfg, workers)
        return cmd_validate(cfg)
    except RespectraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

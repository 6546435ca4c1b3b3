"""Deterministic CSV/JSON serialisation of line tables, level tables and spectra."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import SCHEMA_VERSION, RunConfig, config_sha256, config_to_dict
from .spectroscopy import SpectrumMap, TransitionLine, UnmodeledMarker

LINE_COLUMNS = ("field_T", "frequency_GHz", "polarisation", "class", "sublattice", "pair_kind",
                "allowed", "approx_flag", "transition", "initial_irrep", "final_irrep")
LEVEL_COLUMNS = ("field_T", "sublattice", "index", "energy_GHz", "manifold", "irrep")


def fmt_float(x: float) -> str:
    """Nine significant digits, no negative zero."""
    x = float(x)
    if x == 0 or abs(x) < 1e-300:
        return "0"
    s = f"{x:.9g}"
    return "0" if s in ("-0", "0") else s


def _line_row(l: TransitionLine) -> Tuple[str, ...]:
    return (fmt_float(l.field), fmt_float(l.frequency), l.polarisation, l.line_class, l.sublattice,
            l.pair_kind, str(bool(l.allowed)).lower(), str(bool(l.approx_flag)).lower(), l.transition,
            l.initial_irrep, l.final_irrep)


def _marker_row(m: UnmodeledMarker) -> Tuple[str, ...]:
    return (fmt_float(m.field), "", "", "unmodeled", "", "none", "false", "false", m.phase, "", "")


def line_rows(table: Sequence[Tuple[float, Sequence[TransitionLine]]]) -> List[Tuple[str, ...]]:
    """Rows sorted by (field, frequency); marker rows sort first within their field."""
    keyed = []
    for b, lines in table:
        marker = getattr(lines, "unmodeled", None)
        if marker is not None:
            keyed.append(((float(b), -math.inf, ""), _marker_row(marker)))
        for l in lines:
            row = _line_row(l)
            keyed.append(((float(l.field), float(l.frequency), row[2:]), row))
    keyed.sort(key=lambda kr: kr[0])
    return [r for _, r in keyed]


def _header(cfg: Optional[RunConfig]) -> Dict[str, Any]:
    h: Dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if cfg is not None:
        h["config_sha256"] = config_sha256(cfg)
        d = config_to_dict(cfg)
        d["output"].pop("path", None)  # keep files comparable wherever they are written
        h["config"] = d
    return h


def _csv(header: Dict[str, Any], columns: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version: {header['schema_version']}\n")
    if "config_sha256" in header:
        buf.write(f"# config_sha256: {header['config_sha256']}\n")
        buf.write(f"# config: {json.dumps(header['config'], sort_keys=True, separators=(',', ':'))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _json_value(col: str, v: str):
    if col in ("allowed", "approx_flag"):
        return v == "true"
    if col in ("field_T", "frequency_GHz", "energy_GHz"):
        return None if v == "" else float(v)
    if col == "index":
        return int(v)
    return v


def _json(header: Dict[str, Any], columns: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    doc = dict(header)
    doc["columns"] = list(columns)
    doc["rows"] = [{c: _json_value(c, v) for c, v in zip(columns, r)} for r in rows]
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def format_lines(table, cfg: Optional[RunConfig] = None, fmt: str = "csv") -> str:
    rows = line_rows(table)
    return (_csv if fmt == "csv" else _json)(_header(cfg), LINE_COLUMNS, rows)


def format_levels(rows: Sequence[Tuple[float, str, int, float, str, str]], cfg: Optional[RunConfig] = None,
                  fmt: str = "csv") -> str:
    out = [(fmt_float(b), s, str(i), fmt_float(e), m, irr) for b, s, i, e, m, irr in rows]
    return (_csv if fmt == "csv" else _json)(_header(cfg), LEVEL_COLUMNS, out)


def format_spectrum(sm: SpectrumMap, cfg: Optional[RunConfig] = None, fmt: str = "csv") -> str:
    """Dense grid: one row per field, one column per frequency."""
    header = _header(cfg)
    if fmt == "json":
        doc = dict(header)
        doc["fields_T"] = [float(fmt_float(b)) for b in sm.fields]
        doc["frequencies_GHz"] = [float(fmt_float(f)) for f in sm.frequencies]
        doc["intensity"] = [[float(fmt_float(x)) for x in row] for row in sm.intensity]
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    columns = ["field_T"] + [fmt_float(f) for f in sm.frequencies]
    rows = [[fmt_float(b)] + [fmt_float(x) for x in row] for b, row in zip(sm.fields, np.asarray(sm.intensity))]
    return _csv(header, columns, rows)


def read_line_csv(text: str) -> Tuple[Dict[str, str], List[Dict[str, str]]]:
    """Parse a line table written by :func:`format_lines` (header comments, rows)."""
    meta: Dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))

"""TOML input files: ion specifications and run configurations.

Every physical quantity carries an explicit unit suffix, e.g. ``"0.5 T"``,
``"-650 mK"``, ``"11390 cm-1"``. Unknown keys are rejected with their line and
column in the source file.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import tomli
import tomli_w

from .angular_momentum import HalfInt, ReducedMatrixElement
from .constants import GHZ_PER_CM
from .errors import ConfigError
from .ion_model import MOMENT_MODES, CrystalFieldParams, IonSpec, Manifold
from .magnetic_lattice import ExchangeConstants
from .spectroscopy import SweepConfig

SCHEMA_VERSION = 1
BUILTIN_PREFIX = "builtin:"
BUILTIN_IONS = {"ndgao3": "ndgao3_nd.toml"}

# unit -> (quantity, factor to the internal unit)
UNITS = {
    "T": ("field", 1.0),
    "mT": ("field", 1e-3),
    "K": ("temperature", 1.0),
    "mK": ("temperature", 1e-3),
    "GHz": ("frequency", 1.0),
    "MHz": ("frequency", 1e-3),
    "cm-1": ("frequency", GHZ_PER_CM),
}

_QUANTITY_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z][A-Za-z0-9-]*)\s*$")


def parse_quantity(value: Any, quantity: str, where: str = "", path=None, text: Optional[str] = None,
                   loc: Tuple[str, ...] = ()) -> float:
    """Parse ``"<number> <unit>"`` into the internal unit of ``quantity``.

    Internal units: Tesla, Kelvin, GHz.
    """
    line, col = _locate(text, loc) if text is not None else (None, None)
    if isinstance(value, bool) or not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string with a unit suffix, got {value!r}", path, line, col)
    m = _QUANTITY_RE.match(value)
    if not m:
        raise ConfigError(f"{where}: cannot parse quantity {value!r}", path, line, col)
    unit = m.group(2)
    if unit not in UNITS:
        raise ConfigError(f"{where}: unknown unit {unit!r} in {value!r}", path, line, col)
    kind, factor = UNITS[unit]
    if kind != quantity:
        raise ConfigError(f"{where}: unit {unit!r} is a {kind}, expected a {quantity}", path, line, col)
    x = float(m.group(1)) * factor
    if not math.isfinite(x):
        raise ConfigError(f"{where}: value must be finite", path, line, col)
    return x


def format_quantity(x: float, unit: str) -> str:
    return f"{float(x)!r} {unit}"


# ---------------------------------------------------------------------------
# source locations


def _locate(text: Optional[str], loc: Sequence[str]) -> Tuple[Optional[int], Optional[int]]:
    """Best-effort (line, column), 1-based, of key ``loc[-1]`` inside table ``loc[:-1]``."""
    if text is None or not loc:
        return None, None
    lines = text.splitlines()
    key = re.escape(str(loc[-1]))
    start, stop = 0, len(lines)
    tables = [str(t) for t in loc[:-1] if not str(t).isdigit()]
    if tables:
        header = re.compile(r"^\s*\[\[?\s*" + re.escape(".".join(tables)) + r"\s*\]\]?\s*(#.*)?$")
        for i, l in enumerate(lines):
            if header.match(l):
                start = i + 1
                for j in range(start, len(lines)):
                    if re.match(r"^\s*\[", lines[j]):
                        stop = j
                        break
                break
    pat = re.compile(r"(?:^|[\s{,])(\"?" + key + r"\"?)\s*=")
    for rng in (range(start, stop), range(len(lines))):
        for i in rng:
            m = pat.search(lines[i])
            if m:
                return i + 1, m.start(1) + 1
    return None, None


def _check_keys(table: Dict[str, Any], allowed: Sequence[str], prefix: Tuple[str, ...], path, text):
    for k in table:
        if k not in allowed:
            line, col = _locate(text, prefix + (k,))
            where = ".".join(prefix + (k,))
            raise ConfigError(f"unknown key {where!r}; expected one of {sorted(allowed)}", path, line, col)


def _require(table: Dict[str, Any], key: str, prefix: Tuple[str, ...], path):
    if key not in table:
        where = ".".join(prefix) or "top level"
        raise ConfigError(f"missing required key {key!r} in {where}", path)
    return table[key]


def _load_toml(text: str, path) -> Dict[str, Any]:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ConfigError(f"invalid TOML: {exc}", path, line, col) from None


# ---------------------------------------------------------------------------
# ion specification files


def _half_int(value, where, path) -> HalfInt:
    try:
        if isinstance(value, str):
            value = Fraction(value)
        return HalfInt.of(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: {exc}", path) from None


def parse_ion_spec_text(text: str, path=None) -> IonSpec:
    data = _load_toml(text, path)
    _check_keys(data, ("name", "moment_mode", "transition", "manifold", "cf", "rme"), (), path, text)
    manifolds = []
    for i, m in enumerate(_require(data, "manifold", (), path)):
        _check_keys(m, ("label", "L", "S", "J", "centroid"), ("manifold",), path, text)
        label = str(_require(m, "label", ("manifold",), path))
        centroid_ghz = parse_quantity(_require(m, "centroid", ("manifold",), path), "frequency",
                                      f"manifold {label} centroid", path, text, ("manifold", "centroid"))
        manifolds.append(Manifold(
            label,
            _half_int(_require(m, "L", ("manifold",), path), f"manifold {label} L", path),
            _half_int(_require(m, "S", ("manifold",), path), f"manifold {label} S", path),
            _half_int(_require(m, "J", ("manifold",), path), f"manifold {label} J", path),
            centroid_ghz / GHZ_PER_CM,
        ))
    cf = data.get("cf", {"unit": "cm-1", "rows": []})
    _check_keys(cf, ("unit", "rows"), ("cf",), path, text)
    unit = cf.get("unit", "cm-1")
    if unit not in ("cm-1", "GHz"):
        raise ConfigError(f"cf.unit must be 'cm-1' or 'GHz', got {unit!r}", path, *_locate(text, ("cf", "unit")))
    scale = 1.0 if unit == "cm-1" else 1.0 / GHZ_PER_CM
    entries = {}
    for row in cf.get("rows", []):
        if len(row) != 4:
            raise ConfigError(f"cf row {row} must be [k, q, Re, Im]", path, *_locate(text, ("cf", "rows")))
        k, q, re_, im = row
        if (int(k), int(q)) in entries:
            raise ConfigError(f"duplicate cf entry k={k}, q={q}", path, *_locate(text, ("cf", "rows")))
        entries[(int(k), int(q))] = complex(float(re_), float(im)) * scale
    cfp = CrystalFieldParams.from_dict(entries)
    cfp.completed()
    rme_tab = data.get("rme", {"rows": []})
    _check_keys(rme_tab, ("rows",), ("rme",), path, text)
    rmes = []
    for row in rme_tab.get("rows", []):
        if len(row) != 4:
            raise ConfigError(f"rme row {row} must be [bra, ket, k, value]", path, *_locate(text, ("rme", "rows")))
        rmes.append(ReducedMatrixElement(str(row[0]), str(row[1]), int(row[2]), float(row[3])))
    mode = data.get("moment_mode", "lande")
    if mode not in MOMENT_MODES:
        raise ConfigError(f"moment_mode must be one of {MOMENT_MODES}", path, *_locate(text, ("moment_mode",)))
    return IonSpec(tuple(manifolds), cfp, tuple(rmes), mode, str(data.get("name", "")),
                   tuple(data.get("transition", ())))


def _ion_source(ref: str) -> Tuple[str, str]:
    """(resolved reference, file text) for a builtin name or a path."""
    if ref.startswith(BUILTIN_PREFIX):
        name = ref[len(BUILTIN_PREFIX):]
        if name not in BUILTIN_IONS:
            raise ConfigError(f"unknown builtin ion {name!r}; available: {sorted(BUILTIN_IONS)}")
        text = resources.files("respectra.data").joinpath(BUILTIN_IONS[name]).read_text(encoding="utf-8")
        return ref, text
    p = Path(ref)
    if not p.is_file():
        raise ConfigError(f"ion spec file not found: {ref}")
    return str(p.resolve()), p.read_text(encoding="utf-8")


def load_ion_spec(ref: str = "builtin:ndgao3") -> IonSpec:
    resolved, text = _ion_source(str(ref))
    return parse_ion_spec_text(text, resolved)


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class OutputConfig:
    format: str = "csv"
    path: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    ion_spec_path: str
    exchange: ExchangeConstants = ExchangeConstants()
    sweep: SweepConfig = SweepConfig()
    output: OutputConfig = OutputConfig()
    field_range: Optional[Tuple[float, float, float]] = None  # (start, stop, step) if given as a range
    source: Optional[str] = field(default=None, compare=False)

    def ion_spec(self) -> IonSpec:
        return load_ion_spec(self.ion_spec_path)

    def ion_text_sha256(self) -> str:
        return hashlib.sha256(_ion_source(self.ion_spec_path)[1].encode("utf-8")).hexdigest()


_TOP_KEYS = ("ion_spec", "exchange", "sweep", "render", "output")
_EXCHANGE_KEYS = ("J_par", "J_perp", "J_par_p", "J_perp_p")
_SWEEP_KEYS = ("field_axis", "fields", "field_range", "phase_boundaries", "polarisations",
               "satellite_offsets", "linewidth", "include", "hot_band_everywhere", "mixing_threshold",
               "two_nd_mode")
_RENDER_KEYS = ("freq_min", "freq_max", "freq_step")
_OUTPUT_KEYS = ("format", "path")


def field_grid(start: float, stop: float, step: float) -> Tuple[float, ...]:
    """Inclusive field grid; values are rounded to 1e-12 T to avoid drift."""
    if step <= 0:
        raise ConfigError("field_range.step must be positive")
    if stop < start:
        raise ConfigError("field_range.stop must not be below start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 12) + 0.0 for i in range(n))


def parse_config_text(text: str, path=None, base_dir: Optional[Path] = None) -> RunConfig:
    data = _load_toml(text, path)
    _check_keys(data, _TOP_KEYS, (), path, text)

    ref = _require(data, "ion_spec", (), path)
    if not isinstance(ref, str):
        raise ConfigError("ion_spec must be a string", path, *_locate(text, ("ion_spec",)))
    if not ref.startswith(BUILTIN_PREFIX):
        p = Path(ref)
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        if not p.is_file():
            raise ConfigError(f"ion spec file not found: {p}", path, *_locate(text, ("ion_spec",)))
        ref = str(p.resolve())
    elif ref[len(BUILTIN_PREFIX):] not in BUILTIN_IONS:
        raise ConfigError(f"unknown builtin ion {ref!r}", path, *_locate(text, ("ion_spec",)))

    ex = data.get("exchange", {})
    _check_keys(ex, _EXCHANGE_KEYS, ("exchange",), path, text)
    defaults = ExchangeConstants()
    xc = ExchangeConstants(**{
        k: parse_quantity(ex[k], "temperature", f"exchange.{k}", path, text, ("exchange", k))
        if k in ex else getattr(defaults, k)
        for k in _EXCHANGE_KEYS
    })

    sw = data.get("sweep", {})
    _check_keys(sw, _SWEEP_KEYS, ("sweep",), path, text)
    kw: Dict[str, Any] = {}
    if "field_axis" in sw:
        kw["field_axis"] = sw["field_axis"]
    if "fields" in sw and "field_range" in sw:
        raise ConfigError("give either sweep.fields or sweep.field_range, not both", path,
                          *_locate(text, ("sweep", "field_range")))
    field_range = None
    if "fields" in sw:
        vals = [parse_quantity(v, "field", "sweep.fields", path, text, ("sweep", "fields")) for v in sw["fields"]]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("sweep.fields must be strictly ascending", path, *_locate(text, ("sweep", "fields")))
        kw["field_values"] = tuple(vals)
    elif "field_range" in sw:
        fr = sw["field_range"]
        if not isinstance(fr, dict):
            raise ConfigError("sweep.field_range must be a table", path, *_locate(text, ("sweep", "field_range")))
        _check_keys(fr, ("start", "stop", "step"), ("sweep", "field_range"), path, text)
        start, stop, step = (parse_quantity(_require(fr, k, ("sweep", "field_range"), path), "field",
                                            f"sweep.field_range.{k}", path, text, ("sweep", "field_range", k))
                             for k in ("start", "stop", "step"))
        field_range = (start, stop, step)
        kw["field_values"] = field_grid(start, stop, step)
    if "phase_boundaries" in sw:
        kw["phase_boundaries"] = tuple(
            parse_quantity(v, "field", "sweep.phase_boundaries", path, text, ("sweep", "phase_boundaries"))
            for v in sw["phase_boundaries"])
    if "polarisations" in sw:
        kw["polarisations"] = tuple(sw["polarisations"])
    if "satellite_offsets" in sw:
        kw["satellite_offsets"] = tuple(
            parse_quantity(v, "frequency", "sweep.satellite_offsets", path, text, ("sweep", "satellite_offsets"))
            for v in sw["satellite_offsets"])
    if "linewidth" in sw:
        kw["linewidth"] = parse_quantity(sw["linewidth"], "frequency", "sweep.linewidth", path, text,
                                         ("sweep", "linewidth"))
    if "include" in sw:
        kw["include"] = tuple(sw["include"])
    for k in ("hot_band_everywhere", "mixing_threshold", "two_nd_mode"):
        if k in sw:
            kw[k] = sw[k]
    if "mixing_threshold" in kw and (isinstance(kw["mixing_threshold"], bool)
                                     or not isinstance(kw["mixing_threshold"], (int, float))):
        raise ConfigError("sweep.mixing_threshold must be a number", path, *_locate(text, ("sweep", "mixing_threshold")))
    if "two_nd_mode" in kw and kw["two_nd_mode"] not in ("flip", "ee"):
        raise ConfigError("sweep.two_nd_mode must be 'flip' or 'ee'", path, *_locate(text, ("sweep", "two_nd_mode")))

    rd = data.get("render", {})
    _check_keys(rd, _RENDER_KEYS, ("render",), path, text)
    for k in _RENDER_KEYS:
        if k in rd:
            kw[k] = parse_quantity(rd[k], "frequency", f"render.{k}", path, text, ("render", k))
    try:
        sweep_cfg = SweepConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(str(exc), path) from None

    out = data.get("output", {})
    _check_keys(out, _OUTPUT_KEYS, ("output",), path, text)
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format must be 'csv' or 'json'", path, *_locate(text, ("output", "format")))
    opath = out.get("path")
    if opath is not None and base_dir is not None and not Path(opath).is_absolute():
        opath = str((base_dir / opath).resolve())
    return RunConfig(ref, xc, sweep_cfg, OutputConfig(fmt, opath), field_range, str(path) if path else None)


def parse_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path) from None
    return parse_config_text(text, str(p), p.parent)


def default_config(ion_spec_path: str = "builtin:ndgao3") -> RunConfig:
    return parse_config_text(f'ion_spec = "{ion_spec_path}"\n')


def config_to_dict(cfg: RunConfig) -> Dict[str, Any]:
    """Resolved configuration as TOML-ready data with unit strings."""
    sw = cfg.sweep
    sweep: Dict[str, Any] = {"field_axis": sw.field_axis}
    if cfg.field_range is not None:
        sweep["field_range"] = {k: format_quantity(v, "T") for k, v in zip(("start", "stop", "step"), cfg.field_range)}
    else:
        sweep["fields"] = [format_quantity(b, "T") for b in sw.field_values]
    sweep.update({
        "phase_boundaries": [format_quantity(b, "T") for b in sw.boundaries],
        "polarisations": list(sw.polarisations),
        "satellite_offsets": [format_quantity(x, "GHz") for x in sw.satellite_offsets],
        "linewidth": format_quantity(sw.linewidth, "GHz"),
        "include": list(sw.include),
        "hot_band_everywhere": bool(sw.hot_band_everywhere),
        "mixing_threshold": float(sw.mixing_threshold),
        "two_nd_mode": sw.two_nd_mode,
    })
    out: Dict[str, Any] = {"format": cfg.output.format}
    if cfg.output.path is not None:
        out["path"] = cfg.output.path
    return {
        "ion_spec": cfg.ion_spec_path,
        "exchange": {k: format_quantity(getattr(cfg.exchange, k), "K") for k in _EXCHANGE_KEYS},
        "sweep": sweep,
        "render": {k: format_quantity(getattr(sw, k), "GHz") for k in _RENDER_KEYS},
        "output": out,
    }


def serialize_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def config_sha256(cfg: RunConfig) -> str:
    """Hash of the resolved configuration plus the ion-spec file contents."""
    d = config_to_dict(cfg)
    # output location and the ion file's path do not change results; its contents do
    d.pop("output", None)
    d.pop("ion_spec", None)
    d["ion_spec_sha256"] = cfg.ion_text_sha256()
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()

"""Field sweeps, line lists and rendered spectra.

Frequencies are reported in GHz relative to the zero-field pi-polarised main
line of sublattice 1 in the antiferromagnetic phase. Lines are computed at
T = 0: main lines start from the lowest Z1 level, hot-band lines from the
upper one.
"""

from __future__ import annotations

import bisect
import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .constants import MU_B_GHZ_PER_T
from .errors import ConfigError
from .ion_model import (
    GAMMA3, GAMMA4, MIXED, EigenSystem, IonSpec, ground_g_factors, lowest_doublet,
    moment_operators, solve_ion,
)
from .magnetic_lattice import (
    AXIS_VECTORS, IN_PLANE, OUT_OF_PLANE, ExchangeConstants, Phase, exchange_tensor,
    mean_field_b_axis_pm, mean_field_pair_member, mean_field_single,
    mean_field_single_b_axis_pm,
)
from .pair_model import build_pair, project_ion, two_nd_lines

POLARISATIONS = ("pi", "sigma")
LINE_CLASSES = ("main", "two_nd", "satellite", "hot_band")
DEFAULT_BOUNDARIES = {"c": (1.1, 2.3), "b": (1.72,)}

_SINGLE = {GAMMA3, GAMMA4}
_PAIR = {"G1", "G2"}


def selection_rule(initial: str, final: str) -> str:
    """Polarisation of an allowed transition between two irreps.

    Same irrep (G3->G3, G4->G4, G1->G1, G2->G2) is sigma, any cross pair is pi.
    Single-ion (G3/G4) and pair (G1/G2) labels cannot be mixed.
    """
    kinds = {initial in _SINGLE, final in _SINGLE}
    known = _SINGLE | _PAIR
    if initial not in known or final not in known:
        raise ValueError(f"unknown irrep in ({initial!r}, {final!r})")
    if len(kinds) != 1:
        raise ValueError(f"cannot combine single-ion and pair irreps: ({initial!r}, {final!r})")
    return "sigma" if initial == final else "pi"


def phase_of(b: float, axis: str, boundaries: Optional[Sequence[float]] = None) -> Phase:
    """Magnetic phase at applied field ``b`` (Tesla) along ``axis``.

    A field equal to a boundary belongs to the higher-field phase.
    """
    if boundaries is None:
        boundaries = DEFAULT_BOUNDARIES[axis]
    boundaries = list(boundaries)
    if boundaries != sorted(boundaries):
        raise ConfigError(f"phase boundaries must be ascending, got {boundaries}")
    i = bisect.bisect_right(boundaries, abs(b))
    if len(boundaries) == 1:
        return (Phase.AFM, Phase.PM)[i]
    if len(boundaries) == 2:
        return (Phase.AFM, Phase.INTERMEDIATE, Phase.PM)[i]
    raise ConfigError(f"expected one or two phase boundaries, got {len(boundaries)}")


@dataclass(frozen=True)
class SweepConfig:
    field_axis: str = "c"
    field_values: Tuple[float, ...] = ()
    phase_boundaries: Optional[Tuple[float, ...]] = None
    polarisations: Tuple[str, ...] = POLARISATIONS
    satellite_offsets: Tuple[float, ...] = (-50.0, 250.0)
    linewidth: float = 1.0
    include: Tuple[str, ...] = LINE_CLASSES
    hot_band_everywhere: bool = False
    mixing_threshold: float = 0.25
    freq_min: float = -150.0
    freq_max: float = 350.0
    freq_step: float = 0.25
    two_nd_mode: str = "flip"

    def __post_init__(self):
        if self.field_axis not in AXIS_VECTORS:
            raise ConfigError(f"field axis must be 'c' or 'b', got {self.field_axis!r}")
        fv = [float(x) for x in self.field_values]
        if any(b <= a for a, b in zip(fv, fv[1:])):
            raise ConfigError("field values must be strictly ascending")
        object.__setattr__(self, "field_values", tuple(fv))
        # None means the defaults of the chosen axis
        bounds = DEFAULT_BOUNDARIES[self.field_axis] if self.phase_boundaries is None else \
            tuple(float(x) for x in self.phase_boundaries)
        object.__setattr__(self, "phase_boundaries", bounds)
        if list(bounds) != sorted(bounds):
            raise ConfigError("phase boundaries must be ascending")
        bad = [p for p in self.polarisations if p not in POLARISATIONS]
        if bad or not self.polarisations:
            raise ConfigError(f"polarisations must be a non-empty subset of {POLARISATIONS}")
        bad = [c for c in self.include if c not in LINE_CLASSES]
        if bad:
            raise ConfigError(f"unknown line classes {bad}")
        if not self.linewidth > 0:
            raise ConfigError("linewidth must be positive")
        if not self.freq_step > 0 or self.freq_max <= self.freq_min:
            raise ConfigError("render grid needs freq_min < freq_max and freq_step > 0")
        if not 0 <= self.mixing_threshold <= 0.5:
            raise ConfigError("mixing_threshold must lie in [0, 0.5]")

    @property
    def boundaries(self) -> Tuple[float, ...]:
        return self.phase_boundaries


@dataclass(frozen=True)
class TransitionLine:
    field: float  # applied field, T
    frequency: float  # GHz relative to the zero-field pi main line
    polarisation: str
    line_class: str
    sublattice: str  # "1", "2" or "both"
    pair_kind: str  # "none", "in_plane" or "out_of_plane"
    allowed: bool
    approx_flag: bool
    transition: str = ""
    initial_irrep: str = ""
    final_irrep: str = ""

    def __post_init__(self):
        if not np.isfinite(self.frequency):
            raise ValueError("line frequency must be finite")
        if (self.pair_kind != "none") != (self.line_class == "two_nd"):
            raise ValueError("pair_kind must be set exactly for two_nd lines")


@dataclass(frozen=True)
class UnmodeledMarker:
    field: float
    phase: str
    reason: str = "no magnetic-structure model for this phase"


class LineList(list):
    """List of :class:`TransitionLine`; ``unmodeled`` is set for unmodelled phases."""

    def __init__(self, lines: Iterable[TransitionLine] = (), unmodeled: Optional[UnmodeledMarker] = None):
        super().__init__(lines)
        self.unmodeled = unmodeled


@dataclass
class SpectrumMap:
    fields: np.ndarray
    frequencies: np.ndarray
    intensity: np.ndarray  # shape (len(fields), len(frequencies))


# ---------------------------------------------------------------------------
# per-field context


@functools.lru_cache(maxsize=32)
def _ground_g(spec: IonSpec) -> Tuple[float, float, float]:
    return ground_g_factors(spec)


def _field_vector(b: float, axis: str) -> np.ndarray:
    return b * AXIS_VECTORS[axis]


def single_ion_fields(b: float, axis: str, phase: Phase, spec: IonSpec,
                      xc: ExchangeConstants) -> Dict[int, np.ndarray]:
    """Total field (applied + mean field) on each sublattice, in Tesla."""
    g_a, g_b, g_c = _ground_g(spec)
    b0 = _field_vector(b, axis)
    if phase is Phase.PM and axis == "b":
        mf = mean_field_single_b_axis_pm(xc, g_b)
        return {1: b0 + mf, 2: b0 + mf}
    return {s: b0 + mean_field_single(xc, phase, s, g_c) for s in (1, 2)}


def pair_member_fields(b: float, axis: str, phase: Phase, kind: str, spec: IonSpec,
                       xc: ExchangeConstants, sublattice: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    g_a, g_b, g_c = _ground_g(spec)
    b0 = _field_vector(b, axis)
    if phase is Phase.PM and axis == "b":
        mf = mean_field_b_axis_pm(xc, g_b)
        return b0 + mf, b0 + mf
    return tuple(b0 + mean_field_pair_member(xc, kind, phase, m, g_c, sublattice) for m in (1, 2))


def _doublets(es: EigenSystem, spec: IonSpec):
    return lowest_doublet(es, spec, spec.ground_manifold), lowest_doublet(es, spec, spec.excited_manifold)


@functools.lru_cache(maxsize=4096)
def _solve_cached(spec: IonSpec, b_total: Tuple[float, float, float]) -> EigenSystem:
    return solve_ion(spec, b_total)


def _solve(spec: IonSpec, b_total) -> EigenSystem:
    return _solve_cached(spec, tuple(float(x) + 0.0 for x in b_total))


@functools.lru_cache(maxsize=32)
def reference_frequency(spec: IonSpec, xc: ExchangeConstants, mixing_threshold: float = 0.25) -> float:
    """Absolute frequency (GHz) of the zero-field pi main line of sublattice 1 (AFM)."""
    fields = single_ion_fields(0.0, "c", Phase.AFM, spec, xc)
    es = _solve(spec, fields[1])
    z1, r1 = _doublets(es, spec)
    labels = es.irreps(mixing_threshold)
    cands = []
    for f in r1:
        li, lf = labels[z1[0]], labels[f]
        freq = float(es.energies[f] - es.energies[z1[0]])
        if MIXED in (li, lf) or selection_rule(li, lf) == "pi":
            cands.append(freq)
    if not cands:
        # no pi-allowed line: fall back to the lowest main line
        cands = [float(es.energies[r1[0]] - es.energies[z1[0]])]
    return min(cands)


def _allowed(initial: str, final: str, pol: str) -> bool:
    if MIXED in (initial, final):
        return True
    return selection_rule(initial, final) == pol


def _level_name(manifold: str, k: int) -> str:
    return f"{manifold}{'-+'[k]}"


def _single_ion_records(b, phase, cfg, spec, xc, ref):
    """Main and hot-band raw records per sublattice: (sublattice, class, freq, label, li, lf)."""
    out = {}
    for s, bt in single_ion_fields(b, cfg.field_axis, phase, spec, xc).items():
        es = _solve(spec, bt)
        z1, r1 = _doublets(es, spec)
        labels = es.irreps(cfg.mixing_threshold)
        recs = []
        split = float(es.energies[z1[1]] - es.energies[z1[0]])
        for zi, cls in ((0, "main"), (1, "hot_band")):
            if cls == "hot_band" and split <= 1e-9:
                continue
            for ri in (0, 1):
                freq = float(es.energies[r1[ri]] - es.energies[z1[zi]]) - ref
                name = f"{_level_name('Z1', zi)}->{_level_name('R1', ri)}"
                recs.append((cls, freq, name, labels[z1[zi]], labels[r1[ri]]))
        out[s] = recs
    return out


def _pol_pattern(li: str, lf: str, pols) -> Tuple[bool, ...]:
    return tuple(_allowed(li, lf, p) for p in pols)


def _merge_sublattices(per_sub: Dict[int, list], pols, tol: float = 1e-6):
    """Collapse the two sublattices into one set when their lines coincide.

    Lines coincide when class, transition, frequency and the allowed
    polarisations agree; the irrep labels themselves may be mirror images.
    """
    a = sorted(per_sub[1], key=lambda r: (r[0], r[2]))
    b = sorted(per_sub[2], key=lambda r: (r[0], r[2]))
    same = len(a) == len(b) and all(
        x[0] == y[0] and x[2] == y[2] and abs(x[1] - y[1]) <= tol
        and _pol_pattern(x[3], x[4], pols) == _pol_pattern(y[3], y[4], pols)
        for x, y in zip(a, b)
    )
    if same:
        return [("both", r) for r in per_sub[1]]
    return [("1", r) for r in per_sub[1]] + [("2", r) for r in per_sub[2]]


def _pair_records(b, phase, cfg, spec, xc, ref):
    g = _ground_g(spec)
    recs = []
    for kind in (IN_PLANE, OUT_OF_PLANE):
        subs = (1,) if kind == IN_PLANE else (1, 2)
        per_sub = {}
        for s in subs:
            f1, f2 = pair_member_fields(b, cfg.field_axis, phase, kind, spec, xc, s)
            ions = []
            for bt in (f1, f2):
                es = _solve(spec, bt)
                ions.append(project_ion(es, spec, _doublets(es, spec), cfg.mixing_threshold))
            ps = build_pair(ions[0], ions[1], exchange_tensor(xc, kind, g))
            per_sub[s] = [(l.frequency - ref, l) for l in two_nd_lines(
                ps, cfg.polarisations, kind, mode=cfg.two_nd_mode,
                approximate=(kind == OUT_OF_PLANE))]
        if kind == IN_PLANE:
            recs += [("both", f, l) for f, l in per_sub[1]]
            continue
        key = lambda r: (r[1].transition, r[1].polarisation)
        a, c = sorted(per_sub[1], key=key), sorted(per_sub[2], key=key)
        same = len(a) == len(c) and all(
            abs(x[0] - y[0]) <= 1e-6 and key(x) == key(y) and x[1].allowed == y[1].allowed
            for x, y in zip(a, c))
        if same:
            recs += [("both", f, l) for f, l in per_sub[1]]
        else:
            recs += [("1", f, l) for f, l in per_sub[1]] + [("2", f, l) for f, l in per_sub[2]]
    return recs


def line_list(b: float, cfg: SweepConfig, spec: IonSpec, xc: ExchangeConstants = ExchangeConstants()) -> LineList:
    """All configured lines at applied field ``b`` (Tesla) along ``cfg.field_axis``."""
    phase = phase_of(b, cfg.field_axis, cfg.boundaries)
    if phase is Phase.INTERMEDIATE:
        return LineList([], UnmodeledMarker(float(b), phase.value))
    ref = reference_frequency(spec, xc, cfg.mixing_threshold)
    lines: List[TransitionLine] = []
    per_sub = _single_ion_records(b, phase, cfg, spec, xc, ref)
    merged = _merge_sublattices(per_sub, cfg.polarisations)
    hot_pols = cfg.polarisations if (cfg.hot_band_everywhere or cfg.field_axis != "b") else \
        tuple(p for p in cfg.polarisations if p == "sigma")
    hot_on = "hot_band" in cfg.include and (cfg.hot_band_everywhere or cfg.field_axis == "b")
    for sub, (cls, freq, name, li, lf) in merged:
        if cls == "main":
            for pol in cfg.polarisations:
                allowed = _allowed(li, lf, pol)
                if "main" in cfg.include:
                    lines.append(TransitionLine(b, freq, pol, "main", sub, "none", allowed, False, name, li, lf))
                if "satellite" in cfg.include:
                    for off in cfg.satellite_offsets:
                        lines.append(TransitionLine(b, freq + off, pol, "satellite", sub, "none", allowed, False,
                                                    f"{name}@{off:+g}GHz", li, lf))
        elif hot_on:
            for pol in hot_pols:
                lines.append(TransitionLine(b, freq, pol, "hot_band", sub, "none",
                                            _allowed(li, lf, pol), False, name, li, lf))
    if "two_nd" in cfg.include:
        for sub, freq, pl in _pair_records(b, phase, cfg, spec, xc, ref):
            lines.append(TransitionLine(b, freq, pl.polarisation, "two_nd", sub, pl.pair_kind, pl.allowed,
                                        pl.flagged, pl.transition, pl.initial_irrep, pl.final_irrep))
    lines.sort(key=_line_key)
    return LineList(lines)


def _line_key(l: TransitionLine):
    return (l.field, l.frequency, l.polarisation, l.line_class, l.sublattice, l.pair_kind, l.transition)


def sweep(cfg: SweepConfig, spec: IonSpec, xc: ExchangeConstants = ExchangeConstants(),
          workers: int = 1) -> List[Tuple[float, LineList]]:
    """Line lists for every field in ``cfg.field_values``, in field order."""
    fields = list(cfg.field_values)
    if not fields:
        return []
    reference_frequency(spec, xc, cfg.mixing_threshold)  # warm the shared caches once
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: line_list(b, cfg, spec, xc), fields))
    else:
        results = [line_list(b, cfg, spec, xc) for b in fields]
    return list(zip(fields, results))


def max_moment(spec: IonSpec) -> float:
    """Largest moment eigenvalue magnitude over the three axes, in mu_B."""
    return max(float(np.max(np.abs(np.linalg.eigvalsh(m)))) for m in moment_operators(spec))


def continuity_violations(table: Sequence[Tuple[float, Sequence[TransitionLine]]], cfg: SweepConfig,
                          spec: IonSpec, factor: float = 5.0) -> List[Tuple[float, float, tuple]]:
    """Adjacent-field jumps of a labelled line larger than ``factor`` times the Zeeman bound.

    The bound per step is 4 m_max mu_B dB: two ions, each shifting both
    levels of its transition. Steps across a phase boundary are skipped.
    """
    m = max_moment(spec)
    bad = []
    for (b0, l0), (b1, l1) in zip(table, table[1:]):
        if phase_of(b0, cfg.field_axis, cfg.boundaries) != phase_of(b1, cfg.field_axis, cfg.boundaries):
            continue
        bound = factor * 4 * m * MU_B_GHZ_PER_T * abs(b1 - b0)
        before: Dict[tuple, List[float]] = {}
        for l in l0:
            before.setdefault(_identity(l), []).append(l.frequency)
        for l in l1:
            k = _identity(l)
            # a merged line ("both") continues into either sublattice and back
            subs = ("1", "2", "both") if l.sublattice == "both" else (l.sublattice, "both")
            prev = [f for s in subs for f in before.get(k[:2] + (s,) + k[3:], ())]
            if prev and min(abs(l.frequency - f) for f in prev) > bound:
                bad.append((b0, b1, k))
    return bad


def _identity(l: TransitionLine):
    return (l.line_class, l.polarisation, l.sublattice, l.pair_kind, l.transition)


def render(table: Sequence[Tuple[float, Sequence[TransitionLine]]], cfg: SweepConfig) -> SpectrumMap:
    """Sum of unit-area Lorentzians on the allowed lines of each field column.

    Profiles are cut at 6 FWHM from the centre and rescaled to keep unit area;
    approximate lines count half.
    """
    freqs = np.arange(cfg.freq_min, cfg.freq_max + cfg.freq_step / 2, cfg.freq_step)
    fields = np.array([b for b, _ in table], dtype=float)
    out = np.zeros((len(fields), len(freqs)))
    gamma = cfg.linewidth / 2
    cut = 6 * cfg.linewidth
    norm = (2 / np.pi) * np.arctan(cut / gamma)
    for i, (_, lines) in enumerate(table):
        for l in lines:
            if not l.allowed:
                continue
            d = freqs - l.frequency
            prof = np.where(np.abs(d) <= cut, gamma / np.pi / (d ** 2 + gamma ** 2), 0.0) / norm
            out[i] += (0.5 if l.approx_flag else 1.0) * prof
    return SpectrumMap(fields, freqs, out)

"""Single-ion effective Hamiltonian: free-ion centroids + crystal field + Zeeman.

All matrices share one basis: manifolds in the order given by the
:class:`IonSpec`, ``|J, M>`` with M descending inside each manifold.
Energies are in GHz; fields in Tesla; moments in Bohr magnetons.
Crystallographic axes map to Cartesian ones as a -> x, b -> y, c -> z, with c
normal to the site mirror plane.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .angular_momentum import (
    BasisState,
    HalfInt,
    ReducedMatrixElement,
    angular_momentum_matrices,
    angular_momentum_rme,
    lande_g,
    orbital_to_j_rme,
    spherical_to_cartesian,
    spin_to_j_rme,
    wigner3j,
)
from .constants import GHZ_PER_CM, MU_B_GHZ_PER_T
from .errors import AmbiguousIrrepError, ConfigError, ContractError

logger = logging.getLogger(__name__)

GAMMA3 = "G3"
GAMMA4 = "G4"
MIXED = "mixed"

MOMENT_MODES = ("lande", "exact_LS")


@dataclass(frozen=True)
class Manifold:
    label: str
    L: HalfInt
    S: HalfInt
    J: HalfInt
    centroid: float  # cm^-1

    def __post_init__(self):
        for name in ("L", "S", "J"):
            object.__setattr__(self, name, HalfInt.of(getattr(self, name)))
        if self.centroid < 0:
            raise ConfigError(f"manifold {self.label}: centroid must be >= 0")

    @property
    def dimension(self) -> int:
        return self.J.twice_value + 1

    def states(self) -> List[BasisState]:
        return [
            BasisState(self.label, self.L, self.S, self.J, HalfInt(m2))
            for m2 in range(self.J.twice_value, -self.J.twice_value - 1, -2)
        ]


@dataclass(frozen=True)
class CrystalFieldParams:
    """B^k_q coefficients in cm^-1 (Wybourne normalisation).

    Only one of each ``(k, q)``/``(k, -q)`` pair needs to be stored; the
    partner follows from B^k_{-q} = (-1)^q conj(B^k_q). If both are stored
    they must satisfy that relation.
    """

    entries: Tuple[Tuple[Tuple[int, int], complex], ...] = ()

    @classmethod
    def from_dict(cls, d: Dict[Tuple[int, int], complex]) -> "CrystalFieldParams":
        return cls(tuple(sorted((tuple(kq), complex(v)) for kq, v in d.items())))

    def as_dict(self) -> Dict[Tuple[int, int], complex]:
        return dict(self.entries)

    def completed(self, tol: float = 1e-9) -> Dict[Tuple[int, int], complex]:
        """All (k, q) including negative q, after checking Hermiticity."""
        out: Dict[Tuple[int, int], complex] = {}
        for (k, q), b in self.entries:
            if k not in (2, 4, 6) or abs(q) > k:
                raise ConfigError(f"invalid crystal-field index k={k}, q={q}")
            if q == 0 and abs(b.imag) > tol:
                raise ConfigError(f"B^{k}_0 must be real, got {b}")
            out[(k, q)] = b
        for (k, q), b in list(out.items()):
            partner = (-1) ** q * np.conj(b)
            if (k, -q) in out:
                if abs(out[(k, -q)] - partner) > tol * max(1.0, abs(b)):
                    raise ConfigError(
                        f"B^{k}_{-q} = {out[(k, -q)]} violates B^k_-q = (-1)^q conj(B^k_q) "
                        f"with B^{k}_{q} = {b}"
                    )
            else:
                out[(k, -q)] = complex(partner)
        return out


@dataclass(frozen=True)
class IonSpec:
    manifolds: Tuple[Manifold, ...]
    cf_params: CrystalFieldParams
    rmes: Tuple[ReducedMatrixElement, ...]
    moment_mode: str = "lande"
    name: str = ""
    transition: Tuple[str, ...] = ()  # (ground manifold, excited manifold)

    def __post_init__(self):
        labels = [m.label for m in self.manifolds]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate manifold labels in {labels}")
        if not self.manifolds:
            raise ConfigError("an ion needs at least one manifold")
        if self.moment_mode not in MOMENT_MODES:
            raise ConfigError(f"moment_mode must be one of {MOMENT_MODES}, got {self.moment_mode!r}")
        for r in self.rmes:
            for lab in (r.bra_manifold, r.ket_manifold):
                if lab not in labels:
                    raise ConfigError(f"reduced matrix element refers to unknown manifold {lab!r}")
        for lab in self.transition:
            if lab not in labels:
                raise ConfigError(f"transition refers to unknown manifold {lab!r}")
        if self.transition and len(self.transition) != 2:
            raise ConfigError("transition must name exactly two manifolds")

    @property
    def ground_manifold(self) -> str:
        return self.transition[0] if self.transition else self.manifolds[0].label

    @property
    def excited_manifold(self) -> str:
        if self.transition:
            return self.transition[1]
        if len(self.manifolds) < 2:
            raise ContractError("ion has a single manifold; no optical transition defined")
        return self.manifolds[1].label

    def manifold(self, label: str) -> Manifold:
        for m in self.manifolds:
            if m.label == label:
                return m
        raise KeyError(label)

    @property
    def dimension(self) -> int:
        return sum(m.dimension for m in self.manifolds)

    def basis(self) -> List[BasisState]:
        return [s for m in self.manifolds for s in m.states()]

    def slices(self) -> Dict[str, slice]:
        out, start = {}, 0
        for m in self.manifolds:
            out[m.label] = slice(start, start + m.dimension)
            start += m.dimension
        return out

    def with_cf(self, cf_params: CrystalFieldParams) -> "IonSpec":
        return IonSpec(self.manifolds, cf_params, self.rmes, self.moment_mode, self.name,
                       self.transition)


# ---------------------------------------------------------------------------
# operator construction

def _rme_table(spec: IonSpec) -> Dict[Tuple[str, str, int], float]:
    table: Dict[Tuple[str, str, int], float] = {}
    for r in spec.rmes:
        table[(r.bra_manifold, r.ket_manifold, r.k)] = r.value
    # fill the reverse direction from <B||C^k||A> = (-1)^(J_B - J_A) <A||C^k||B>
    for (a, b, k), v in list(table.items()):
        if a == b or (b, a, k) in table:
            continue
        ja, jb = spec.manifold(a).J.twice_value, spec.manifold(b).J.twice_value
        sign = -1 if ((jb - ja) // 2) % 2 else 1
        table[(b, a, k)] = sign * v
    return table


def _tensor_block(bra: Manifold, ket: Manifold, k: int, q: int, rme: float) -> np.ndarray:
    block = np.zeros((bra.dimension, ket.dimension), dtype=complex)
    jp, j = bra.J, ket.J
    for r, sp in enumerate(bra.states()):
        for c, s in enumerate(ket.states()):
            if sp.M.twice_value - s.M.twice_value != 2 * q:
                continue
            w = wigner3j(jp, k, j, HalfInt(-sp.M.twice_value), q, s.M)
            if w:
                phase = -1 if ((jp.twice_value - sp.M.twice_value) // 2) % 2 else 1
                block[r, c] = phase * w * rme
    return block


def unit_tensor_matrices(spec: IonSpec) -> Dict[Tuple[int, int], np.ndarray]:
    """Matrices of C^k_q over the full basis for every (k, q) with k in {2,4,6}.

    Diagonal manifold blocks are required whenever the triangle rule allows
    them (k <= 2J) and are checked lazily by :func:`build_crystal_field`;
    off-diagonal blocks exist only where the ion file lists a reduced element.
    """
    return _unit_tensors(spec.manifolds, spec.rmes)


@lru_cache(maxsize=32)
def _unit_tensors(manifolds, rmes):
    spec = IonSpec(manifolds, CrystalFieldParams(), rmes)
    table = _rme_table(spec)
    sl = spec.slices()
    dim = spec.dimension
    out = {}
    for k in (2, 4, 6):
        for q in range(-k, k + 1):
            mat = np.zeros((dim, dim), dtype=complex)
            for (a, b, kk), v in table.items():
                if kk != k or v == 0:
                    continue
                mat[sl[a], sl[b]] = _tensor_block(spec.manifold(a), spec.manifold(b), k, q, v)
            mat.setflags(write=False)
            out[(k, q)] = mat
    return out


def build_free_ion(spec: IonSpec) -> np.ndarray:
    """Diagonal matrix of manifold centroids (GHz)."""
    diag = np.concatenate([np.full(m.dimension, m.centroid * GHZ_PER_CM) for m in spec.manifolds])
    return np.diag(diag).astype(complex)


def _check_cf_coverage(spec: IonSpec, params: Dict[Tuple[int, int], complex]) -> None:
    ranks = {k for (k, q), b in params.items() if b != 0}
    present = {(r.bra_manifold, r.ket_manifold, r.k) for r in spec.rmes}
    for m in spec.manifolds:
        for k in sorted(ranks):
            if k <= m.J.twice_value and (m.label, m.label, k) not in present:
                raise ConfigError(
                    f"crystal field couples manifold pair ({m.label}, {m.label}) at rank {k} "
                    f"but no reduced matrix element is given"
                )


def build_crystal_field(spec: IonSpec) -> np.ndarray:
    """H_CF = sum_kq B^k_q C^k_q in GHz."""
    params = spec.cf_params.completed()
    _check_cf_coverage(spec, params)
    mats = unit_tensor_matrices(spec)
    h = np.zeros((spec.dimension, spec.dimension), dtype=complex)
    for kq, b in params.items():
        if b != 0:
            h += b * GHZ_PER_CM * mats[kq]
    return h


def _rank1_cartesian(spec: IonSpec, rme_of) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cartesian matrices of a rank-1 operator given its reduced elements."""
    sl = spec.slices()
    dim = spec.dimension
    comps = {}
    for q in (-1, 0, 1):
        mat = np.zeros((dim, dim), dtype=complex)
        for a in spec.manifolds:
            for b in spec.manifolds:
                v = rme_of(a, b)
                if v:
                    mat[sl[a.label], sl[b.label]] = _tensor_block(a, b, 1, q, v)
        comps[q] = mat
    return spherical_to_cartesian(comps[-1], comps[0], comps[1])


def moment_operators(spec: IonSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mu_a, mu_b, mu_c) in Bohr magnetons, mu = -(L + 2S)."""
    return _moment_operators(spec.manifolds, spec.moment_mode)


@lru_cache(maxsize=32)
def _moment_operators(manifolds, moment_mode):
    spec = IonSpec(manifolds, CrystalFieldParams(), (), moment_mode)
    if spec.moment_mode == "lande":
        sl = spec.slices()
        dim = spec.dimension
        ops = [np.zeros((dim, dim), dtype=complex) for _ in range(3)]
        for m in spec.manifolds:
            g = lande_g(m.L, m.S, m.J)
            for op, jop in zip(ops, angular_momentum_matrices(m.J)):
                op[sl[m.label], sl[m.label]] = -g * jop
    else:
        def rme(a: Manifold, b: Manifold) -> float:
            if a.L != b.L or a.S != b.S:
                return 0.0
            orb = angular_momentum_rme(a.L)
            spin = angular_momentum_rme(a.S)
            return (orbital_to_j_rme(a.L, a.J, b.L, b.J, a.S, 1, orb)
                    + 2 * spin_to_j_rme(a.L, a.J, b.J, a.S, 1, spin))
        ops = [-x for x in _rank1_cartesian(spec, rme)]
    for op in ops:
        op.setflags(write=False)
    return tuple(ops)


def build_zeeman(spec: IonSpec, b_total) -> np.ndarray:
    """H_Z' = -(B0 + B_MF) . mu in GHz; ``b_total`` is a 3-vector in Tesla."""
    b = np.asarray(b_total, dtype=float)
    mus = moment_operators(spec)
    return -MU_B_GHZ_PER_T * sum(bi * mu for bi, mu in zip(b, mus))


@lru_cache(maxsize=64)
def _field_free_part(spec: IonSpec) -> np.ndarray:
    h = build_free_ion(spec) + build_crystal_field(spec)
    h.setflags(write=False)
    return h


def build_hamiltonian(spec: IonSpec, b_total=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Full single-ion Hamiltonian (GHz) in a total field ``B0 + B_MF`` (Tesla)."""
    return _field_free_part(spec) + build_zeeman(spec, b_total)


# ---------------------------------------------------------------------------
# diagonalisation and symmetry labels

def gamma3_mask(basis: Sequence[BasisState]) -> np.ndarray:
    """Boolean mask of basis states in the M_J class that contains +1/2.

    Even-q crystal-field terms only connect M values differing by a multiple
    of 2, so the class is {M : 2M = 1 mod 4}.
    """
    return np.array([s.M.twice_value % 4 == 1 for s in basis])


def gamma3_weight(state: np.ndarray, basis: Sequence[BasisState]) -> float:
    v = np.asarray(state)
    return float(np.sum(np.abs(v[gamma3_mask(basis)]) ** 2))


def classify_irrep(state: np.ndarray, basis: Sequence[BasisState], tol: float = 1e-9) -> str:
    """Gamma3 if the +1/2 class carries more weight than its mirror, else Gamma4."""
    v = np.asarray(state)
    norm = float(np.vdot(v, v).real)
    w3 = gamma3_weight(v, basis) / norm
    w4 = 1.0 - w3
    if abs(w3 - w4) <= tol:
        raise AmbiguousIrrepError(
            f"state has equal Gamma3/Gamma4 weight ({w3:.6f}); irrep is undefined"
        )
    return GAMMA3 if w3 > w4 else GAMMA4


def irrep_label(state, basis, mixing_threshold: float = 0.0) -> str:
    """Like :func:`classify_irrep` but returns ``"mixed"`` instead of raising.

    A state also counts as mixed when its minority-class weight exceeds
    ``mixing_threshold`` (0 disables that test).
    """
    w3 = gamma3_weight(state, basis)
    try:
        label = classify_irrep(state, basis)
    except AmbiguousIrrepError:
        return MIXED
    if mixing_threshold > 0 and min(w3, 1 - w3) > mixing_threshold:
        return MIXED
    return label


@dataclass
class EigenSystem:
    energies: np.ndarray  # GHz, ascending, ground at 0
    states: np.ndarray  # columns are eigenvectors
    offset: float  # absolute energy of the ground state, GHz
    basis: Optional[List[BasisState]] = None
    degenerate_groups: List[Tuple[int, ...]] = field(default_factory=list)

    def gamma3_weights(self) -> np.ndarray:
        mask = gamma3_mask(self.basis)
        return np.sum(np.abs(self.states[mask, :]) ** 2, axis=0)

    def irreps(self, mixing_threshold: float = 0.0) -> List[str]:
        return [irrep_label(self.states[:, i], self.basis, mixing_threshold)
                for i in range(len(self.energies))]

    @property
    def doublets(self) -> List[Tuple[int, int]]:
        n = len(self.energies)
        return [(i, i + 1) for i in range(0, n - 1, 2)]


def _fix_phase(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v) - 1e-12 * np.arange(len(v))))
    return v * (abs(v[i]) / v[i])


def diagonalize(h: np.ndarray, basis: Optional[Sequence[BasisState]] = None,
                degeneracy_tol: float = 1e-6) -> EigenSystem:
    """Hermitian eigendecomposition with a deterministic gauge.

    Within each degenerate group the basis is rotated to diagonalise the
    projector onto the Gamma3 class (largest Gamma3 weight first), and every
    vector's largest component is made real and positive.
    """
    h = np.asarray(h, dtype=complex)
    scale = max(np.linalg.norm(h), 1.0)
    if np.linalg.norm(h - h.conj().T) > 1e-9 * scale:
        raise ContractError("matrix is not Hermitian")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    groups: List[Tuple[int, ...]] = []
    i = 0
    while i < len(w):
        j = i + 1
        while j < len(w) and w[j] - w[j - 1] <= degeneracy_tol:
            j += 1
        groups.append(tuple(range(i, j)))
        i = j
    if basis is not None:
        p3 = gamma3_mask(basis).astype(float)
        for g in groups:
            if len(g) < 2:
                continue
            sub = v[:, g]
            proj = sub.conj().T @ (p3[:, None] * sub)
            pw, pv = np.linalg.eigh((proj + proj.conj().T) / 2)
            v[:, g] = sub @ pv[:, ::-1]
    for c in range(v.shape[1]):
        v[:, c] = _fix_phase(v[:, c])
    offset = float(w[0])
    return EigenSystem(w - offset, v, offset, list(basis) if basis is not None else None,
                       [g for g in groups if len(g) > 1])


def solve_ion(spec: IonSpec, b_total=(0.0, 0.0, 0.0)) -> EigenSystem:
    return diagonalize(build_hamiltonian(spec, b_total), spec.basis())


def manifold_weights(es: EigenSystem, spec: IonSpec) -> Dict[str, np.ndarray]:
    return {label: np.sum(np.abs(es.states[s, :]) ** 2, axis=0)
            for label, s in spec.slices().items()}


def manifold_levels(es: EigenSystem, spec: IonSpec, label: str) -> List[int]:
    """Eigenstate indices whose dominant manifold is ``label``, ascending in energy."""
    weights = manifold_weights(es, spec)
    labels = list(weights)
    stacked = np.vstack([weights[l] for l in labels])
    dominant = np.argmax(stacked, axis=0)
    target = labels.index(label)
    return [i for i in range(len(es.energies)) if dominant[i] == target]


def lowest_doublet(es: EigenSystem, spec: IonSpec, label: str) -> Tuple[int, int]:
    """Indices of the lowest Kramers doublet of a manifold (Z1 or R1)."""
    levels = manifold_levels(es, spec, label)
    if len(levels) < 2:
        raise ContractError(f"manifold {label} has fewer than two levels")
    return levels[0], levels[1]


def symmetry_adapted_pair(v1: np.ndarray, v2: np.ndarray,
                          basis: Sequence[BasisState]) -> Tuple[np.ndarray, np.ndarray]:
    """Rotate a doublet to (Gamma3-like, Gamma4-like) states."""
    sub = np.column_stack([v1, v2])
    p3 = gamma3_mask(basis).astype(float)
    proj = sub.conj().T @ (p3[:, None] * sub)
    _, pv = np.linalg.eigh((proj + proj.conj().T) / 2)
    rot = sub @ pv[:, ::-1]
    return _fix_phase(rot[:, 0]), _fix_phase(rot[:, 1])


def doublet_g_factors(doublet: Tuple[np.ndarray, np.ndarray], spec: IonSpec,
                      energies: Optional[Tuple[float, float]] = None,
                      tol: float = 1e-6) -> Tuple[float, float, float]:
    """(g_a, g_b, g_c) magnitudes of a Kramers doublet.

    g_c comes from the diagonal moment element of the symmetry-adapted state,
    g_a and g_b from the off-diagonal elements between the two partners.
    """
    if energies is not None and abs(energies[0] - energies[1]) > tol:
        raise ContractError(
            f"states are not a degenerate doublet (splitting {abs(energies[0] - energies[1]):.3g} GHz)"
        )
    basis = spec.basis()
    psi, psibar = symmetry_adapted_pair(np.asarray(doublet[0]), np.asarray(doublet[1]), basis)
    mu_a, mu_b, mu_c = moment_operators(spec)
    g_c = 2 * abs(np.vdot(psi, mu_c @ psi))
    g_a = 2 * abs(np.vdot(psi, mu_a @ psibar))
    g_b = 2 * abs(np.vdot(psi, mu_b @ psibar))
    return float(g_a), float(g_b), float(g_c)


def ground_g_factors(spec: IonSpec, manifold: Optional[str] = None) -> Tuple[float, float, float]:
    """g-factors of the lowest zero-field doublet of a manifold (default: first manifold)."""
    label = manifold or spec.ground_manifold
    es = solve_ion(spec)
    i, j = lowest_doublet(es, spec, label)
    return doublet_g_factors((es.states[:, i], es.states[:, j]), spec,
                             energies=(es.energies[i], es.energies[j]))


def single_ion_lines(es: EigenSystem, ground_doublet: Tuple[int, int],
                     excited_doublet: Tuple[int, int],
                     mixing_threshold: float = 0.0) -> List[Tuple[float, str, str]]:
    """All four Z1 -> R1 level-pair frequencies with irrep labels.

    Ordered as (lower Z1 -> lower R1), (lower -> upper), (upper -> lower),
    (upper -> upper).
    """
    labels = es.irreps(mixing_threshold) if es.basis is not None else [MIXED] * len(es.energies)
    out = []
    for i in ground_doublet:
        for f in excited_doublet:
            out.append((float(es.energies[f] - es.energies[i]), labels[i], labels[f]))
    return out

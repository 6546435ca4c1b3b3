"""Exchange-coupled pair of ions on a truncated Z1 + R1 product space.

Each ion is first solved on its own (applied field plus its pair mean field)
and projected onto its four lowest relevant states: the Z1 doublet and the R1
doublet. The pair Hamiltonian is

    H = H1 x 1 + 1 x H2 - 2 sum_a J_aa mu1_a x mu2_a

on the 16 product states. A "two-Nd" line is a single-photon transition in
which one ion goes Z1 -> R1 while its partner flips inside its ground doublet.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractError
from .ion_model import MIXED, EigenSystem, IonSpec, diagonalize, irrep_label, moment_operators

# per-ion truncated states, in this order
ION_STATES = ("Z1-", "Z1+", "R1-", "R1+")
Z1_LOW, Z1_HIGH, R1_LOW, R1_HIGH = range(4)

FINAL_STATE_MODES = ("flip", "ee")

ASSIGNMENT_THRESHOLD = 0.5


@dataclass
class EffectiveIon:
    energies: np.ndarray  # 4 energies, GHz
    moment_ops: Tuple[np.ndarray, np.ndarray, np.ndarray]  # 4x4, mu_B
    irreps: Tuple[str, ...]
    states: Optional[np.ndarray] = None  # full-basis columns of the selected levels


@dataclass
class PairSystem:
    hamiltonian: np.ndarray
    eigen: EigenSystem
    block_labels: List[str]
    ion1: EffectiveIon
    ion2: EffectiveIon


@dataclass(frozen=True)
class PairLine:
    frequency: float  # GHz above the pair ground state
    polarisation: str
    allowed: bool
    initial_irrep: str
    final_irrep: str
    excited_member: str  # "1", "2" or "both"
    transition: str
    flagged: bool = False
    pair_kind: str = ""


def projector(es: EigenSystem, indices: Sequence[int]) -> np.ndarray:
    v = es.states[:, list(indices)]
    return v @ v.conj().T


def project_ion(es: EigenSystem, spec: IonSpec, doublets: Tuple[Tuple[int, int], Tuple[int, int]],
                mixing_threshold: float = 0.0) -> EffectiveIon:
    """Restrict an ion to its Z1 and R1 doublets (four eigenstates)."""
    (z0, z1), (r0, r1) = doublets
    idx = [z0, z1, r0, r1]
    if len(set(idx)) != 4:
        raise ContractError(f"doublet indices overlap: {doublets}")
    for a, b in doublets:
        if b != a + 1:
            raise ContractError(f"levels {a} and {b} are not an energy-adjacent doublet")
    v = es.states[:, idx]
    mus = tuple(v.conj().T @ mu @ v for mu in moment_operators(spec))
    labels = tuple(irrep_label(v[:, i], es.basis, mixing_threshold) for i in range(4))
    return EffectiveIon(np.asarray(es.energies[idx], dtype=float), mus, labels, v)


def product_irrep(a: str, b: str) -> str:
    """Gamma3 x Gamma4 = Gamma1, Gamma3 x Gamma3 = Gamma4 x Gamma4 = Gamma2."""
    if MIXED in (a, b):
        return MIXED
    if {a, b} == {"G3", "G4"}:
        return "G1"
    if a == b and a in ("G3", "G4"):
        return "G2"
    raise ValueError(f"cannot form a pair irrep from {a!r} and {b!r}")


def build_pair(ion1: EffectiveIon, ion2: EffectiveIon, j12: np.ndarray) -> PairSystem:
    """Assemble and diagonalise the 16-level pair Hamiltonian."""
    n1, n2 = len(ion1.energies), len(ion2.energies)
    if n1 != 4 or n2 != 4:
        raise ContractError(f"expected two 4-level ions, got {n1} and {n2}")
    j12 = np.asarray(j12, dtype=float)
    if j12.shape != (3, 3):
        raise ContractError("exchange tensor must be 3x3")
    if np.count_nonzero(j12 - np.diag(np.diag(j12))):
        raise ContractError("exchange tensor must be diagonal")
    eye = np.eye(4)
    h = np.kron(np.diag(ion1.energies), eye) + np.kron(eye, np.diag(ion2.energies))
    h = h.astype(complex)
    for a in range(3):
        if j12[a, a]:
            h -= 2 * j12[a, a] * np.kron(ion1.moment_ops[a], ion2.moment_ops[a])
    blocks = []
    for s1 in ION_STATES:
        for s2 in ION_STATES:
            blocks.append(("g" if s1.startswith("Z") else "e") + ("g" if s2.startswith("Z") else "e"))
    return PairSystem(h, diagonalize(h), blocks, ion1, ion2)


def _assign(weights: np.ndarray):
    """Dominant product state of a pair eigenvector, ordered then unordered."""
    w = weights.reshape(4, 4)
    a, b = np.unravel_index(int(np.argmax(w)), w.shape)
    if w[a, b] > ASSIGNMENT_THRESHOLD:
        return (int(a), int(b)), "ordered", float(w[a, b])
    sym = w + w.T - np.diag(np.diag(w))
    iu = np.triu_indices(4)
    k = int(np.argmax(sym[iu]))
    a, b = int(iu[0][k]), int(iu[1][k])
    if sym[a, b] > ASSIGNMENT_THRESHOLD:
        return (a, b), "unordered", float(sym[a, b])
    return (int(np.unravel_index(int(np.argmax(w)), w.shape)[0]),
            int(np.unravel_index(int(np.argmax(w)), w.shape)[1])), "ambiguous", float(w.max())


def two_nd_targets(ground: Tuple[int, int], mode: str = "flip") -> List[Tuple[int, int]]:
    """Ordered product states reached by a two-Nd line from ``ground``.

    ``flip``: one ion goes to either R1 level while the other moves to the
    opposite member of its Z1 doublet. ``ee``: both ions in R1.
    """
    if mode not in FINAL_STATE_MODES:
        raise ValueError(f"final-state mode must be one of {FINAL_STATE_MODES}, got {mode!r}")
    if mode == "ee":
        return [(a, b) for a in (R1_LOW, R1_HIGH) for b in (R1_LOW, R1_HIGH)]
    g1, g2 = ground
    out = []
    for r in (R1_LOW, R1_HIGH):
        out.append((r, 1 - g2))
        out.append((1 - g1, r))
    return out


def two_nd_lines(ps: PairSystem, polarisations=("pi", "sigma"), pair_kind: str = "",
                 mode: str = "flip", approximate: bool = False) -> List[PairLine]:
    """Two-ion lines out of the pair ground state, labelled by product irreps.

    Every final eigenstate whose dominant product state is a target is
    reported. Assignment falls back to the unordered product class when exchange
    mixes the two ion orderings; below 50% dominance the line is flagged.
    """
    from .spectroscopy import selection_rule  # avoid an import cycle at module load

    es = ps.eigen
    weights = np.abs(es.states) ** 2
    ground, how, _ = _assign(weights[:, 0])
    if how == "ambiguous":
        raise ContractError("pair ground state has no dominant product state")
    if ground[0] > Z1_HIGH or ground[1] > Z1_HIGH:
        raise ContractError(f"pair ground state {ground} is not in the gg block")
    g1, g2 = ground
    targets = set(two_nd_targets(ground, mode))
    initial = product_irrep(ps.ion1.irreps[g1], ps.ion2.irreps[g2])
    out: List[PairLine] = []
    for n in range(1, len(es.energies)):
        (a, b), how, _ = _assign(weights[:, n])
        if (a, b) not in targets:
            # an unordered assignment only fixes the pair of ion states, not who holds which
            if how == "ordered" or (b, a) not in targets:
                continue
            a, b = b, a
        if mode == "ee":
            member = "both"
        elif how == "ordered":
            member = "1" if a >= R1_LOW else "2"
        else:
            member = "both"
        final = product_irrep(ps.ion1.irreps[a], ps.ion2.irreps[b])
        label = f"{ION_STATES[g1]}{ION_STATES[g2]}->{ION_STATES[a]}{ION_STATES[b]}"
        flagged = how == "ambiguous"
        for pol in polarisations:
            if MIXED in (initial, final):
                allowed = True
            else:
                allowed = selection_rule(initial, final) == pol
            out.append(PairLine(float(es.energies[n]), pol, allowed, initial, final, member, label,
                                flagged=flagged or approximate, pair_kind=pair_kind))
    return out

"""Magnetic structure, exchange constants and mean fields of the Nd lattice.

Each Nd ion has four in-plane (ab-plane) nearest neighbours coupled by
J_perp and two out-of-plane neighbours coupled by J_par. In the zero-field
c_z structure in-plane neighbours are antiparallel and out-of-plane ones
parallel. Moments are saturated (T = 0): <mu> = +-(g/2) mu_B along the
ordering or field axis.

Exchange constants are in Kelvin (J/k_B); mean fields come out in Tesla.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .constants import K_B_GHZ_PER_K, K_B_OVER_MU_B, MU_B_GHZ_PER_T
from .errors import ConfigError, UnmodeledPhaseError

Z_HAT = np.array([0.0, 0.0, 1.0])
Y_HAT = np.array([0.0, 1.0, 0.0])

IN_PLANE = "in_plane"
OUT_OF_PLANE = "out_of_plane"
PAIR_KINDS = (IN_PLANE, OUT_OF_PLANE)

# bonds per ion
N_IN_PLANE = 4
N_OUT_OF_PLANE = 2


class Phase(str, enum.Enum):
    AFM = "AFM"
    INTERMEDIATE = "Intermediate"
    PM = "PM"


AXIS_VECTORS = {"c": Z_HAT, "b": Y_HAT}


@dataclass(frozen=True)
class ExchangeConstants:
    """Nearest-neighbour exchange of the effective spin-1/2 model, in K.

    ``J_par``/``J_perp`` are the Ising (c-axis) parts for out-of-plane and
    in-plane bonds; the ``_p`` variants are the transverse parts.
    """

    J_par: float = 0.07
    J_perp: float = -0.65
    J_par_p: float = -0.1
    J_perp_p: float = -0.1


@dataclass(frozen=True)
class SublatticeConfig:
    phase: Phase
    moments: Tuple[Tuple[float, float, float], Tuple[float, float, float]]
    field_axis: str


def _check_modeled(phase) -> Phase:
    phase = Phase(phase)
    if phase is Phase.INTERMEDIATE:
        raise UnmodeledPhaseError("the intermediate phase has no magnetic-structure model")
    return phase


def _sign(phase: Phase) -> int:
    # upper sign (AFM) is minus, lower (PM) is plus
    return -1 if phase is Phase.AFM else 1


def mean_field_single(xc: ExchangeConstants, phase, sublattice: int, g_c: float) -> np.ndarray:
    """Mean field on a single ion for the field along c, in Tesla.

    B_MF = (2 J_par -+ 4 J_perp) k_B / (mu_B g_c) z, with sublattice 2
    reversed in the antiferromagnetic phase.
    """
    phase = _check_modeled(phase)
    if sublattice not in (1, 2):
        raise ValueError(f"sublattice must be 1 or 2, got {sublattice}")
    if g_c == 0:
        return np.zeros(3)
    mag = (2 * xc.J_par + _sign(phase) * 4 * xc.J_perp) * K_B_OVER_MU_B / g_c
    if phase is Phase.AFM and sublattice == 2:
        mag = -mag
    return mag * Z_HAT


def mean_field_pair_member(xc: ExchangeConstants, pair_kind: str, phase, member: int,
                           g_c: float, sublattice: int = 1) -> np.ndarray:
    """Mean field on one member of a nearest-neighbour pair (partner excluded).

    In-plane pairs have member 1 on sublattice 1 and member 2 on sublattice 2.
    Out-of-plane pairs sit on one sublattice (``sublattice``); both members
    see the same field.
    """
    phase = _check_modeled(phase)
    if member not in (1, 2):
        raise ValueError(f"member must be 1 or 2, got {member}")
    if g_c == 0:
        return np.zeros(3)
    s = _sign(phase)
    if pair_kind == IN_PLANE:
        mag = (2 * xc.J_par + s * 3 * xc.J_perp) * K_B_OVER_MU_B / g_c
        if phase is Phase.AFM and member == 2:
            mag = -mag
    elif pair_kind == OUT_OF_PLANE:
        mag = (xc.J_par + s * 4 * xc.J_perp) * K_B_OVER_MU_B / g_c
        if phase is Phase.AFM and sublattice == 2:
            mag = -mag
    else:
        raise ValueError(f"unknown pair kind {pair_kind!r}")
    return mag * Z_HAT


def mean_field_b_axis_pm(xc: ExchangeConstants, g_b: float) -> np.ndarray:
    """Pair-member mean field in the paramagnetic phase with the field along b.

    Five of the six neighbours remain once the partner is excluded; the
    transverse constants are taken equal, so 5 J_perp' k_B / (g_b mu_B) y.
    """
    if g_b == 0:
        return np.zeros(3)
    return 5 * xc.J_perp_p * K_B_OVER_MU_B / g_b * Y_HAT


def mean_field_single_b_axis_pm(xc: ExchangeConstants, g_b: float) -> np.ndarray:
    """Single-ion mean field in the paramagnetic phase with the field along b (all six bonds)."""
    if g_b == 0:
        return np.zeros(3)
    return (N_IN_PLANE * xc.J_perp_p + N_OUT_OF_PLANE * xc.J_par_p) * K_B_OVER_MU_B / g_b * Y_HAT


def exchange_tensor(xc: ExchangeConstants, kind: str, g: Sequence[float]) -> np.ndarray:
    """Diagonal exchange tensor in GHz per mu_B^2 for a moment-moment coupling."""
    if kind == IN_PLANE:
        jz, jt = xc.J_perp, xc.J_perp_p
    elif kind == OUT_OF_PLANE:
        jz, jt = xc.J_par, xc.J_par_p
    else:
        raise ValueError(f"unknown pair kind {kind!r}")
    g_a, g_b, g_c = (float(x) for x in g)
    if min(g_a, g_b, g_c) <= 0:
        raise ConfigError(f"exchange tensor needs positive g-factors, got {tuple(g)}")
    return K_B_GHZ_PER_K * np.diag([jt / g_a ** 2, jt / g_b ** 2, jz / g_c ** 2])


def sublattice_moments(phase, field_axis: str, g: Sequence[float]) -> SublatticeConfig:
    """Saturated sublattice moments in mu_B.

    AFM gives the c_z structure whatever the field axis; the canting expected
    for a field along b has no model here.
    """
    phase = _check_modeled(phase)
    g_a, g_b, g_c = (float(x) for x in g)
    if field_axis not in AXIS_VECTORS:
        raise ValueError(f"field axis must be 'c' or 'b', got {field_axis!r}")
    if phase is Phase.AFM:
        m = tuple(g_c / 2 * Z_HAT)
        moments = (m, tuple(-x for x in m))
    elif field_axis == "c":
        m = tuple(g_c / 2 * Z_HAT)
        moments = (m, m)
    else:
        m = tuple(g_b / 2 * Y_HAT)
        moments = (m, m)
    moments = tuple(tuple(float(x) + 0.0 for x in v) for v in moments)
    return SublatticeConfig(phase, moments, field_axis)


def mean_field_from_neighbors(neighbors: Sequence[Tuple[Sequence[float], np.ndarray]]) -> np.ndarray:
    """B_MF = 2 sum_j <mu_j> . J_j, from explicit (moment, tensor) neighbours, in Tesla."""
    total = np.zeros(3)
    for moment, tensor in neighbors:
        total += 2 * np.asarray(moment, dtype=float) @ np.asarray(tensor)
    return total / MU_B_GHZ_PER_T


# ---------------------------------------------------------------------------
# classical energy of the effective spin-1/2 model on the 4-site cell
#
# sites 0, 1 share an ab plane, as do 2, 3; 0-2 and 1-3 are out-of-plane
# neighbours. Each site has its 4 in-plane neighbours on the partner site of
# its plane and its 2 out-of-plane neighbours on the site above/below.

_IN_PLANE_BONDS = ((0, 1), (2, 3))
_OUT_OF_PLANE_BONDS = ((0, 2), (1, 3))


def _bond_energy(si, sj, jz, jt) -> float:
    return -2 * (jz * si[2] * sj[2] + jt * (si[0] * sj[0] + si[1] * sj[1]))


def classical_energy_per_ion(spins: Sequence[Sequence[float]], xc: ExchangeConstants) -> float:
    """Energy per ion (K) of classical spin vectors (|S| = 1/2) on the 4-site cell."""
    s = [np.asarray(x, dtype=float) for x in spins]
    e = 0.0
    # each in-plane site pair stands for N_IN_PLANE bonds per site, i.e. 2 bonds per ion
    for i, j in _IN_PLANE_BONDS:
        e += N_IN_PLANE * _bond_energy(s[i], s[j], xc.J_perp, xc.J_perp_p)
    for i, j in _OUT_OF_PLANE_BONDS:
        e += N_OUT_OF_PLANE * _bond_energy(s[i], s[j], xc.J_par, xc.J_par_p)
    return e / 4


def ising_ground_configuration(xc: ExchangeConstants) -> Tuple[Tuple[int, ...], float]:
    """Brute-force lowest-energy Ising configuration of the 4-site cell."""
    best = None
    for signs in itertools.product((1, -1), repeat=4):
        spins = [(0.0, 0.0, 0.5 * s) for s in signs]
        e = classical_energy_per_ion(spins, xc)
        if best is None or e < best[1] - 1e-12:
            best = (signs, e)
    return best


def c_z_configuration() -> Dict[str, Tuple[Tuple[float, float, float], ...]]:
    up, down = (0.0, 0.0, 0.5), (0.0, 0.0, -0.5)
    return {"c_z": (up, down, up, down), "ferro": (up, up, up, up)}

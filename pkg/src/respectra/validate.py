"""Built-in invariant checks run by ``respectra validate``.

Each check returns ``(ok, detail)``. The suite is deterministic (fixed seed)
and takes a few seconds.
"""

from __future__ import annotations

import itertools
from typing import Callable, List, Tuple

import numpy as np

from .angular_momentum import HalfInt, angular_momentum_matrices, wigner3j, wigner6j
from .constants import MU_B_GHZ_PER_T
from .ion_model import (
    CrystalFieldParams, IonSpec, build_hamiltonian, build_zeeman, diagonalize, ground_g_factors,
    lowest_doublet, solve_ion,
)
from .magnetic_lattice import (
    IN_PLANE, ExchangeConstants, Phase, c_z_configuration, classical_energy_per_ion,
    mean_field_pair_member, mean_field_single,
)
from .pair_model import EffectiveIon, build_pair
from .spectroscopy import MIXED, SweepConfig, line_list, selection_rule

Check = Callable[[IonSpec, ExchangeConstants], Tuple[bool, str]]


def random_cf(rng: np.random.Generator, scale: float = 500.0) -> CrystalFieldParams:
    """Random Hermiticity-respecting B^k_q set (cm^-1) with all k, q >= 0."""
    d = {}
    for k in (2, 4, 6):
        for q in range(0, k + 1):
            re_, im = rng.normal(0, scale, 2)
            d[(k, q)] = complex(re_, 0.0 if q == 0 else im)
    return CrystalFieldParams.from_dict(d)


def check_wigner(spec, xc):
    worst = 0.0
    for j1, j2, j3 in itertools.product(range(0, 5), repeat=3):
        if not (abs(j1 - j2) <= j3 <= j1 + j2):
            continue
        for m3 in range(-j3, j3 + 1):
            s = sum((2 * j3 + 1) * wigner3j(j1, j2, j3, m1, -m1 - m3, m3) ** 2
                    for m1 in range(-j1, j1 + 1) if abs(m1 + m3) <= j2)
            worst = max(worst, abs(s - 1))
    closed = (abs(wigner3j(1, 1, 0, 0, 0, 0) + 1 / np.sqrt(3)) < 1e-15
              and wigner3j(1, 2, 4, 0, 0, 0) == 0
              and abs(wigner6j(1, 1, 1, 0, 1, 1) + 1 / 3) < 1e-15
              and abs(wigner6j(1, 1, 1, 1, 1, 1) - 1 / 6) < 1e-15)
    return worst < 1e-12 and closed, f"max orthogonality error {worst:.2e}"


def check_angular_momentum(spec, xc):
    worst = 0.0
    for twice in range(0, 10):
        j = HalfInt(twice)
        jx, jy, jz = angular_momentum_matrices(j)
        worst = max(worst, np.abs(jx @ jy - jy @ jx - 1j * jz).max())
    return worst < 1e-12, f"max commutator error {worst:.2e}"


def check_kramers(spec, xc, n: int = 20):
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(n):
        es = solve_ion(spec.with_cf(random_cf(rng)))
        e = es.energies
        worst = max(worst, float(np.max(np.abs(e[1::2] - e[0::2]))))
    return worst < 1e-6, f"max doublet splitting {worst:.2e} GHz"


def check_hermitian(spec, xc):
    h = build_hamiltonian(spec, (0.3, -0.2, 1.1))
    err = np.abs(h - h.conj().T).max() / max(1.0, np.abs(h).max())
    return err < 1e-12, f"relative anti-Hermitian part {err:.2e}"


def check_zeeman_linearity(spec, xc):
    b = np.array([0.2, -0.7, 0.4])
    err = np.abs(build_zeeman(spec, 3 * b) - 3 * build_zeeman(spec, b)).max()
    return err < 1e-9, f"max deviation {err:.2e} GHz"


def check_small_field_slopes(spec, xc):
    g = ground_g_factors(spec)
    b = 1e-3
    worst = 0.0
    for axis in range(3):
        if g[axis] < 1e-6:
            continue
        vec = np.zeros(3)
        vec[axis] = b
        es = solve_ion(spec, vec)
        i, j = lowest_doublet(es, spec, spec.ground_manifold)
        split = es.energies[j] - es.energies[i]
        expected = g[axis] * MU_B_GHZ_PER_T * b
        worst = max(worst, abs(split - expected) / expected)
    return worst < 1e-3, f"max relative slope error {worst:.2e}"


def check_decoupled_pair(spec, xc, n: int = 10):
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(n):
        ions = []
        for _ in range(2):
            e = np.sort(rng.uniform(0, 100, 4))
            mus = []
            for _ in range(3):
                a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
                mus.append((a + a.conj().T) / 2)
            ions.append(EffectiveIon(e, tuple(mus), ("G3", "G4", "G3", "G4")))
        ps = build_pair(ions[0], ions[1], np.zeros((3, 3)))
        sums = np.sort((ions[0].energies[:, None] + ions[1].energies[None, :]).ravel())
        worst = max(worst, np.abs((ps.eigen.energies + ps.eigen.offset) - sums).max())
    return worst < 1e-9, f"max eigenvalue deviation {worst:.2e} GHz"


def check_mean_field_identity(spec, xc):
    from .constants import K_B_OVER_MU_B
    worst = 0.0
    for phase, sign in ((Phase.AFM, -1), (Phase.PM, 1)):
        single = mean_field_single(xc, phase, 1, 2.0)
        pair = mean_field_pair_member(xc, IN_PLANE, phase, 1, 2.0)
        bond = sign * xc.J_perp * K_B_OVER_MU_B / 2.0
        worst = max(worst, abs(single[2] - pair[2] - bond))
    return worst < 1e-12, f"max deviation {worst:.2e} T"


def check_ground_structure(spec, xc):
    cfgs = c_z_configuration()
    e_cz = classical_energy_per_ion(cfgs["c_z"], xc)
    e_fm = classical_energy_per_ion(cfgs["ferro"], xc)
    return e_cz < e_fm, f"E(c_z) = {e_cz:.4f} K, E(ferro) = {e_fm:.4f} K"


def check_selection_table(spec, xc):
    table = {("G3", "G3"): "sigma", ("G4", "G4"): "sigma", ("G3", "G4"): "pi", ("G4", "G3"): "pi",
             ("G1", "G1"): "sigma", ("G2", "G2"): "sigma", ("G1", "G2"): "pi", ("G2", "G1"): "pi"}
    bad = [k for k, v in table.items() if selection_rule(*k) != v]
    return not bad, f"{len(table) - len(bad)}/8 rows reproduced"


def check_line_consistency(spec, xc):
    bad = 0
    total = 0
    for axis, fields in (("c", (0.0, 0.5, 3.0)), ("b", (0.0, 1.0, 2.0))):
        cfg = SweepConfig(field_axis=axis)
        for b in fields:
            for l in line_list(b, cfg, spec, xc):
                total += 1
                if MIXED in (l.initial_irrep, l.final_irrep):
                    ok = l.allowed
                else:
                    ok = l.allowed == (selection_rule(l.initial_irrep, l.final_irrep) == l.polarisation)
                bad += not ok
    return bad == 0, f"{bad} inconsistent of {total} lines"


CHECKS: List[Tuple[str, Check]] = [
    ("wigner_symbols", check_wigner),
    ("angular_momentum_commutators", check_angular_momentum),
    ("kramers_degeneracy", check_kramers),
    ("hamiltonian_hermitian", check_hermitian),
    ("zeeman_linearity", check_zeeman_linearity),
    ("small_field_g_factors", check_small_field_slopes),
    ("decoupled_pair", check_decoupled_pair),
    ("mean_field_bond_identity", check_mean_field_identity),
    ("c_z_below_ferro", check_ground_structure),
    ("selection_rule_table", check_selection_table),
    ("line_selection_consistency", check_line_consistency),
]


def run_checks(spec: IonSpec, xc: ExchangeConstants) -> List[Tuple[str, bool, str]]:
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn(spec, xc)
        except Exception as exc:  # report, do not abort the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from respectra.angular_momentum import BasisState, HalfInt, ReducedMatrixElement, lande_g
from respectra.constants import GHZ_PER_CM, MU_B_GHZ_PER_T
from respectra.errors import AmbiguousIrrepError, ConfigError, ContractError
from respectra.ion_model import (
    GAMMA3, GAMMA4, MIXED, CrystalFieldParams, IonSpec, Manifold, build_crystal_field,
    build_free_ion, build_hamiltonian, build_zeeman, classify_irrep, diagonalize,
    doublet_g_factors, gamma3_mask, ground_g_factors, irrep_label, lowest_doublet,
    manifold_levels, moment_operators, single_ion_lines, solve_ion,
)
from respectra.validate import random_cf

from oracles import f3_orbital_rmes, stevens_o

I92 = Manifold("4I9/2", 6, "3/2", "9/2", 0.0)
F32 = Manifold("4F3/2", 3, "3/2", "3/2", 11390.0)

# Stevens factors of 4I9/2 (f^3): alpha, beta, gamma
STEVENS = {2: -7 / 1089, 4: -136 / 467181, 6: -1615 / 42513471}
LAMBDA = {2: 1 / 2, 4: 1 / 8, 6: 1 / 16}


def single(manifold, cf=None, rmes=(), mode="lande"):
    return IonSpec((manifold,), cf or CrystalFieldParams(), tuple(rmes), mode)


def test_free_ion_blocks(spec):
    assert np.all(build_free_ion(single(I92)) == 0)
    h = build_free_ion(spec)
    d = np.diag(h).real
    assert np.all(d[:10] == 0)
    assert np.allclose(d[10:], 11390 * 29.9792458)
    assert np.trace(h).real == pytest.approx(4 * 11390 * GHZ_PER_CM)


def test_zero_crystal_field(spec):
    h = build_crystal_field(spec.with_cf(CrystalFieldParams()))
    assert np.all(h == 0)


def test_b20_on_j32_hand_values():
    # <3/2 M|C^2_0|3/2 M> = (3M^2 - 15/4)/sqrt(180) * rme; with rme = 0.8/sqrt(5) this is +-0.08
    rme = 0.8 / np.sqrt(5)
    s = single(Manifold("F", 3, "3/2", "3/2", 0.0), CrystalFieldParams.from_dict({(2, 0): 100.0}),
               [ReducedMatrixElement("F", "F", 2, rme)])
    h = build_crystal_field(s)
    expected = 100.0 * GHZ_PER_CM * np.array([0.08, -0.08, -0.08, 0.08])
    assert np.allclose(np.diag(h).real, expected, atol=1e-10)
    assert np.allclose(h - np.diag(np.diag(h)), 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_crystal_field_hermitian(spec, seed):
    h = build_crystal_field(spec.with_cf(random_cf(np.random.default_rng(seed))))
    assert np.abs(h - h.conj().T).max() <= 1e-12 * np.abs(h).max()


def test_crystal_field_parameter_errors(spec):
    with pytest.raises(ConfigError):
        CrystalFieldParams.from_dict({(2, 0): 1 + 1j}).completed()
    with pytest.raises(ConfigError):
        CrystalFieldParams.from_dict({(3, 0): 1.0}).completed()
    with pytest.raises(ConfigError):
        CrystalFieldParams.from_dict({(2, 3): 1.0}).completed()
    with pytest.raises(ConfigError):
        CrystalFieldParams.from_dict({(2, 2): 1 + 2j, (2, -2): 1 + 2j}).completed()
    full = CrystalFieldParams.from_dict({(4, 3): 1 + 2j}).completed()
    assert full[(4, -3)] == -(1 - 2j)


def test_missing_rme_names_manifold_pair(spec):
    rmes = tuple(r for r in spec.rmes if not (r.bra_manifold == "4I9/2" and r.k == 6))
    broken = IonSpec(spec.manifolds, spec.cf_params, rmes)
    with pytest.raises(ConfigError, match=r"4I9/2, 4I9/2"):
        build_crystal_field(broken)
    # rank 4 never couples inside J = 3/2, so no element is needed there
    assert all(not (r.bra_manifold == "4F3/2" and r.k == 4) for r in spec.rmes)


def test_ion_spec_validation():
    with pytest.raises(ConfigError):
        IonSpec((I92, I92), CrystalFieldParams(), ())
    with pytest.raises(ConfigError):
        IonSpec((I92,), CrystalFieldParams(), (ReducedMatrixElement("X", "X", 2, 1.0),))
    with pytest.raises(ConfigError):
        IonSpec((I92,), CrystalFieldParams(), (), moment_mode="bogus")
    with pytest.raises(ConfigError):
        Manifold("x", 1, 1, 1, -5.0)


def test_orbital_rmes_match_determinant_oracle(spec):
    from respectra.angular_momentum import orbital_to_j_rme

    orb = f3_orbital_rmes()
    table = {(r.bra_manifold, r.k): r.value for r in spec.rmes}
    for (label, L, J), ks in ((("4I9/2", 6, 4.5)), (2, 4, 6)), ((("4F3/2", 3, 1.5)), (2,)):
        for k in ks:
            expected = orbital_to_j_rme(L, J, L, J, 1.5, k, orb[(L, k)])
            assert table[(label, k)] == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("k", [2, 4, 6])
def test_stevens_equivalence(spec, k):
    # a lone B^k_0 on 4I9/2 acts as theta_k lambda_k O_k^0
    rmes = tuple(r for r in spec.rmes if r.bra_manifold == "4I9/2")
    s = single(I92, CrystalFieldParams.from_dict({(k, 0): 1.0}), rmes)
    h = build_crystal_field(s) / GHZ_PER_CM
    assert np.allclose(np.diag(h).real, STEVENS[k] * LAMBDA[k] * stevens_o(k, 4.5), atol=1e-12)


def test_zeeman_lande_diagonal():
    h = build_zeeman(single(I92), (0.0, 0.0, 1.0))
    m = 4.5 - np.arange(10)
    # mu = -g_J mu_B J, so H = -B.mu = +g_J mu_B B M
    assert np.allclose(np.diag(h).real, m * (8 / 11) * 13.9962449, atol=1e-12)
    assert np.all(build_zeeman(single(I92), (0, 0, 0)) == 0)


def test_zeeman_linear_and_hermitian(spec):
    b = np.array([0.3, -1.2, 0.7])
    h1 = build_zeeman(spec, b)
    assert np.abs(build_zeeman(spec, 2.5 * b) - 2.5 * h1).max() <= 1e-12 * np.abs(h1).max()
    assert np.allclose(h1, h1.conj().T, atol=1e-12)


def test_zeeman_rotation_invariance():
    # a field along x has the same spectrum as the same field along z
    s = single(I92)
    ex = np.linalg.eigvalsh(build_zeeman(s, (0.8, 0, 0)))
    ez = np.linalg.eigvalsh(build_zeeman(s, (0, 0, 0.8)))
    ey = np.linalg.eigvalsh(build_zeeman(s, (0, 0.8, 0)))
    assert np.allclose(ex, ez, atol=1e-10) and np.allclose(ey, ez, atol=1e-10)


def test_exact_ls_matches_lande_inside_one_multiplet(spec):
    exact = IonSpec(spec.manifolds, spec.cf_params, spec.rmes, "exact_LS")
    for a, b in zip(moment_operators(spec), moment_operators(exact)):
        assert np.allclose(a, b, atol=1e-12)


def test_exact_ls_full_term_spectrum():
    # over all J of a term, mu_z has eigenvalues -(M_L + 2 M_S)
    mans = tuple(Manifold(f"4I{j}/2", 6, "3/2", f"{j}/2", 0.0) for j in (9, 11, 13, 15))
    s = IonSpec(mans, CrystalFieldParams(), (), "exact_LS")
    mu_a, mu_b, mu_c = moment_operators(s)
    expected = sorted(-(ml + 2 * ms) for ml in range(-6, 7) for ms in (-1.5, -0.5, 0.5, 1.5))
    assert np.allclose(np.linalg.eigvalsh(mu_c), expected, atol=1e-10)
    assert np.allclose(np.linalg.eigvalsh(mu_a), expected, atol=1e-10)
    # the Lande approximation drops the J-mixing blocks
    lande = moment_operators(IonSpec(mans, CrystalFieldParams(), (), "lande"))[2]
    assert not np.allclose(np.linalg.eigvalsh(lande), expected, atol=1e-3)


def test_diagonalize_two_level():
    a = 3 - 4j
    es = diagonalize(np.array([[0, a], [np.conj(a), 0]]))
    assert np.allclose(es.energies, [0, 10])
    assert es.offset == pytest.approx(-5)


def test_diagonalize_diagonal_input():
    es = diagonalize(np.diag([1.0, 5.0, 3.0]))
    assert np.allclose(es.energies, [0, 2, 4])
    assert np.allclose(np.abs(es.states), np.eye(3)[:, [0, 2, 1]])


def test_diagonalize_random_reconstruction():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = rng.normal(size=(14, 14)) + 1j * rng.normal(size=(14, 14))
        h = (a + a.conj().T) * 100
        es = diagonalize(h)
        v, e = es.states, es.energies + es.offset
        assert np.abs(h @ v - v * e).max() <= 1e-9 * np.linalg.norm(h)
        assert np.abs(v.conj().T @ v - np.eye(14)).max() <= 1e-10
        assert np.linalg.norm(v @ np.diag(e) @ v.conj().T - h) <= 1e-9 * np.linalg.norm(h)
        assert np.all(np.diff(es.energies) >= 0) and es.energies[0] == 0


def test_diagonalize_rejects_non_hermitian():
    with pytest.raises(ContractError):
        diagonalize(np.array([[0, 1], [2, 0]]))


def _vec(components):
    basis = I92.states()
    v = np.zeros(10, complex)
    for m, c in components.items():
        v[[s.M for s in basis].index(HalfInt.of(m))] = c
    return v, basis


def test_classify_irrep_examples():
    v, basis = _vec({"1/2": 1})
    assert classify_irrep(v, basis) == GAMMA3
    v, basis = _vec({"-1/2": 1})
    assert classify_irrep(v, basis) == GAMMA4
    v, basis = _vec({"1/2": 0.6, "-3/2": 0.8j})
    assert classify_irrep(v, basis) == GAMMA3
    v, basis = _vec({"1/2": 1, "-1/2": 1})
    with pytest.raises(AmbiguousIrrepError):
        classify_irrep(v / np.sqrt(2), basis)
    assert irrep_label(v / np.sqrt(2), basis) == MIXED
    v, basis = _vec({"1/2": np.sqrt(0.7), "-1/2": np.sqrt(0.3)})
    assert irrep_label(v, basis, 0.25) == MIXED
    assert irrep_label(v, basis, 0.0) == GAMMA3


def test_gamma3_class_is_closed_under_even_q():
    mask = gamma3_mask(I92.states())
    ms = [s.M.twice_value for s in I92.states()]
    assert [m for m, x in zip(ms, mask) if x] == [9, 5, 1, -3, -7]


def test_doublet_g_factors_pure_states():
    s = single(I92)
    v9, _ = _vec({"9/2": 1})
    vm9, _ = _vec({"-9/2": 1})
    g = doublet_g_factors((v9, vm9), s, energies=(0.0, 0.0))
    assert g == pytest.approx((0.0, 0.0, 72 / 11), abs=1e-12)
    v1, _ = _vec({"1/2": 1})
    vm1, _ = _vec({"-1/2": 1})
    # <1/2|J_x|-1/2> = (J + 1/2)/2, so g_perp = g_J (2J + 1)
    g = doublet_g_factors((v1, vm1), s)
    assert g == pytest.approx((40 / 11, 40 / 11, 8 / 11), abs=1e-12)


def test_doublet_g_factors_free_spin():
    s = single(Manifold("S", 0, "1/2", "1/2", 0.0))
    basis = s.basis()
    g = doublet_g_factors((np.array([1, 0]), np.array([0, 1])), s)
    assert g == pytest.approx((2.0, 2.0, 2.0))
    assert basis[0].M == HalfInt(1)


def test_doublet_g_factors_rejects_split_pair(spec):
    es = solve_ion(spec, (0, 0, 0.5))
    i, j = lowest_doublet(es, spec, "4I9/2")
    with pytest.raises(ContractError):
        doublet_g_factors((es.states[:, i], es.states[:, j]), spec,
                          energies=(es.energies[i], es.energies[j]))


def test_kramers_and_time_reversal_pairing(spec):
    rng = np.random.default_rng(11)
    for _ in range(10):
        s = spec.with_cf(random_cf(rng))
        es = solve_ion(s)
        e = es.energies
        assert np.max(np.abs(e[1::2] - e[0::2])) < 1e-6
        labels = es.irreps()
        for i in range(0, len(e), 2):
            assert {labels[i], labels[i + 1]} == {GAMMA3, GAMMA4}


def test_manifold_assignment(spec):
    es = solve_ion(spec)
    assert manifold_levels(es, spec, "4I9/2") == list(range(10))
    assert manifold_levels(es, spec, "4F3/2") == [10, 11, 12, 13]


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_small_field_splitting_matches_g(spec, axis):
    g = ground_g_factors(spec)
    b = np.zeros(3)
    b[axis] = 1e-3
    es = solve_ion(spec, b)
    e0 = solve_ion(spec).energies
    i, j = lowest_doublet(es, spec, "4I9/2")
    half = g[axis] * MU_B_GHZ_PER_T * 1e-3 / 2
    # ground energy is pinned at 0, so compare the splitting and the centre shift
    assert es.energies[j] - es.energies[i] == pytest.approx(2 * half, rel=1e-3)
    assert np.all(np.isfinite(e0))


def test_builtin_ground_doublet(spec):
    g_a, g_b, g_c = ground_g_factors(spec)
    assert 2.4 <= g_c <= 3.0
    assert min(g_a, g_b, g_c) > 0


def test_single_ion_lines_zero_field(spec):
    es = solve_ion(spec)
    z1 = lowest_doublet(es, spec, "4I9/2")
    r1 = lowest_doublet(es, spec, "4F3/2")
    lines = single_ion_lines(es, z1, r1)
    f = [x[0] for x in lines]
    assert np.ptp(f) < 1e-6
    assert f[0] == pytest.approx(es.energies[10] - es.energies[0])


def test_single_ion_lines_slopes(spec):
    # four lines with slopes (+-g_e +- g_g) mu_B / 2 along c
    es0 = solve_ion(spec)
    z = lowest_doublet(es0, spec, "4I9/2")
    r = lowest_doublet(es0, spec, "4F3/2")
    g_g = doublet_g_factors((es0.states[:, z[0]], es0.states[:, z[1]]), spec)[2]
    g_e = doublet_g_factors((es0.states[:, r[0]], es0.states[:, r[1]]), spec)[2]
    db = 1e-4

    def freqs(b):
        es = solve_ion(spec, (0, 0, b))
        return sorted(x[0] for x in single_ion_lines(es, lowest_doublet(es, spec, "4I9/2"),
                                                     lowest_doublet(es, spec, "4F3/2")))

    slopes = (np.array(freqs(db)) - np.array(freqs(0.0))) / db
    expected = sorted(MU_B_GHZ_PER_T / 2 * s for s in (g_g + g_e, g_g - g_e, -g_g + g_e, -g_g - g_e))
    assert np.allclose(slopes, expected, rtol=1e-3, atol=1e-3)

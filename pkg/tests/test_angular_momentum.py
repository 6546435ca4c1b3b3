import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sympy.physics.wigner import wigner_3j, wigner_6j

from respectra.angular_momentum import (
    BasisState, HalfInt, ReducedMatrixElement, angular_momentum_matrices, lande_g,
    orbital_to_j_rme, single_electron_rme, spin_to_j_rme, tensor_matrix_element, wigner3j,
    wigner3j_squared_exact, wigner6j,
)

from oracles import racah_3j, racah_3j_sq

# 3j(3 2 3; 0 0 0), frozen from the exact Racah sum in the oracle
W3J_323 = 0.19518001458970666


def halves(max_twice):
    return st.integers(0, max_twice).map(lambda t: Fraction(t, 2))


def test_halfint_parsing():
    assert HalfInt.of("9/2").twice_value == 9
    assert HalfInt.of(4.5) == HalfInt(9)
    assert HalfInt.of(Fraction(3, 2)) == HalfInt(3)
    assert HalfInt.of(np.float64(-1.5)).twice_value == -3
    assert str(HalfInt(9)) == "9/2" and str(HalfInt(4)) == "2"
    with pytest.raises(ValueError):
        HalfInt.of(0.3)
    with pytest.raises(ValueError):
        HalfInt.of("1/3")


def test_3j_closed_forms():
    assert wigner3j(1, 1, 0, 0, 0, 0) == pytest.approx(-1 / np.sqrt(3), abs=1e-15)
    assert wigner3j(1, 2, 4, 0, 0, 0) == 0.0
    assert wigner3j(3, 2, 3, 0, 0, 0) == pytest.approx(W3J_323, abs=1e-15)
    # j3 = 0: (-1)^(j-m)/sqrt(2j+1)
    for j2 in range(0, 10):
        j = Fraction(j2, 2)
        for m2 in range(-j2, j2 + 1, 2):
            m = Fraction(m2, 2)
            expected = (-1) ** int(j - m) / np.sqrt(float(2 * j + 1))
            assert wigner3j(j, j, 0, m, -m, 0) == pytest.approx(expected, abs=1e-14)


def test_3j_exact_square_matches_racah_oracle():
    sign, sq = wigner3j_squared_exact(3, 2, 3, 0, 0, 0)
    assert sign * sq == racah_3j_sq(3, 2, 3, 0, 0, 0)
    assert racah_3j(3, 2, 3, 0, 0, 0) == pytest.approx(W3J_323, abs=1e-15)


def test_3j_selection_rules():
    assert wigner3j(2, 2, 2, 1, 1, 0) == 0.0  # m sum
    assert wigner3j(1, 1, 3, 0, 0, 0) == 0.0  # triangle
    assert wigner3j(1, 1, 1, 0, 0, 0) == 0.0  # odd sum with all m = 0
    with pytest.raises(ValueError):
        wigner3j(-1, 1, 0, 0, 0, 0)


@settings(max_examples=200, deadline=None)
@given(halves(12), halves(12), halves(12), st.integers(0, 24), st.integers(0, 24))
def test_3j_matches_sympy(j1, j2, j3, a, b):
    m1 = -j1 + min(a, int(2 * j1))
    m2 = -j2 + min(b, int(2 * j2))
    m3 = -m1 - m2
    if (j1 + j2 + j3).denominator != 1 or abs(m3) > j3 or (j3 - m3).denominator != 1:
        return
    ref = float(wigner_3j(j1, j2, j3, m1, m2, m3))
    assert wigner3j(j1, j2, j3, m1, m2, m3) == pytest.approx(ref, abs=1e-13)


def test_3j_large_arguments_stay_exact():
    # rank-6 elements inside J = 9/2 are where float Racah sums lose digits
    for m in (Fraction(9, 2), Fraction(1, 2), Fraction(-7, 2)):
        ref = float(wigner_3j(Fraction(9, 2), 6, Fraction(9, 2), -m, 0, m))
        assert wigner3j(Fraction(9, 2), 6, Fraction(9, 2), -m, 0, m) == pytest.approx(ref, abs=1e-15)


def test_3j_orthogonality():
    worst = 0.0
    for j1, j2, j3 in itertools.product(np.arange(0, 4.5, 0.5), repeat=3):
        if (j1 + j2 + j3) % 1 or not abs(j1 - j2) <= j3 <= j1 + j2:
            continue
        for m3 in np.arange(-j3, j3 + 0.5, 1):
            s = 0.0
            for m1 in np.arange(-j1, j1 + 0.5, 1):
                m2 = -m1 - m3
                if abs(m2) <= j2:
                    s += (2 * j3 + 1) * wigner3j(j1, j2, j3, m1, m2, m3) ** 2
            worst = max(worst, abs(s - 1))
    assert worst < 1e-12


@settings(max_examples=150, deadline=None)
@given(halves(8), halves(8), halves(8), st.integers(0, 16), st.integers(0, 16))
def test_3j_permutation_symmetry(j1, j2, j3, a, b):
    m1 = -j1 + min(a, int(2 * j1))
    m2 = -j2 + min(b, int(2 * j2))
    m3 = -m1 - m2
    if abs(m3) > j3 or (j3 - m3).denominator != 1 or (j1 + j2 + j3).denominator != 1:
        return
    w = wigner3j(j1, j2, j3, m1, m2, m3)
    phase = (-1) ** int(j1 + j2 + j3)
    assert wigner3j(j2, j3, j1, m2, m3, m1) == pytest.approx(w, abs=1e-13)
    assert wigner3j(j3, j1, j2, m3, m1, m2) == pytest.approx(w, abs=1e-13)
    assert wigner3j(j2, j1, j3, m2, m1, m3) == pytest.approx(phase * w, abs=1e-13)
    assert wigner3j(j1, j3, j2, m1, m3, m2) == pytest.approx(phase * w, abs=1e-13)
    assert wigner3j(j1, j2, j3, -m1, -m2, -m3) == pytest.approx(phase * w, abs=1e-13)


def test_6j_closed_forms():
    assert wigner6j(1, 1, 1, 0, 1, 1) == pytest.approx(-1 / 3, abs=1e-15)
    assert wigner6j(1, 1, 1, 1, 1, 1) == pytest.approx(1 / 6, abs=1e-15)
    assert wigner6j(1, 1, 3, 1, 1, 1) == 0.0


@settings(max_examples=150, deadline=None)
@given(*[halves(8) for _ in range(6)])
def test_6j_matches_sympy(a, b, c, d, e, f):
    try:
        ref = float(wigner_6j(a, b, c, d, e, f))
    except ValueError:  # sympy rejects non-integer triad sums
        ref = 0.0
    assert wigner6j(a, b, c, d, e, f) == pytest.approx(ref, abs=1e-13)


@settings(max_examples=60, deadline=None)
@given(*[st.integers(0, 3) for _ in range(6)], st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
def test_6j_biedenharn_elliott(a, b, c, d, e, f, g, h, j):
    # sum_x (-1)^(S+x) (2x+1) {a b x; c d g}{c d x; e f h}{e f x; b a j}
    #   = {g h j; e a d}{g h j; f b c},  S = a+b+c+d+e+f+g+h+j
    s_tot = a + b + c + d + e + f + g + h + j
    lhs = 0.0
    for x in range(0, 13):
        lhs += ((-1) ** (s_tot + x) * (2 * x + 1) * wigner6j(a, b, x, c, d, g)
                * wigner6j(c, d, x, e, f, h) * wigner6j(e, f, x, b, a, j))
    rhs = wigner6j(g, h, j, e, a, d) * wigner6j(g, h, j, f, b, c)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def _states(label, J, L=3, S="3/2"):
    j = HalfInt.of(J)
    return [BasisState(label, L, S, J, HalfInt(m)) for m in range(j.twice_value, -j.twice_value - 1, -2)]


def test_tensor_element_selection_rules():
    st_ = _states("F", "3/2")
    rme = ReducedMatrixElement("F", "F", 2, 0.7)
    for bra in st_:
        for ket in st_:
            for q in range(-2, 3):
                v = tensor_matrix_element(2, q, bra, ket, rme)
                if q != (bra.M.twice_value - ket.M.twice_value) // 2:
                    assert v == 0
    big = ReducedMatrixElement("F", "F", 4, 1.0)
    assert all(tensor_matrix_element(4, 0, b, k, big) == 0 for b in st_ for k in st_)


def test_tensor_element_rank_zero_is_identity():
    st_ = _states("I", "9/2", L=6)
    # <J||C^0||J> = sqrt(2J+1) gives C^0_0 = 1
    rme = ReducedMatrixElement("I", "I", 0, np.sqrt(10))
    m = np.array([[tensor_matrix_element(0, 0, b, k, rme) for k in st_] for b in st_])
    assert np.allclose(m, np.eye(10), atol=1e-12)


def test_tensor_element_hermiticity_pairs():
    st_ = _states("I", "9/2", L=6)
    rng = np.random.default_rng(0)
    for k in (2, 4, 6):
        rme = ReducedMatrixElement("I", "I", k, rng.normal())
        for q in range(-k, k + 1):
            cq = np.array([[tensor_matrix_element(k, q, b, kk, rme) for kk in st_] for b in st_])
            cmq = np.array([[tensor_matrix_element(k, -q, b, kk, rme) for kk in st_] for b in st_])
            assert np.allclose(cq, (-1) ** q * cmq.conj().T, atol=1e-14)
            herm = cq + (-1) ** q * cmq
            assert np.allclose(herm, herm.conj().T, atol=1e-12)


def test_tensor_element_argument_errors():
    a = _states("F", "3/2")[0]
    b = BasisState("I", 6, "3/2", "9/2", "9/2")
    with pytest.raises(ValueError):
        tensor_matrix_element(2, 0, a, a, ReducedMatrixElement("I", "I", 2, 1.0))
    with pytest.raises(ValueError):
        tensor_matrix_element(2, 0, a, a, ReducedMatrixElement("F", "F", 4, 1.0))
    c = BasisState("F", 3, "1/2", "5/2", "1/2")
    with pytest.raises(ValueError):
        tensor_matrix_element(2, 0, c, a, ReducedMatrixElement("F", "F", 2, 1.0))
    with pytest.raises(ValueError):
        BasisState("F", 3, "3/2", "3/2", "5/2")
    assert b.M == HalfInt(9)


def test_single_electron_rme():
    # <f||C^2||f> = -2 sqrt(7/15) * ... = 7 * 3j(3 2 3;000) * (-1)^3
    assert single_electron_rme(3, 2, 3) == pytest.approx(-7 * W3J_323)
    assert single_electron_rme(1, 1, 0) == pytest.approx(-np.sqrt(3) * wigner3j(1, 1, 0, 0, 0, 0))
    assert single_electron_rme(3, 3, 3) == 0.0


def test_orbital_decoupling_with_zero_spin():
    # S = 0 leaves J = L and the reduced element unchanged
    for L in (1, 2, 3):
        for k in (0, 2):
            assert orbital_to_j_rme(L, L, L, L, 0, k, 1.0) == pytest.approx(1.0)


def test_spin_decoupling_reproduces_lande():
    # <J||L+2S||J> = g_J <J||J||J>, built from the orbital and spin pieces
    L, S, J = 6, Fraction(3, 2), Fraction(9, 2)
    jj = np.sqrt(float(J * (J + 1) * (2 * J + 1)))
    l_rme = orbital_to_j_rme(L, J, L, J, S, 1, float(np.sqrt(L * (L + 1) * (2 * L + 1))))
    s_rme = spin_to_j_rme(L, J, J, S, 1, np.sqrt(float(S * (S + 1) * (2 * S + 1))))
    assert (l_rme + 2 * s_rme) / jj == pytest.approx(lande_g(L, S, J), rel=1e-13)
    assert (l_rme + s_rme) / jj == pytest.approx(1.0, rel=1e-13)


def test_angular_momentum_matrices():
    for twice in range(0, 11):
        jx, jy, jz = angular_momentum_matrices(HalfInt(twice))
        j = twice / 2
        assert np.allclose(np.diag(jz).real, j - np.arange(twice + 1))
        assert np.allclose(jx @ jy - jy @ jx, 1j * jz, atol=1e-12)
        casimir = jx @ jx + jy @ jy + jz @ jz
        assert np.allclose(casimir, j * (j + 1) * np.eye(twice + 1), atol=1e-12)
    jx, jy, jz = angular_momentum_matrices("1/2")
    assert np.allclose(jx, [[0, 0.5], [0.5, 0]])
    assert np.allclose(jy, [[0, -0.5j], [0.5j, 0]])
    assert np.allclose(jz, [[0.5, 0], [0, -0.5]])


def test_lande_g():
    assert lande_g(6, "3/2", "9/2") == pytest.approx(8 / 11)
    assert lande_g(3, "3/2", "3/2") == pytest.approx(2 / 5)
    for s in ("1/2", 1, "5/2"):
        assert lande_g(0, s, s) == pytest.approx(2.0)
    assert lande_g(1, 1, 0) == 0.0
    with pytest.raises(ValueError):
        lande_g(6, "3/2", "1/2")

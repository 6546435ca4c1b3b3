"""Exact angular-momentum algebra.

Wigner 3j and 6j symbols are evaluated from the Racah sums in exact integer
and rational arithmetic and only converted to ``float`` on return. Everything
else in the package (crystal-field blocks, moment operators) is assembled from
these symbols and the Wigner-Eckart theorem, in a single basis convention:
``|J, M>`` with M descending inside a manifold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

Number = Union[int, float, Fraction, str, "HalfInt"]


@dataclass(frozen=True, order=True)
class HalfInt:
    """An integer or half-integer stored as twice its value."""

    twice_value: int

    @classmethod
    def of(cls, x: Number) -> "HalfInt":
        if isinstance(x, HalfInt):
            return x
        if isinstance(x, (float, np.floating)):
            if not (2 * x).is_integer():
                raise ValueError(f"{x!r} is not a multiple of 1/2")
            return cls(int(2 * x))
        twice = Fraction(x) * 2
        if twice.denominator != 1:
            raise ValueError(f"{x!r} is not a multiple of 1/2")
        return cls(int(twice))

    @property
    def value(self) -> float:
        return self.twice_value / 2

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.twice_value, 2)

    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __str__(self) -> str:
        if self.is_integer():
            return str(self.twice_value // 2)
        return f"{self.twice_value}/2"


def _twice(x: Number) -> int:
    if type(x) is int:
        return 2 * x
    if type(x) is Fraction and x.denominator <= 2:
        return int(2 * x)
    return HalfInt.of(x).twice_value


def _magnitude(x: Number) -> int:
    t = _twice(x)
    if t < 0:
        raise ValueError(f"angular momentum magnitude must be >= 0, got {HalfInt(t)}")
    return t


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


def _triangle(a2: int, b2: int, c2: int) -> bool:
    """Triangle rule on doubled arguments, including integer perimeter."""
    return (
        (a2 + b2 + c2) % 2 == 0
        and c2 >= abs(a2 - b2)
        and c2 <= a2 + b2
    )


def _delta_sq(a2: int, b2: int, c2: int) -> Fraction:
    return Fraction(
        _fact((a2 + b2 - c2) // 2) * _fact((a2 - b2 + c2) // 2) * _fact((-a2 + b2 + c2) // 2),
        _fact((a2 + b2 + c2) // 2 + 1),
    )


def _signed_sqrt(s: Fraction, p: Fraction) -> float:
    """Return s * sqrt(p) as a float without losing the exactness of s."""
    if s == 0 or p == 0:
        return 0.0
    return math.copysign(math.sqrt(s * s * p), s)


@lru_cache(maxsize=65536)
def _wigner3j_twice(j1, j2, j3, m1, m2, m3) -> Tuple[Fraction, Fraction]:
    # all arguments doubled; returns (sum, prefactor_squared)
    zero = (Fraction(0), Fraction(0))
    if m1 + m2 + m3 != 0:
        return zero
    if not _triangle(j1, j2, j3):
        return zero
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        if abs(m) > j or (j + m) % 2:
            return zero
    pre = _delta_sq(j1, j2, j3) * (
        _fact((j1 + m1) // 2) * _fact((j1 - m1) // 2)
        * _fact((j2 + m2) // 2) * _fact((j2 - m2) // 2)
        * _fact((j3 + m3) // 2) * _fact((j3 - m3) // 2)
    )
    # integer arguments of the factorials in the t-sum
    a = (j3 - j2 + m1) // 2
    b = (j3 - j1 - m2) // 2
    c = (j1 + j2 - j3) // 2
    d = (j1 - m1) // 2
    e = (j2 + m2) // 2
    tmin = max(0, -a, -b)
    tmax = min(c, d, e)
    dens = [_fact(t) * _fact(a + t) * _fact(b + t) * _fact(c - t) * _fact(d - t) * _fact(e - t)
            for t in range(tmin, tmax + 1)]
    if not dens:
        return zero
    # one common denominator keeps the alternating sum in exact integers
    common = math.lcm(*dens)
    num = sum((-1 if t % 2 else 1) * (common // den) for t, den in zip(range(tmin, tmax + 1), dens))
    if (j1 - j2 - m3) // 2 % 2:
        num = -num
    return Fraction(num, common), pre


def wigner3j(j1: Number, j2: Number, j3: Number, m1: Number, m2: Number, m3: Number) -> float:
    """Wigner 3j symbol (j1 j2 j3; m1 m2 m3).

    Arguments may be ints, floats, strings such as ``"9/2"``, Fractions or
    :class:`HalfInt`. Returns 0 for any violated selection rule.
    """
    return _wigner3j_float(_magnitude(j1), _magnitude(j2), _magnitude(j3), _twice(m1), _twice(m2), _twice(m3))


@lru_cache(maxsize=65536)
def _wigner3j_float(*args) -> float:
    return _signed_sqrt(*_wigner3j_twice(*args))


def wigner3j_squared_exact(j1, j2, j3, m1, m2, m3) -> Tuple[int, Fraction]:
    """Exact form of the 3j symbol as ``(sign, square)``."""
    args = (_magnitude(j1), _magnitude(j2), _magnitude(j3), _twice(m1), _twice(m2), _twice(m3))
    s, p = _wigner3j_twice(*args)
    if s == 0 or p == 0:
        return 0, Fraction(0)
    return (1 if s > 0 else -1), s * s * p


@lru_cache(maxsize=65536)
def _wigner6j_twice(j1, j2, j3, j4, j5, j6) -> Tuple[Fraction, Fraction]:
    zero = (Fraction(0), Fraction(0))
    triads = ((j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3))
    if not all(_triangle(*t) for t in triads):
        return zero
    pre = Fraction(1)
    for t in triads:
        pre *= _delta_sq(*t)
    s = [sum(t) // 2 for t in triads]
    q = [(j1 + j2 + j4 + j5) // 2, (j2 + j3 + j5 + j6) // 2, (j3 + j1 + j6 + j4) // 2]
    total = Fraction(0)
    for t in range(max(s), min(q) + 1):
        den = 1
        for x in s:
            den *= _fact(t - x)
        for x in q:
            den *= _fact(x - t)
        total += Fraction((-1 if t % 2 else 1) * _fact(t + 1), den)
    return total, pre


def wigner6j(j1: Number, j2: Number, j3: Number, j4: Number, j5: Number, j6: Number) -> float:
    """Wigner 6j symbol {j1 j2 j3; j4 j5 j6} (zero if any triad fails)."""
    args = tuple(_magnitude(j) for j in (j1, j2, j3, j4, j5, j6))
    s, p = _wigner6j_twice(*args)
    return _signed_sqrt(s, p)


def _parity(twice_exponent: int) -> int:
    """(-1)**(x) for x given doubled; x must be an integer."""
    if twice_exponent % 2:
        raise ValueError("phase exponent is not an integer")
    return -1 if (twice_exponent // 2) % 2 else 1


@dataclass(frozen=True)
class BasisState:
    """One ``|term, L, S, J, M>`` state belonging to a named manifold."""

    manifold: str
    L: HalfInt
    S: HalfInt
    J: HalfInt
    M: HalfInt

    def __post_init__(self):
        for name in ("L", "S", "J", "M"):
            object.__setattr__(self, name, HalfInt.of(getattr(self, name)))
        if abs(self.M.twice_value) > self.J.twice_value:
            raise ValueError(f"|M| > J in {self}")


@dataclass(frozen=True)
class ReducedMatrixElement:
    """<bra || C^k || ket> for a pair of manifolds, in Wigner-Eckart convention.

    The decoupling factor from LS to J (a 6j symbol) is already folded in.
    """

    bra_manifold: str
    ket_manifold: str
    k: int
    value: float


def tensor_matrix_element(k: Number, q: Number, bra: BasisState, ket: BasisState,
                          rme: ReducedMatrixElement) -> complex:
    """<J' M' | C^k_q | J M> = (-1)^(J'-M') 3j(J' k J; -M' q M) <J'||C^k||J>."""
    if rme.bra_manifold != bra.manifold or rme.ket_manifold != ket.manifold:
        raise ValueError(
            f"reduced element {rme.bra_manifold}|{rme.ket_manifold} does not match "
            f"states {bra.manifold}|{ket.manifold}"
        )
    if bra.S != ket.S:
        raise ValueError("C^k is spin independent; bra and ket must share S")
    if _twice(k) != 2 * rme.k:
        raise ValueError(f"rank {k} does not match reduced element rank {rme.k}")
    jp, mp = bra.J.twice_value, bra.M.twice_value
    j, m = ket.J.twice_value, ket.M.twice_value
    k2, q2 = _magnitude(k), _twice(q)
    w = wigner3j(HalfInt(jp), HalfInt(k2), HalfInt(j), HalfInt(-mp), HalfInt(q2), HalfInt(m))
    if w == 0.0:
        return 0j
    return complex(_parity(jp - mp) * w * rme.value)


def single_electron_rme(l: int, k: int, lp: int) -> float:
    """<l || C^k || l'> = (-1)^l sqrt((2l+1)(2l'+1)) 3j(l k l'; 0 0 0)."""
    return (-1) ** l * math.sqrt((2 * l + 1) * (2 * lp + 1)) * wigner3j(l, k, lp, 0, 0, 0)


def orbital_to_j_rme(Lp: Number, Jp: Number, L: Number, J: Number, S: Number, k: Number,
                     orbital_rme: float) -> float:
    """Decouple an orbital-only rank-k operator from |(L S) J> states.

    <L' S J' || T^k || L S J> =
        (-1)^(L'+S+J+k) sqrt((2J+1)(2J'+1)) {L' J' S; J L k} <L'||T^k||L>
    """
    lp2, jp2, l2, j2, s2, k2 = (_magnitude(x) for x in (Lp, Jp, L, J, S, k))
    phase = _parity(lp2 + s2 + j2 + k2)
    six = wigner6j(HalfInt(lp2), HalfInt(jp2), HalfInt(s2), HalfInt(j2), HalfInt(l2), HalfInt(k2))
    return phase * math.sqrt((j2 + 1) * (jp2 + 1)) * six * orbital_rme


def spin_to_j_rme(L: Number, Jp: Number, J: Number, S: Number, k: Number,
                  spin_rme: float) -> float:
    """Decouple a spin-only rank-k operator from |(L S) J> states (same L and S)."""
    l2, jp2, j2, s2, k2 = (_magnitude(x) for x in (L, Jp, J, S, k))
    phase = _parity(l2 + s2 + jp2 + k2)
    six = wigner6j(HalfInt(s2), HalfInt(jp2), HalfInt(l2), HalfInt(j2), HalfInt(s2), HalfInt(k2))
    return phase * math.sqrt((j2 + 1) * (jp2 + 1)) * six * spin_rme


def angular_momentum_rme(j: Number) -> float:
    """<j || J || j> = sqrt(j(j+1)(2j+1))."""
    x = HalfInt.of(j).value
    return math.sqrt(x * (x + 1) * (2 * x + 1))


def angular_momentum_matrices(J: Number) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jx, Jy, Jz in the ``|J, M>`` basis with M descending."""
    j = HalfInt.of(J)
    if j.twice_value < 0:
        raise ValueError("J must be >= 0")
    jv = j.value
    m = jv - np.arange(j.twice_value + 1)
    jz = np.diag(m).astype(complex)
    # <m+1|J+|m> sits one row above the diagonal because M descends
    jplus = np.diag(np.sqrt(jv * (jv + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    jminus = jplus.conj().T
    jx = (jplus + jminus) / 2
    jy = (jplus - jminus) / 2j
    return jx, jy, jz


def lande_g(L: Number, S: Number, J: Number) -> float:
    """Lande factor g_J; returns 0 for J = 0."""
    l, s, j = (HalfInt.of(x).value for x in (L, S, J))
    if j == 0:
        return 0.0
    if not _triangle(_twice(L), _twice(S), _twice(J)):
        raise ValueError(f"J={J} is not in the triangle of L={L}, S={S}")
    return 1.0 + (j * (j + 1) + s * (s + 1) - l * (l + 1)) / (2 * j * (j + 1))


def spherical_to_cartesian(v_minus, v_zero, v_plus):
    """Cartesian (x, y, z) components from rank-1 spherical components."""
    vx = (v_minus - v_plus) / math.sqrt(2)
    vy = 1j * (v_minus + v_plus) / math.sqrt(2)
    return vx, vy, v_zero

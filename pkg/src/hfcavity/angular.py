"""Exact angular-momentum algebra for the cesium D2 line.

Wigner 3j and 6j symbols are evaluated with the Racah sum formulas in exact
rational arithmetic (big-integer factorials and ``fractions.Fraction``),
converting to float only at the very end.  This removes the catastrophic
cancellation that plagues naive floating-point factorial ratios and lets the
dipole coefficients satisfy their sum rules to ~1e-15.

Dipole coefficients follow the Condon-Shortley phase convention and are
normalized so that the stretched cycling element
(F=4, m=4) <-> (F'=5, m'=5) with sigma+ polarization equals exactly 1.
Only relative signs within one polarization affect any observable; the
overall sign convention is documented here rather than physically fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "HalfInt",
    "J_GROUND",
    "J_EXCITED",
    "NUCLEAR_SPIN",
    "GROUND_F",
    "EXCITED_F",
    "wigner3j",
    "wigner6j",
    "dipole_matrix_element",
]


@dataclass(frozen=True, order=True)
class HalfInt:
    """An exact integer or half-integer angular momentum value.

    Stores twice the value so that e.g. 3/2 is represented without rounding.
    """

    twice_value: int

    @classmethod
    def coerce(cls, x) -> "HalfInt":
        if isinstance(x, HalfInt):
            return x
        if isinstance(x, int):
            return cls(2 * x)
        if isinstance(x, Fraction):
            doubled = 2 * x
            if doubled.denominator != 1:
                raise ValueError(f"{x} is not an integer or half-integer")
            return cls(int(doubled))
        if isinstance(x, float):
            doubled = 2 * x
            if doubled != int(doubled):
                raise ValueError(f"{x} is not an integer or half-integer")
            return cls(int(doubled))
        raise TypeError(f"cannot interpret {x!r} as a half-integer")

    @property
    def value(self) -> float:
        return self.twice_value / 2

    @property
    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __add__(self, other: "HalfInt") -> "HalfInt":
        return HalfInt(self.twice_value + other.twice_value)

    def __sub__(self, other: "HalfInt") -> "HalfInt":
        return HalfInt(self.twice_value - other.twice_value)

    def __neg__(self) -> "HalfInt":
        return HalfInt(-self.twice_value)

    def __repr__(self) -> str:
        if self.is_integer:
            return f"HalfInt({self.twice_value // 2})"
        return f"HalfInt({self.twice_value}/2)"


J_GROUND = HalfInt(1)      # 6S_1/2
J_EXCITED = HalfInt(3)     # 6P_3/2
NUCLEAR_SPIN = HalfInt(7)  # Cs-133
GROUND_F = (3, 4)
EXCITED_F = (2, 3, 4, 5)


def _check_projection(j: HalfInt, m: HalfInt, name: str) -> None:
    if j.twice_value < 0:
        raise ValueError(f"{name}: angular momentum magnitude must be >= 0, got {j}")
    if (j.twice_value - m.twice_value) % 2 != 0:
        raise ValueError(f"{name}: projection {m} has wrong parity for j={j}")
    if abs(m.twice_value) > j.twice_value:
        raise ValueError(f"{name}: |m| exceeds j ({m} vs {j})")


def _triangle_ok(a: HalfInt, b: HalfInt, c: HalfInt) -> bool:
    ta, tb, tc = a.twice_value, b.twice_value, c.twice_value
    if (ta + tb + tc) % 2 != 0:
        return False
    return abs(ta - tb) <= tc <= ta + tb


def _fact(n: int) -> int:
    if n < 0:
        raise ValueError("negative factorial in Wigner sum")
    return math.factorial(n)


def _triangle_coefficient(a: HalfInt, b: HalfInt, c: HalfInt) -> Fraction:
    """Delta(abc)^2 = (a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)! as an exact rational."""
    ta, tb, tc = a.twice_value, b.twice_value, c.twice_value
    return Fraction(
        _fact((ta + tb - tc) // 2) * _fact((ta - tb + tc) // 2) * _fact((-ta + tb + tc) // 2),
        _fact((ta + tb + tc) // 2 + 1),
    )


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol (j1 j2 j3 / m1 m2 m3).

    Returns exactly 0.0 when the triangle rule on (j1,j2,j3) fails or when
    m1+m2+m3 != 0.  Raises ValueError for projections that are incompatible
    with their angular momentum (wrong parity or |m| > j).
    """
    j1, j2, j3 = (HalfInt.coerce(j) for j in (j1, j2, j3))
    m1, m2, m3 = (HalfInt.coerce(m) for m in (m1, m2, m3))
    for i, (j, m) in enumerate(((j1, m1), (j2, m2), (j3, m3)), start=1):
        _check_projection(j, m, f"(j{i}, m{i})")

    if m1.twice_value + m2.twice_value + m3.twice_value != 0:
        return 0.0
    if not _triangle_ok(j1, j2, j3):
        return 0.0

    tj1, tj2, tj3 = j1.twice_value, j2.twice_value, j3.twice_value
    tm1, tm2, tm3 = m1.twice_value, m2.twice_value, m3.twice_value

    # Racah sum over t; every factorial argument below is a true integer.
    t_min = max(0, (tj2 - tj3 - tm1) // 2, (tj1 - tj3 + tm2) // 2)
    t_max = min((tj1 + tj2 - tj3) // 2, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    if t_min > t_max:
        return 0.0

    total = Fraction(0)
    for t in range(t_min, t_max + 1):
        denom = (
            _fact(t)
            * _fact((tj1 + tj2 - tj3) // 2 - t)
            * _fact((tj1 - tm1) // 2 - t)
            * _fact((tj2 + tm2) // 2 - t)
            * _fact((tj3 - tj2 + tm1) // 2 + t)
            * _fact((tj3 - tj1 - tm2) // 2 + t)
        )
        total += Fraction(-1 if t % 2 else 1, denom)
    if total == 0:
        return 0.0

    radicand = _triangle_coefficient(j1, j2, j3) * Fraction(
        _fact((tj1 + tm1) // 2)
        * _fact((tj1 - tm1) // 2)
        * _fact((tj2 + tm2) // 2)
        * _fact((tj2 - tm2) // 2)
        * _fact((tj3 + tm3) // 2)
        * _fact((tj3 - tm3) // 2)
    )
    sign = -1 if ((tj1 - tj2 - tm3) // 2) % 2 else 1
    return sign * float(total) * math.sqrt(float(radicand))


def wigner6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6j symbol {j1 j2 j3 / j4 j5 j6}.

    Returns exactly 0.0 when any of the four triads violates the triangle
    rule (including non-integer triad perimeters).
    """
    j = [HalfInt.coerce(x) for x in (j1, j2, j3, j4, j5, j6)]
    for i, x in enumerate(j, start=1):
        if x.twice_value < 0:
            raise ValueError(f"j{i} must be >= 0, got {x}")
    triads = ((j[0], j[1], j[2]), (j[0], j[4], j[5]), (j[3], j[1], j[5]), (j[3], j[4], j[2]))
    if not all(_triangle_ok(*tri) for tri in triads):
        return 0.0

    # Racah formula; a's are triad sums, b's are opposing pair sums.
    a = [(x.twice_value + y.twice_value + z.twice_value) // 2 for x, y, z in triads]
    t = [x.twice_value for x in j]
    b = [
        (t[0] + t[1] + t[3] + t[4]) // 2,
        (t[1] + t[2] + t[4] + t[5]) // 2,
        (t[2] + t[0] + t[5] + t[3]) // 2,
    ]
    total = Fraction(0)
    for z in range(max(a), min(b) + 1):
        denom = (
            _fact(z - a[0]) * _fact(z - a[1]) * _fact(z - a[2]) * _fact(z - a[3])
            * _fact(b[0] - z) * _fact(b[1] - z) * _fact(b[2] - z)
        )
        total += Fraction((-1 if z % 2 else 1) * _fact(z + 1), denom)
    if total == 0:
        return 0.0

    radicand = Fraction(1)
    for tri in triads:
        radicand *= _triangle_coefficient(*tri)
    return float(total) * math.sqrt(float(radicand))


def _validate_dipole_labels(F: int, q: int, Fp: int) -> None:
    if F not in GROUND_F:
        raise ValueError(f"ground hyperfine number must be 3 or 4, got {F}")
    if Fp not in EXCITED_F:
        raise ValueError(f"excited hyperfine number must be in 2..5, got {Fp}")
    if q not in (-1, 0, 1):
        raise ValueError(f"polarization index must be -1, 0 or +1, got {q}")


@lru_cache(maxsize=None)
def _raw_hyperfine_element(F: int, mF: int, q: int, Fp: int, mFp: int) -> float:
    """Wigner-Eckart factor of <F,mF| mu_q |F',mF'> in units of the J-reduced element.

    Composition of the Zeeman factor (3j) with the hyperfine reduced matrix
    element (6j), Condon-Shortley phases throughout.  The polarization index
    q follows the m_F' = m_F + q convention, so the 3j carries -q.
    """
    two = HalfInt.coerce
    threej = wigner3j(two(Fp), two(1), two(F), two(mFp), two(-q), two(-mF))
    sixj = wigner6j(J_GROUND, J_EXCITED, two(1), two(Fp), two(F), NUCLEAR_SPIN)
    zeeman_sign = -1 if (Fp - 1 + mF) % 2 else 1
    # F' + J + 1 + I with J=1/2, I=7/2: integer exponent F' + 5
    hyperfine_sign = -1 if (Fp + 5) % 2 else 1
    return (
        zeeman_sign
        * math.sqrt(2 * F + 1)
        * threej
        * hyperfine_sign
        * math.sqrt((2 * Fp + 1) * (J_GROUND.twice_value + 1))
        * sixj
    )


_CYCLING = (4, 4, 1, 5, 5)


@lru_cache(maxsize=None)
def dipole_matrix_element(F: int, mF: int, q: int, Fp: int, mFp: int) -> float:
    """Hyperfine dipole coefficient <F,mF| mu_q |F',mF'> for the Cs D2 line.

    Normalized so the stretched cycling element (4,4) <-> (5',5) is exactly 1.
    Zero unless mFp == mF + q, |F - Fp| <= 1 and both projections are in range.
    """
    _validate_dipole_labels(F, q, Fp)
    if mFp != mF + q or abs(F - Fp) > 1 or abs(mF) > F or abs(mFp) > Fp:
        return 0.0
    return _raw_hyperfine_element(F, mF, q, Fp, mFp) / _raw_hyperfine_element(*_CYCLING)

"""Exact arithmetic over the real quadratic rings Q(sqrt2) and Q(phi).

All geometric predicates downstream (point-in-polygon, interval membership,
distance comparisons) reduce to sign evaluations of numbers of the form
a + b*omega with rational a, b and omega in {sqrt(2), golden ratio}.  Signs
are decided by integer case analysis and squaring, never by floating point.

Values are stored as a normalized integer triple (an, bn, den) representing
(an + bn*omega)/den with den > 0 and gcd(an, bn, den) == 1.  Python's
arbitrary-precision ints make repeated clipping safe from overflow.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

__all__ = ["SQRT2", "PHI", "QuadElem", "quad", "sign"]

SQRT2 = "sqrt2"
PHI = "phi"

_FLOAT_OMEGA = {SQRT2: math.sqrt(2.0), PHI: (1.0 + math.sqrt(5.0)) / 2.0}

Rational = Union[int, Fraction]


def _sign_int(n: int) -> int:
    return (n > 0) - (n < 0)


def _sign_u_plus_v_sqrt(u: int, v: int, k: int) -> int:
    """Exact sign of u + v*sqrt(k) for integers u, v and square-free k >= 2."""
    if v == 0:
        return _sign_int(u)
    if u == 0:
        return _sign_int(v)
    su, sv = _sign_int(u), _sign_int(v)
    if su == sv:
        return su
    # Opposite signs: compare u^2 against k*v^2; the larger magnitude wins.
    return su if u * u > k * v * v else sv


class QuadElem:
    """Immutable element a + b*omega of Z[omega] localized at the integers.

    `ring` is "sqrt2" (omega^2 = 2) or "phi" (omega^2 = omega + 1).  Mixing
    rings in arithmetic raises ValueError.  Comparisons, hashing and signs
    are exact.
    """

    __slots__ = ("an", "bn", "den", "ring")

    def __init__(self, a: Rational, b: Rational = 0, ring: str = SQRT2):
        if ring not in (SQRT2, PHI):
            raise ValueError(f"unknown ring {ring!r}")
        fa = Fraction(a)
        fb = Fraction(b)
        den = fa.denominator * fb.denominator // math.gcd(
            fa.denominator, fb.denominator
        )
        an = fa.numerator * (den // fa.denominator)
        bn = fb.numerator * (den // fb.denominator)
        g = math.gcd(math.gcd(abs(an), abs(bn)), den)
        if g > 1:
            an //= g
            bn //= g
            den //= g
        object.__setattr__(self, "an", an)
        object.__setattr__(self, "bn", bn)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "ring", ring)

    def __setattr__(self, *args):  # pragma: no cover - immutability guard
        raise AttributeError("QuadElem is immutable")

    @classmethod
    def _raw(cls, an: int, bn: int, den: int, ring: str) -> "QuadElem":
        self = object.__new__(cls)
        if den < 0:
            an, bn, den = -an, -bn, -den
        g = math.gcd(math.gcd(abs(an), abs(bn)), den)
        if g > 1:
            an //= g
            bn //= g
            den //= g
        object.__setattr__(self, "an", an)
        object.__setattr__(self, "bn", bn)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "ring", ring)
        return self

    # -- rational views ----------------------------------------------------
    @property
    def a(self) -> Fraction:
        return Fraction(self.an, self.den)

    @property
    def b(self) -> Fraction:
        return Fraction(self.bn, self.den)

    # -- ring arithmetic ----------------------------------------------------
    def _coerce(self, other) -> "QuadElem":
        if isinstance(other, QuadElem):
            if other.ring != self.ring:
                raise ValueError("mixed quadratic rings")
            return other
        if isinstance(other, (int, Fraction)):
            f = Fraction(other)
            return QuadElem._raw(f.numerator, 0, f.denominator, self.ring)
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadElem._raw(
            self.an * o.den + o.an * self.den,
            self.bn * o.den + o.bn * self.den,
            self.den * o.den,
            self.ring,
        )

    __radd__ = __add__

    def __neg__(self):
        return QuadElem._raw(-self.an, -self.bn, self.den, self.ring)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadElem._raw(
            self.an * o.den - o.an * self.den,
            self.bn * o.den - o.bn * self.den,
            self.den * o.den,
            self.ring,
        )

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        # (a1 + b1 w)(a2 + b2 w) = a1 a2 + (a1 b2 + a2 b1) w + b1 b2 w^2
        aa = self.an * o.an
        ab = self.an * o.bn + self.bn * o.an
        bb = self.bn * o.bn
        if self.ring == SQRT2:  # w^2 = 2
            an, bn = aa + 2 * bb, ab
        else:  # w^2 = w + 1
            an, bn = aa + bb, ab + bb
        return QuadElem._raw(an, bn, self.den * o.den, self.ring)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            f = Fraction(other)
            if f == 0:
                raise ZeroDivisionError("division by zero")
            return QuadElem._raw(
                self.an * f.denominator,
                self.bn * f.denominator,
                self.den * f.numerator,
                self.ring,
            )
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inverse()

    def inverse(self) -> "QuadElem":
        """Multiplicative inverse via the Galois conjugate."""
        if self.an == 0 and self.bn == 0:
            raise ZeroDivisionError("inverse of zero")
        # conj(a + bw): w -> -w for sqrt2, w -> 1 - w for phi.
        if self.ring == SQRT2:
            ca, cb = self.an, -self.bn
            norm = self.an * self.an - 2 * self.bn * self.bn  # (a+bw)(a-bw)*den^{-2}
        else:
            ca, cb = self.an + self.bn, -self.bn
            norm = (
                self.an * self.an + self.an * self.bn - self.bn * self.bn
            )
        # (a+bw) * conj = norm / den^2, so inverse = conj * den^2 / (norm * den) ...
        # work with raw numerators: self = (an + bn w)/den, conj' = (ca + cb w)/den
        # product = norm/den^2  =>  inverse = (ca + cb w) * den / norm
        return QuadElem._raw(ca * self.den, cb * self.den, norm, self.ring)

    # -- predicates ----------------------------------------------------------
    def sign(self) -> int:
        """Exact sign in {-1, 0, +1} of the real value (an + bn*omega)/den."""
        an, bn = self.an, self.bn
        if self.ring == SQRT2:
            return _sign_u_plus_v_sqrt(an, bn, 2)
        # a + b*phi = ((2a + b) + b*sqrt5)/2
        return _sign_u_plus_v_sqrt(2 * an + bn, bn, 5)

    def is_zero(self) -> bool:
        return self.an == 0 and self.bn == 0

    def __eq__(self, other):
        if isinstance(other, QuadElem):
            return (
                self.ring == other.ring
                and self.an == other.an
                and self.bn == other.bn
                and self.den == other.den
            )
        if isinstance(other, (int, Fraction)):
            f = Fraction(other)
            return self.bn == 0 and Fraction(self.an, self.den) == f
        return NotImplemented

    def __hash__(self):
        return hash((self.ring, self.an, self.bn, self.den))

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    # -- conversions ----------------------------------------------------------
    def to_float(self) -> float:
        """Floating approximation; exact rational parts keep this near 1 ulp
        for coefficients of moderate magnitude."""
        return (self.an + self.bn * _FLOAT_OMEGA[self.ring]) / self.den

    __float__ = to_float

    def floor(self) -> int:
        """Exact floor of the real value."""
        est = math.floor(self.to_float())
        # fix up float error: want largest n with self - n >= 0
        while (self - (est + 1)).sign() >= 0:
            est += 1
        while (self - est).sign() < 0:
            est -= 1
        return est

    def as_pair_str(self) -> tuple[str, str]:
        """Serialization as the pair of rationals ("a/den", "b/den")."""
        return (str(Fraction(self.an, self.den)), str(Fraction(self.bn, self.den)))

    @classmethod
    def from_pair_str(cls, a: str, b: str, ring: str) -> "QuadElem":
        return cls(Fraction(a), Fraction(b), ring)

    def __repr__(self):
        return f"QuadElem({Fraction(self.an, self.den)}, {Fraction(self.bn, self.den)}, {self.ring!r})"


def quad(a: Rational, b: Rational = 0, ring: str = SQRT2) -> QuadElem:
    """Shorthand constructor for QuadElem."""
    return QuadElem(a, b, ring)


def sign(x: QuadElem) -> int:
    """Exact sign of a quadratic-ring element (module-level convenience)."""
    return x.sign()

"""Exact arithmetic in multi-quadratic number fields Q(sqrt(m1), ..., sqrt(mr)).

The frequency vectors we work with have entries omega_k = sqrt(j_k^2 + 1)
with the radicands chosen square-free and pairwise distinct.  Integer
combinations of such square roots, their products, and their squares all
live in the field generated by finitely many square roots of square-free
integers.  A field element is stored as a finite map

    {square-free radicand m >= 1  ->  rational coefficient q_m}

representing  sum_m  q_m * sqrt(m),  with the radicand 1 carrying the
rational part.  The representation is canonical: distinct square-free
radicands are linearly independent over Q, so an element is zero iff the
map is empty, and rational iff the support is contained in {1}.

Products reduce via sqrt(m) * sqrt(m') = g * sqrt(m m' / g^2) with
g = gcd(m, m'); since m and m' are square-free the reduced radicand is
again square-free and no factorization is needed.  Factorization (trial
division against a cached prime table) is only used when taking the
square root of an arbitrary integer, to split off the largest square
divisor.

Sign determination is exact: a structurally nonzero element has a fixed
nonzero real value, so directed interval refinement (integer-sqrt
enclosures of each sqrt(m), exact rational endpoint arithmetic)
terminates with a certified sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "IntegerFactorization",
    "QuadFieldElement",
    "factorize",
    "is_square_free",
    "square_free_split",
    "set_prime_bound",
    "check_linear_nonvanishing",
    "check_quadratic_nonequality",
    "classify_quadratic_square",
]


# ---------------------------------------------------------------------------
# prime table / factorization

_prime_bound = 1_000_000
_primes: list[int] | None = None


def set_prime_bound(bound: int) -> None:
    """Set the trial-division bound (rebuilds the sieve on next use)."""
    global _prime_bound, _primes
    if bound < 2:
        raise ValueError("prime bound must be >= 2")
    _prime_bound = int(bound)
    _primes = None


def _prime_table() -> list[int]:
    global _primes
    if _primes is None:
        n = _prime_bound
        sieve = bytearray([1]) * (n + 1)
        sieve[0:2] = b"\x00\x00"
        for p in range(2, math.isqrt(n) + 1):
            if sieve[p]:
                sieve[p * p :: p] = bytearray(len(sieve[p * p :: p]))
        _primes = [i for i in range(n + 1) if sieve[i]]
    return _primes


@dataclass(frozen=True)
class IntegerFactorization:
    n: int
    factors: tuple[tuple[int, int], ...]  # (prime, exponent), ascending
    complete: bool  # False if a cofactor above the table's certification range remains

    def is_square_free(self) -> bool:
        if not self.complete:
            raise ValueError(
                f"factorization of {self.n} incomplete at prime bound {_prime_bound}"
            )
        return all(e == 1 for _, e in self.factors)


def factorize(n: int) -> IntegerFactorization:
    """Factor a positive integer by trial division against the prime table.

    A remaining cofactor r coprime to all table primes is prime whenever
    r <= bound^2, and a perfect square r = s^2 with s <= bound^2 has prime s.
    Beyond that the factorization is flagged incomplete.
    """
    if n <= 0:
        raise ValueError("factorize expects a positive integer")
    m = n
    out: list[tuple[int, int]] = []
    for p in _prime_table():
        if p * p > m:
            break
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out.append((p, e))
    complete = True
    if m > 1:
        bound = _prime_bound
        if m <= bound * bound or m <= bound:
            out.append((m, 1))
        else:
            s = math.isqrt(m)
            if s * s == m and s <= bound * bound:
                out.append((s, 2))
            else:
                # cannot certify primality of the cofactor at this bound
                out.append((m, 1))
                complete = False
    out.sort()
    return IntegerFactorization(n=n, factors=tuple(out), complete=complete)


def is_square_free(n: int) -> bool:
    if n <= 0:
        raise ValueError("square-free test expects a positive integer")
    if n == 1:
        return True
    return factorize(n).is_square_free()


def square_free_split(n: int) -> tuple[int, int]:
    """Write n = g^2 * m with m square-free; return (g, m)."""
    if n <= 0:
        raise ValueError("square_free_split expects a positive integer")
    f = factorize(n)
    if not f.complete:
        raise ValueError(f"cannot certify square-free part of {n} at current prime bound")
    g = 1
    m = 1
    for p, e in f.factors:
        g *= p ** (e // 2)
        if e % 2:
            m *= p
    return g, m


# ---------------------------------------------------------------------------
# field elements

_Rat = (int, Fraction)


class QuadFieldElement:
    """Element of a multi-quadratic field, sum of q_m * sqrt(m)."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: dict[int, Fraction] | None = None, _trusted: bool = False):
        if terms is None:
            terms = {}
        if not _trusted:
            clean: dict[int, Fraction] = {}
            for m, q in terms.items():
                if m <= 0:
                    raise ValueError("radicands must be positive")
                g, mm = square_free_split(m)
                q = Fraction(q) * g
                if q:
                    clean[mm] = clean.get(mm, Fraction(0)) + q
            terms = {m: q for m, q in clean.items() if q}
        self._terms = terms
        self._hash: int | None = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def rational(cls, q) -> "QuadFieldElement":
        q = Fraction(q)
        return cls({1: q} if q else {}, _trusted=True)

    @classmethod
    def sqrt(cls, n: int) -> "QuadFieldElement":
        """sqrt(n) for a positive integer n, reduced to g*sqrt(m)."""
        if n <= 0:
            raise ValueError("sqrt expects a positive integer")
        g, m = square_free_split(n)
        return cls({m: Fraction(g)}, _trusted=True)

    @classmethod
    def zero(cls) -> "QuadFieldElement":
        return cls({}, _trusted=True)

    @classmethod
    def one(cls) -> "QuadFieldElement":
        return cls.rational(1)

    # -- views --------------------------------------------------------------
    @property
    def terms(self) -> dict[int, Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_rational(self) -> bool:
        return all(m == 1 for m in self._terms)

    def rational_value(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is irrational")
        return self._terms.get(1, Fraction(0))

    # -- ring operations ----------------------------------------------------
    def __add__(self, other) -> "QuadFieldElement":
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self._terms)
        for m, q in other._terms.items():
            s = out.get(m, Fraction(0)) + q
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return QuadFieldElement(out, _trusted=True)

    __radd__ = __add__

    def __neg__(self) -> "QuadFieldElement":
        return QuadFieldElement({m: -q for m, q in self._terms.items()}, _trusted=True)

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other) -> "QuadFieldElement":
        if isinstance(other, _Rat):
            q = Fraction(other)
            if not q:
                return QuadFieldElement.zero()
            return QuadFieldElement(
                {m: c * q for m, c in self._terms.items()}, _trusted=True
            )
        if not isinstance(other, QuadFieldElement):
            return NotImplemented
        out: dict[int, Fraction] = {}
        for m1, q1 in self._terms.items():
            for m2, q2 in other._terms.items():
                g = math.gcd(m1, m2)
                m = (m1 // g) * (m2 // g)  # square-free: coprime square-free parts
                c = q1 * q2 * g
                s = out.get(m, Fraction(0)) + c
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        return QuadFieldElement(out, _trusted=True)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "QuadFieldElement":
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = QuadFieldElement.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other) -> bool:
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(sorted(self._terms.items())))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for m in sorted(self._terms):
            q = self._terms[m]
            if m == 1:
                parts.append(str(q))
            elif q == 1:
                parts.append(f"sqrt({m})")
            elif q == -1:
                parts.append(f"-sqrt({m})")
            else:
                parts.append(f"{q}*sqrt({m})")
        return " + ".join(parts).replace("+ -", "- ")

    # -- sign and enclosure --------------------------------------------------
    def enclosure(self, bits: int = 64) -> tuple[Fraction, Fraction]:
        """Rigorous interval [lo, hi] containing the value, width <= 2^{1-bits}*(1+|mid|)."""
        if bits < 4:
            raise ValueError("bits must be >= 4")
        if self.is_rational():
            v = self.rational_value()
            return (v, v)
        prec = bits
        while True:
            lo = Fraction(0)
            hi = Fraction(0)
            scale = 1 << prec
            for m, q in self._terms.items():
                if m == 1:
                    lo += q
                    hi += q
                    continue
                s = math.isqrt(m * scale * scale)
                r_lo = Fraction(s, scale)
                r_hi = Fraction(s + 1, scale)
                if q >= 0:
                    lo += q * r_lo
                    hi += q * r_hi
                else:
                    lo += q * r_hi
                    hi += q * r_lo
            width = hi - lo
            mid = abs(lo + hi) / 2
            if width <= Fraction(1, 1 << (bits - 1)) * (1 + mid):
                return (lo, hi)
            prec *= 2

    def sign_and_interval(self, bits: int = 64) -> tuple[int, tuple[Fraction, Fraction]]:
        """Certified sign (-1, 0, +1) plus an enclosing interval.

        Zero is decided structurally (empty term map), so interval refinement
        is only ever asked to separate a genuinely nonzero value from 0 and
        terminates.
        """
        if self.is_zero():
            return 0, (Fraction(0), Fraction(0))
        if self.is_rational():
            v = self.rational_value()
            return (1 if v > 0 else -1), (v, v)
        prec = max(bits, 16)
        while True:
            lo, hi = self.enclosure(prec)
            if lo > 0:
                return 1, (lo, hi)
            if hi < 0:
                return -1, (lo, hi)
            prec *= 2

    def sign(self) -> int:
        return self.sign_and_interval()[0]

    def to_float(self) -> float:
        lo, hi = self.enclosure(80)
        return float((lo + hi) / 2)

    def abs_lower_bound(self) -> Fraction:
        """A positive rational strictly below |value| (0 for the zero element)."""
        if self.is_zero():
            return Fraction(0)
        s, (lo, hi) = self.sign_and_interval()
        return lo if s > 0 else -hi

    # torus distance -----------------------------------------------------
    def nearest_int(self) -> int:
        lo, hi = self.enclosure(64)
        mid = (lo + hi) / 2
        return int(math.floor(mid + Fraction(1, 2)))

    def distance_to_int_is_zero(self) -> bool:
        """Whether dist(value, Z) == 0, decided exactly.

        The distance vanishes iff the element is rational with denominator 1;
        irrational elements always have positive distance.
        """
        if not self.is_rational():
            return False
        return self.rational_value().denominator == 1

    def distance_to_int_float(self) -> float:
        if self.distance_to_int_is_zero():
            return 0.0
        n = self.nearest_int()
        return abs((self - n).to_float())


def _coerce(x) -> "QuadFieldElement":
    if isinstance(x, QuadFieldElement):
        return x
    if isinstance(x, _Rat):
        return QuadFieldElement.rational(x)
    return NotImplemented


# ---------------------------------------------------------------------------
# frequency combination checks

def _radicands_of(basis_or_radicands) -> tuple[int, ...]:
    r = getattr(basis_or_radicands, "radicands", basis_or_radicands)
    rad = tuple(int(m) for m in r)
    if not rad:
        raise ValueError("empty radicand list")
    for m in rad:
        if m < 2 or not is_square_free(m):
            raise ValueError(f"radicand {m} is not a square-free integer >= 2")
    if len(set(rad)) != len(rad):
        raise ValueError("radicands must be pairwise distinct")
    return rad


def omega_elements(basis_or_radicands) -> list[QuadFieldElement]:
    """The exact frequency vector (sqrt(m_1), ..., sqrt(m_b))."""
    return [QuadFieldElement.sqrt(m) for m in _radicands_of(basis_or_radicands)]


def check_linear_nonvanishing(n: Sequence[int], basis_or_radicands) -> bool:
    """Whether sum_k n_k sqrt(m_k) stays away from every integer.

    True iff the exact distance to Z is nonzero.  For distinct square-free
    radicands >= 2 and n != 0 the combination is irrational, so the check
    holds for every nonzero n; the implementation decides it exactly rather
    than assuming that.
    """
    n = tuple(int(v) for v in n)
    rad = _radicands_of(basis_or_radicands)
    if len(n) != len(rad):
        raise ValueError("length mismatch between n and radicand list")
    if not any(n):
        raise ValueError("n must be nonzero")
    e = QuadFieldElement.zero()
    for nk, m in zip(n, rad):
        e = e + QuadFieldElement.sqrt(m) * nk
    return not e.distance_to_int_is_zero()


def check_quadratic_nonequality(n: Sequence[int], basis_or_radicands) -> bool:
    """Whether the cross sum  sum_{k<l} n_k n_l sqrt(m_k m_l)  avoids Z.

    This is the quantity controlling squares: (n.omega)^2 differs from an
    integer exactly when the cross sum does.  Requires at least two nonzero
    components of n (otherwise there is no cross term and the sum is 0).
    """
    n = tuple(int(v) for v in n)
    rad = _radicands_of(basis_or_radicands)
    if len(n) != len(rad):
        raise ValueError("length mismatch between n and radicand list")
    if sum(1 for v in n if v) < 2:
        raise ValueError("cross sum needs at least two nonzero components")
    e = QuadFieldElement.zero()
    for k in range(len(n)):
        for l in range(k + 1, len(n)):
            if n[k] and n[l]:
                e = e + QuadFieldElement.sqrt(rad[k] * rad[l]) * (n[k] * n[l])
    return not e.distance_to_int_is_zero()


def classify_quadratic_square(n: Sequence[int], basis_or_radicands):
    """Classify (n.omega)^2: rational exactly when n sits on a single axis.

    Returns (is_rational, k, value) where k is the 0-based index carrying n
    when n = n_k e_k (None otherwise), and value is the exact field element
    (n.omega)^2.
    """
    n = tuple(int(v) for v in n)
    rad = _radicands_of(basis_or_radicands)
    if len(n) != len(rad):
        raise ValueError("length mismatch between n and radicand list")
    if not any(n):
        raise ValueError("n must be nonzero")
    e = QuadFieldElement.zero()
    for nk, m in zip(n, rad):
        e = e + QuadFieldElement.sqrt(m) * nk
    sq = e * e
    support = [k for k, v in enumerate(n) if v]
    k = support[0] if len(support) == 1 else None
    return sq.is_rational(), k, sq

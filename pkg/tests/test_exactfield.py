"""Exact quadratic-field arithmetic: oracles and laws.

The independent oracle for interval/sign queries is integer-sqrt digit
extraction done inline (math.isqrt at explicit scale), not the module's
own enclosure code.
"""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgtorus.exactfield import (
    QuadFieldElement as QF,
    check_linear_nonvanishing,
    check_quadratic_nonequality,
    classify_quadratic_square,
    factorize,
    is_square_free,
    square_free_split,
)


def test_square_free_examples():
    assert is_square_free(10)
    assert not is_square_free(50)
    assert is_square_free(1)
    assert is_square_free(2)
    assert not is_square_free(4)


def test_square_free_against_sieve_oracle():
    # independent oracle: mark multiples of p^2
    N = 5000
    squarefree = [True] * (N + 1)
    p = 2
    while p * p <= N:
        for k in range(p * p, N + 1, p * p):
            squarefree[k] = False
        p += 1
    for n in range(1, N + 1):
        assert is_square_free(n) == squarefree[n], n


def test_factorize_roundtrip():
    for n in [2, 12, 360, 999983, 10**6, 2 * 3 * 5 * 7 * 11 * 13]:
        f = factorize(n)
        prod = 1
        for p, e in f.factors:
            prod *= p**e
        assert prod == n
        assert f.complete


def test_square_free_split():
    assert square_free_split(50) == (5, 2)
    assert square_free_split(49) == (7, 1)
    assert square_free_split(10) == (1, 10)
    assert square_free_split(1) == (1, 1)


def test_sqrt_reduction():
    assert QF.sqrt(50) == QF.sqrt(2) * 5
    assert QF.sqrt(49) == QF.rational(7)
    assert QF.sqrt(4) == QF.rational(2)


def test_product_examples():
    r2, r5, r10 = QF.sqrt(2), QF.sqrt(5), QF.sqrt(10)
    assert r2 * r2 == QF.rational(2)
    assert r2 * r10 == r5 * 2
    # (sqrt2 + sqrt5)^2 = 7 + 2 sqrt10, expanded by hand
    assert (r2 + r5) ** 2 == QF.rational(7) + r10 * 2


def test_zero_and_rationality():
    e = QF.sqrt(2) - QF.sqrt(2)
    assert e.is_zero()
    assert (QF.sqrt(2) * QF.sqrt(2) - 2).is_zero()
    assert (QF.sqrt(2) + QF.sqrt(3)).is_rational() is False
    assert (QF.sqrt(9)).is_rational()
    assert QF.rational(Fraction(3, 2)).rational_value() == Fraction(3, 2)


def test_sign_interval_sqrt10():
    sign, (lo, hi) = QF.sqrt(10).sign_and_interval(bits=20)
    assert sign == 1
    # oracle: sqrt(10) enclosure from isqrt at scale 2^40
    s = math.isqrt(10 << 80)
    olo, ohi = Fraction(s, 1 << 40), Fraction(s + 1, 1 << 40)
    assert lo <= ohi and olo <= hi  # intervals overlap
    assert hi - lo <= Fraction(1, 1 << 15)


def test_sign_negative_and_zero():
    assert (QF.sqrt(2) - QF.sqrt(5)).sign() == -1
    assert (QF.sqrt(5) - QF.sqrt(2)).sign() == 1
    assert (QF.sqrt(2) - QF.sqrt(2)).sign() == 0


def test_to_float():
    assert abs(QF.sqrt(2).to_float() - math.sqrt(2)) < 1e-14
    e = QF.sqrt(2) + QF.sqrt(5) * Fraction(-3, 7)
    assert abs(e.to_float() - (math.sqrt(2) - 3 * math.sqrt(5) / 7)) < 1e-13


def test_distance_to_int():
    assert QF.rational(3).distance_to_int_is_zero()
    assert not QF.rational(Fraction(1, 2)).distance_to_int_is_zero()
    assert not QF.sqrt(2).distance_to_int_is_zero()
    d = QF.sqrt(2).distance_to_int_float()
    assert abs(d - (math.sqrt(2) - 1)) < 1e-12


_pool = [1, 2, 3, 5, 6, 7, 10, 11, 13, 17]
_elem = st.dictionaries(
    st.sampled_from(_pool),
    st.fractions(min_value=-5, max_value=5),
    max_size=4,
).map(QF)


@settings(max_examples=150, deadline=None)
@given(_elem, _elem, _elem)
def test_field_laws(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a + b == b + a
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + QF.zero() == a
    assert a * QF.one() == a
    assert (a - a).is_zero()


@settings(max_examples=80, deadline=None)
@given(_elem)
def test_sign_consistent_with_float(a):
    s, (lo, hi) = a.sign_and_interval()
    assert lo <= hi
    if s == 0:
        assert a.is_zero()
    else:
        assert s == (1 if a.to_float() > 0 else -1)
        assert (lo > 0) if s == 1 else (hi < 0)


# -- frequency checks -------------------------------------------------------

RADS = (2, 5, 17)  # j = (1, 2, 4)


def test_linear_nonvanishing_basic():
    assert check_linear_nonvanishing((1, 0, 0), RADS)
    assert check_linear_nonvanishing((3, -2, 1), RADS)
    with pytest.raises(ValueError):
        check_linear_nonvanishing((0, 0, 0), RADS)


def test_quadratic_nonequality_basic():
    assert check_quadratic_nonequality((1, 1, 0), RADS)
    assert check_quadratic_nonequality((2, -3, 1), RADS)
    with pytest.raises(ValueError):
        check_quadratic_nonequality((1, 0, 0), RADS)


def test_quadratic_nonequality_resonant_radicands():
    # radicands 2 and 8 are not admissible (8 not square-free); with (2, 3, 6)
    # sqrt(2)*sqrt(3) = sqrt(6) interacts with the third frequency:
    # n = (0,...) paths -- construct explicit integral cross sum:
    # omega = (sqrt2, sqrt3, sqrt6): n=(1,1,0): cross = sqrt6, irrational: ok
    assert check_quadratic_nonequality((1, 1, 0), (2, 3, 6))
    # n=(0,1,1): sqrt(18) = 3 sqrt2: irrational
    assert check_quadratic_nonequality((0, 1, 1), (2, 3, 6))


def test_classifier_singleton():
    ok, k, sq = classify_quadratic_square((3, 0, 0), RADS)
    assert ok and k == 0
    assert sq.rational_value() == 18
    ok, k, sq = classify_quadratic_square((1, -1, 0), RADS)
    assert not ok
    assert k is None


def test_classifier_matches_cross_sum():
    # (n.omega)^2 rational <=> cross sum integral-distance test fails to apply;
    # for multi-support n the square must be irrational over these radicands
    for n in [(1, 1, 0), (2, 1, -1), (1, 0, 3), (5, -2, 1)]:
        ok, _, _ = classify_quadratic_square(n, RADS)
        assert not ok
        assert check_quadratic_nonequality(n, RADS)

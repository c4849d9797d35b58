import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from restrictlab.arith import (
    Rational,
    dirichlet_approx,
    divisor_count_below,
    euler_phi,
    farey_count,
    farey_system,
    mobius,
    mobius_table,
    phi_table,
    ramanujan_sum,
    ramanujan_sum_array,
)


def phi_brute(q):
    return sum(1 for a in range(1, q + 1) if math.gcd(a, q) == 1)


def ramanujan_brute(q, n):
    return sum(cmath.exp(2j * math.pi * a * n / q) for a in range(1, q + 1) if math.gcd(a, q) == 1)


@pytest.mark.parametrize("q,expected", [(1, 1), (12, 4), (13, 12), (97, 96)])
def test_euler_phi_examples(q, expected):
    assert euler_phi(q) == expected


@pytest.mark.parametrize("q,expected", [(1, 1), (6, 1), (12, 0), (30, -1), (7, -1)])
def test_mobius_examples(q, expected):
    assert mobius(q) == expected


@pytest.mark.parametrize("q,n,expected", [(1, 7, 1), (5, 10, 4), (5, 1, -1), (6, 4, -1), (6, 0, 2)])
def test_ramanujan_examples(q, n, expected):
    assert ramanujan_sum(q, n) == expected


@pytest.mark.parametrize("n,Q,expected", [(12, 100, 6), (1, 2, 1), (12, 4, 3), (-12, 4, 3), (12, 1, 0)])
def test_divisor_count_below(n, Q, expected):
    assert divisor_count_below(n, Q) == expected


def test_divisor_count_rejects_zero():
    with pytest.raises(ValueError):
        divisor_count_below(0, 5)


def test_tables_match_scalar_versions():
    phi = phi_table(300)
    mu = mobius_table(300)
    for q in range(1, 301):
        assert phi[q] == euler_phi(q) == phi_brute(q)
        assert mu[q] == mobius(q)


def test_ramanujan_array_matches_brute():
    n = np.arange(-60, 61)
    for q in range(1, 40):
        got = ramanujan_sum_array(q, n)
        want = [round(ramanujan_brute(q, int(m)).real) for m in n]
        assert got.tolist() == want


@given(st.integers(1, 3000), st.integers(1, 3000))
def test_multiplicative_on_coprime_pairs(m, n):
    if math.gcd(m, n) != 1:
        return
    assert euler_phi(m * n) == euler_phi(m) * euler_phi(n)
    assert mobius(m * n) == mobius(m) * mobius(n)


def test_rational_rejects_unreduced():
    with pytest.raises(ValueError):
        Rational(2, 4)
    with pytest.raises(ValueError):
        Rational(1, 0)


def best_dirichlet_brute(t, q_max):
    """Scan all q <= q_max and keep the largest-q convergent-quality approximation.

    A convergent with q <= q_max is characterized (Legendre) by being a best
    approximation of the second kind; brute force: the last q in 1..q_max that
    strictly improves min |q t - a|.
    """
    x = Fraction(t)
    best, best_q, best_a = None, None, None
    for q in range(1, q_max + 1):
        a = round(x * q)
        err = abs(q * x - a)
        if best is None or err < best:
            best, best_q, best_a = err, q, a
    return best_a, best_q


@pytest.mark.parametrize(
    "t,q_max,expected",
    [(0.5, 10, (1, 2)), (0.3, 100, (3, 10)), (0.14159265, 100, (1, 7)), (0.14159265, 110, (15, 106))],
)
def test_dirichlet_examples(t, q_max, expected):
    r = dirichlet_approx(t, q_max)
    assert (r.a, r.q) == expected
    assert (r.a, r.q) == best_dirichlet_brute(t, q_max)


@settings(max_examples=300)
@given(st.floats(0, 1, exclude_max=True), st.integers(1, 5000))
def test_dirichlet_inequality_exact(t, q_max):
    r = dirichlet_approx(t, q_max)
    err = abs(Fraction(t) - Fraction(r.a, r.q))
    assert 1 <= r.q <= q_max
    assert err <= Fraction(1, r.q * q_max)
    assert err <= Fraction(1, r.q**2)


@settings(max_examples=60)
@given(st.floats(0, 1, exclude_max=True), st.integers(1, 300))
def test_dirichlet_matches_brute_scan(t, q_max):
    r = dirichlet_approx(t, q_max)
    assert (r.a, r.q) == best_dirichlet_brute(t, q_max)


@pytest.mark.parametrize("Q,count", [(1, 10), (2, 31)])
def test_farey_counts(Q, count):
    fs = farey_system(Q)
    assert len(fs) == count == farey_count(Q)
    brute = {(a, q) for q in range(Q, 5 * Q + 1) for a in range(1, q + 1) if math.gcd(a, q) == 1}
    assert set(zip(fs.a.tolist(), fs.q.tolist())) == brute


@pytest.mark.parametrize("Q", [1, 3, 8, 20])
def test_farey_sorted_and_reduced(Q):
    fs = farey_system(Q)
    assert np.all(np.gcd(fs.a, fs.q) == 1)
    assert np.all(fs.a[:-1] * fs.q[1:] < fs.a[1:] * fs.q[:-1])
    assert len(fs) == sum(euler_phi(q) for q in range(Q, 5 * Q + 1))


def test_farey_memory_guard():
    with pytest.raises(MemoryError):
        farey_system(50, max_fractions=100)

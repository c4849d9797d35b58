"""Exact integer number theory used throughout the package.

Everything here works on Python ints (or int64 numpy arrays for the
vectorized helpers) and never touches floating point except in
:func:`dirichlet_approx`, which converts its float input to an exact
``Fraction`` first.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

PRIME_TABLE_LIMIT = 10**6
FAREY_MAX_FRACTIONS = 50_000_000


@dataclass(frozen=True, order=True)
class Rational:
    """Reduced fraction a/q with q >= 1."""

    a: int
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError(f"denominator must be positive, got {self.q}")
        if math.gcd(self.a, self.q) != 1:
            raise ValueError(f"{self.a}/{self.q} is not reduced")

    def __float__(self) -> float:
        return self.a / self.q

    def as_fraction(self) -> Fraction:
        return Fraction(self.a, self.q)


@lru_cache(maxsize=1)
def _prime_table() -> np.ndarray:
    sieve = np.ones(PRIME_TABLE_LIMIT + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(PRIME_TABLE_LIMIT) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve)


def factorize(n: int) -> list[tuple[int, int]]:
    """Prime factorization of ``|n|`` as ``[(p, e), ...]`` by trial division."""
    n = abs(int(n))
    if n == 0:
        raise ValueError("cannot factorize 0")
    out = []
    for p in _prime_table():
        p = int(p)
        if p * p > n:
            break
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
    if n > 1:
        if n > PRIME_TABLE_LIMIT**2:
            # the leftover cofactor might be composite; finish with plain trial division
            d = PRIME_TABLE_LIMIT + 1
            while d * d <= n:
                if n % d == 0:
                    e = 0
                    while n % d == 0:
                        n //= d
                        e += 1
                    out.append((d, e))
                d += 2 if d > 2 else 1
            if n > 1:
                out.append((n, 1))
        else:
            out.append((n, 1))
    return out


def euler_phi(q: int) -> int:
    if q < 1:
        raise ValueError("euler_phi needs q >= 1")
    result = q
    for p, _ in factorize(q):
        result = result // p * (p - 1)
    return result


def mobius(q: int) -> int:
    if q < 1:
        raise ValueError("mobius needs q >= 1")
    fac = factorize(q) if q > 1 else []
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def divisors(n: int) -> list[int]:
    """Sorted positive divisors of ``|n|``."""
    if n == 0:
        raise ValueError("0 has infinitely many divisors")
    divs = [1]
    for p, e in factorize(n):
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def ramanujan_sum(q: int, n: int) -> int:
    """c_q(n) = sum over d | gcd(q, n) of d * mu(q/d); equals phi(q) when n = 0."""
    if q < 1:
        raise ValueError("ramanujan_sum needs q >= 1")
    if n == 0:
        return euler_phi(q)
    g = math.gcd(q, abs(n))
    return sum(d * mobius(q // d) for d in divisors(g))


def divisor_count_below(n: int, Q: int) -> int:
    """Number of positive divisors of ``n`` strictly less than ``Q``."""
    if n == 0:
        raise ValueError("divisor_count_below is undefined for n = 0")
    divs = divisors(n)
    return bisect_left(divs, Q)


def dirichlet_approx(t: float | Fraction, q_max: int) -> Rational:
    """Best continued-fraction convergent a/q of t with q <= q_max.

    The returned convergent satisfies |t - a/q| <= 1/(q*q_max) <= 1/q^2.
    """
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    x = Fraction(t)
    # convergent recurrences p_k = a_k p_{k-1} + p_{k-2}
    p_prev, q_prev = 1, 0
    p_cur, q_cur = math.floor(x), 1
    rest = x - p_cur
    while rest != 0:
        x = 1 / rest
        a_k = math.floor(x)
        rest = x - a_k
        p_next, q_next = a_k * p_cur + p_prev, a_k * q_cur + q_prev
        if q_next > q_max:
            break
        p_prev, q_prev, p_cur, q_cur = p_cur, q_cur, p_next, q_next
    return Rational(p_cur, q_cur)


# -- vectorized helpers over 1..q_max -------------------------------------


@lru_cache(maxsize=8)
def phi_table(q_max: int) -> np.ndarray:
    """phi[0..q_max] with phi[0] = 0, by sieve."""
    phi = np.arange(q_max + 1, dtype=np.int64)
    for p in range(2, q_max + 1):
        if phi[p] == p:  # untouched => prime
            phi[p::p] -= phi[p::p] // p
    return phi


@lru_cache(maxsize=8)
def mobius_table(q_max: int) -> np.ndarray:
    mu = np.ones(q_max + 1, dtype=np.int64)
    mu[0] = 0
    is_comp = np.zeros(q_max + 1, dtype=bool)
    for p in range(2, q_max + 1):
        if not is_comp[p]:
            is_comp[2 * p :: p] = True
            mu[p::p] *= -1
            mu[p * p :: p * p] = 0
    return mu


def ramanujan_sum_array(q: int, n: np.ndarray) -> np.ndarray:
    """c_q(n) for an integer array ``n`` via Hoelder's formula.

    c_q(n) = mu(q/g) * phi(q) / phi(q/g) with g = gcd(q, n).
    """
    n = np.asarray(n, dtype=np.int64)
    phi = phi_table(q)
    mu = mobius_table(q)
    g = np.gcd(n, q)
    r = q // g
    return mu[r] * (phi[q] // phi[r])


@dataclass(frozen=True)
class FareySystem:
    """All reduced a/q with Q <= q <= 5Q and 1 <= a <= q, sorted by value."""

    Q: int
    a: np.ndarray
    q: np.ndarray

    def __len__(self) -> int:
        return len(self.q)

    def fractions(self) -> list[Rational]:
        return [Rational(int(a), int(q)) for a, q in zip(self.a, self.q)]

    def values(self) -> np.ndarray:
        return self.a / self.q


def farey_count(Q: int) -> int:
    return int(phi_table(5 * Q)[Q : 5 * Q + 1].sum())


def farey_system(Q: int, max_fractions: int = FAREY_MAX_FRACTIONS) -> FareySystem:
    if Q < 1:
        raise ValueError("Q must be >= 1")
    total = farey_count(Q)
    if total > max_fractions:
        raise MemoryError(f"Farey system for Q={Q} has {total} fractions (cap {max_fractions})")
    a_parts, q_parts = [], []
    for q in range(Q, 5 * Q + 1):
        a = np.arange(1, q + 1, dtype=np.int64)
        a = a[np.gcd(a, q) == 1]
        a_parts.append(a)
        q_parts.append(np.full(a.size, q, dtype=np.int64))
    a = np.concatenate(a_parts)
    q = np.concatenate(q_parts)
    # sort exactly: a/q < a'/q' iff a*q' < a'*q; float keys are safe to presort,
    # ties/near ties are then resolved with integer cross-multiplication
    order = np.argsort(a / q, kind="stable")
    a, q = a[order], q[order]
    bad = np.flatnonzero(a[:-1] * q[1:] >= a[1:] * q[:-1])
    if bad.size:
        keys = sorted(zip(a.tolist(), q.tolist()), key=lambda f: Fraction(*f))
        a = np.array([f[0] for f in keys], dtype=np.int64)
        q = np.array([f[1] for f in keys], dtype=np.int64)
    return FareySystem(Q=Q, a=a, q=q)

"""Cubic Weyl sums, the kernel K_N and space-time sampling of

    F(x, t) = sum_{|n| <= N} a_n e(n x + n^3 t),     e(y) = exp(2 pi i y)

on the unit torus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.fft

from ._parallel import ordered_map, thread_count
from .arith import dirichlet_approx

_SPLIT = 134217729.0  # 2**27 + 1, Veltkamp splitter for float64


@dataclass
class CoeffSequence:
    """Coefficients a_n for n = -N..N (index i holds a_{i-N})."""

    N: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.N < 0 or self.coeffs.shape != (2 * self.N + 1,):
            raise ValueError(f"need 2N+1 = {2 * self.N + 1} coefficients, got {self.coeffs.shape}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficients must be finite")

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def normalized(self) -> "CoeffSequence":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero sequence")
        return CoeffSequence(self.N, self.coeffs / nrm)

    def is_unit(self, tol: float = 1e-12) -> bool:
        return abs(np.sum(np.abs(self.coeffs) ** 2) - 1.0) <= tol

    @classmethod
    def uniform(cls, N: int) -> "CoeffSequence":
        return cls(N, np.full(2 * N + 1, 1.0 / math.sqrt(2 * N + 1), dtype=np.complex128))

    @classmethod
    def delta(cls, N: int, n: int = 0) -> "CoeffSequence":
        c = np.zeros(2 * N + 1, dtype=np.complex128)
        c[n + N] = 1.0
        return cls(N, c)

    @classmethod
    def random_unit(cls, N: int, seed: int) -> "CoeffSequence":
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(2 * N + 1) + 1j * rng.standard_normal(2 * N + 1)
        return cls(N, c).normalized()


@dataclass(frozen=True)
class WeylPhase:
    t: float
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        for v in (self.t, self.b, self.c):
            if not math.isfinite(float(v)):
                raise ValueError("phase coefficients must be finite")


@dataclass
class SpaceTimeGrid:
    """Samples at (x_j, t_k) = (j/M_x, k/M_t); ``values[j, k]``."""

    M_x: int
    M_t: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.M_x < 1 or self.M_t < 1:
            raise ValueError("grid resolutions must be >= 1")
        if self.values.shape != (self.M_x, self.M_t):
            raise ValueError("values shape does not match (M_x, M_t)")

    @property
    def cell_measure(self) -> float:
        return 1.0 / (self.M_x * self.M_t)

    def mean(self, fn=None) -> float:
        v = self.values if fn is None else fn(self.values)
        return float(np.mean(v))


def _frac_product_exact_m(m: np.ndarray, t: float) -> np.ndarray:
    hi = m * t
    # TwoProduct error term via Veltkamp splitting
    mc = _SPLIT * m
    m_hi = mc - (mc - m)
    m_lo = m - m_hi
    tc = _SPLIT * t
    t_hi = tc - (tc - t)
    t_lo = t - t_hi
    lo = ((m_hi * t_hi - hi) + m_hi * t_lo + m_lo * t_hi) + m_lo * t_lo
    f = (hi - np.floor(hi)) + lo
    return f - np.floor(f)


def frac_product(m, t: float) -> np.ndarray:
    """Fractional part of m*t for integer m (int64) and float t.

    The product is formed exactly as hi + lo (Dekker) before reducing mod 1,
    so no precision is lost to the integer part of m*t.  Multipliers beyond
    2**52 are split as m = m1 * 2**26 + m0 so each piece is an exact float.
    """
    m = np.asarray(m, dtype=np.int64)
    t = float(t)
    if m.size == 0 or np.max(np.abs(m)) < (1 << 52):
        return _frac_product_exact_m(m.astype(np.float64), t)
    m1, m0 = np.divmod(m, 1 << 26)
    f = _frac_product_exact_m(m1.astype(np.float64), t * (1 << 26))
    f = f + _frac_product_exact_m(m0.astype(np.float64), t)
    return f - np.floor(f)


def _phase(n: np.ndarray, t, power: int) -> np.ndarray:
    if isinstance(t, Fraction):
        num, den = t.numerator, t.denominator
        vals = [Fraction((int(k) ** power * num) % den, den) for k in n]
        return np.array([float(v) for v in vals])
    return frac_product(n.astype(np.int64) ** power, t)


def _cis_fsum(phases: np.ndarray) -> complex:
    ang = 2.0 * np.pi * phases
    return complex(math.fsum(np.cos(ang)), math.fsum(np.sin(ang)))


def weyl_sum(N: int, phase: WeylPhase) -> complex:
    """sum_{n=1}^N e(t n^3 + b n^2 + c n) with mod-1 phase reduction and fsum."""
    if N < 1:
        raise ValueError("N must be >= 1")
    n = np.arange(1, N + 1, dtype=np.int64)
    ph = _phase(n, phase.t, 3) + _phase(n, phase.b, 2) + _phase(n, phase.c, 1)
    return _cis_fsum(ph - np.floor(ph))


def eval_kernel(N: int, x, t) -> complex:
    """K_N(x, t) = sum_{n=-N}^N e(t n^3 + x n)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    n = np.arange(-N, N + 1, dtype=np.int64)
    ph = _phase(n, t, 3) + _phase(n, x, 1)
    return _cis_fsum(ph - np.floor(ph))


def check_resolution(N: int, M_x: int, M_t: int, min_x: int | None = None, min_t: int = 2):
    min_x = 2 * N + 1 if min_x is None else min_x
    if M_x < min_x or M_t < min_t:
        raise ValueError(f"grid ({M_x}, {M_t}) below minimum ({min_x}, {min_t}) for N={N}")


def _slice_block(coeffs: np.ndarray, N: int, M_x: int, M_t: int, k0: int, k1: int) -> np.ndarray:
    """F on x-grid for time indices k0..k1-1, shape (M_x, k1-k0)."""
    n = np.arange(-N, N + 1, dtype=np.int64)
    k = np.arange(k0, k1, dtype=np.int64)
    # exact phase index (n^3 k) mod M_t, then e(index / M_t)
    idx = np.mod(np.outer(n**3 % M_t, k), M_t)
    rows = coeffs[:, None] * np.exp(2j * np.pi * idx / M_t)
    spec = np.zeros((M_x, k1 - k0), dtype=np.complex128)
    np.add.at(spec, np.mod(n, M_x), rows)
    return scipy.fft.ifft(spec, axis=0, norm="forward")


def iter_blocks(seq: CoeffSequence, M_x: int, M_t: int, max_cells: int = 1 << 22, threads=None):
    """Yield ``(k0, block)`` with block = F(x_j, t_k) for k0 <= k < k0 + width."""
    width = max(1, min(M_t, max_cells // M_x))
    starts = list(range(0, M_t, width))
    batch = thread_count(threads)
    for i in range(0, len(starts), batch):
        chunk = starts[i : i + batch]
        blocks = ordered_map(
            lambda k0: _slice_block(seq.coeffs, seq.N, M_x, M_t, k0, min(M_t, k0 + width)),
            chunk,
            threads,
        )
        yield from zip(chunk, blocks)


def sample_extremal(seq: CoeffSequence, M_x: int, M_t: int, threads=None) -> SpaceTimeGrid:
    check_resolution(seq.N, M_x, M_t)
    values = np.empty((M_x, M_t), dtype=np.complex128)
    for k0, block in iter_blocks(seq, M_x, M_t, threads=threads):
        values[:, k0 : k0 + block.shape[1]] = block
    return SpaceTimeGrid(M_x, M_t, values)


@dataclass
class WeylReport:
    N: int
    trials: int
    included: int
    max_ratio: float
    mean_ratio: float
    argmax_phase: WeylPhase | None
    argmax_q: int | None


def weyl_bound_report(N: int, trials: int, rng_seed: int, q_max: int | None = None) -> WeylReport:
    """Ratio |S| / (N^{1/4} q^{1/4}) over random phases whose Dirichlet denominator is >= N^2.

    ``q_max`` (default N^3) bounds the denominators searched for t.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    q_max = N**3 if q_max is None else q_max
    rng = np.random.default_rng(rng_seed)
    draws = rng.random((trials, 3))
    ratios, best, best_phase, best_q = [], -1.0, None, None
    for t, b, c in draws:
        q = dirichlet_approx(float(t), q_max).q
        if q < N * N:
            continue
        phase = WeylPhase(float(t), float(b), float(c))
        r = abs(weyl_sum(N, phase)) / (N**0.25 * q**0.25)
        ratios.append(r)
        if r > best:
            best, best_phase, best_q = r, phase, q
    if not ratios:
        return WeylReport(N, trials, 0, math.nan, math.nan, None, None)
    return WeylReport(N, trials, len(ratios), best, float(np.mean(ratios)), best_phase, best_q)

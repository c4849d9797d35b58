"""Farey cutoff Phi and the split K_N = K_1 + K_2.

Phi(t) = sum_{Q <= q <= 5Q} sum_{(a, q) = 1} phi((t - a/q) q^2), periodized, with
phi a fixed smooth bump on [1/200, 1/100].  Then

    K_1 = K_N * Phi / Phi^(0),     K_2 = K_N - K_1,

and K_2^(n1, n2) = -Phi^(n2 - n1^3) / Phi^(0) off the curve, 0 on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.fft
from scipy.integrate import quad, quad_vec

from .arith import FareySystem, farey_system, mobius_table, phi_table
from .expsum import check_resolution

BUMP_LO = 1.0 / 200
BUMP_HI = 1.0 / 100
_CENTER = 3.0 / 400
_HALF = 1.0 / 400
_TAYLOR_OMEGA = 1.0
_TAYLOR_TERMS = 12


def _bump_unit(u):
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


class BumpProfile:
    """phi(x) = exp(-1/(1-u^2)), u = 400 (x - 3/400), zero off [1/200, 1/100]."""

    lo = BUMP_LO
    hi = BUMP_HI

    def __call__(self, x):
        return _bump_unit((np.asarray(x, dtype=np.float64) - _CENTER) / _HALF)

    @cached_property
    def even_moments(self) -> np.ndarray:
        """int u^{2j} exp(-1/(1-u^2)) du over [-1, 1], by adaptive quadrature."""
        f = lambda u, j: u ** (2 * j) * math.exp(-1.0 / (1.0 - u * u))
        return np.array(
            [2 * quad(f, 0, 1, args=(j,), epsabs=1e-16, epsrel=1e-13, limit=200)[0] for j in range(_TAYLOR_TERMS)]
        )

    def _cos_transform(self, omega: np.ndarray) -> np.ndarray:
        """B(omega) = int exp(-1/(1-u^2)) cos(omega u) du."""
        shape = np.shape(omega)
        omega = np.abs(np.atleast_1d(np.asarray(omega, dtype=np.float64))).ravel()
        out = np.empty_like(omega)
        small = omega <= _TAYLOR_OMEGA
        if np.any(small):
            w2 = omega[small] ** 2
            mom = self.even_moments
            acc = np.zeros_like(w2)
            for j in reversed(range(_TAYLOR_TERMS)):
                acc = acc * w2 + ((-1) ** j) * mom[j] / math.factorial(2 * j)
            out[small] = acc
        big = np.flatnonzero(~small)
        if big.size:
            # trapezoid on [-1, 1]; the integrand vanishes to all orders at the ends
            nodes = int(2048 + 16 * omega[big].max())
            u = np.linspace(-1, 1, nodes + 1)[1:-1]
            wts = _bump_unit(u) * (2.0 / nodes)
            for i in range(0, big.size, 4096):
                sel = big[i : i + 4096]
                out[sel] = np.cos(np.outer(omega[sel], u)) @ wts
        return out.reshape(shape)

    def fourier(self, xi) -> np.ndarray:
        """Real-line transform int phi(x) e^{-2 pi i x xi} dx."""
        xi = np.asarray(xi, dtype=np.float64)
        omega = 2 * np.pi * xi * _HALF
        return np.exp(-2j * np.pi * xi * _CENTER) * _HALF * self._cos_transform(omega)

    def fourier_quad(self, xi: float) -> complex:
        """Same transform by direct adaptive quadrature (independent route)."""
        re = quad(lambda x: float(self(x)) * math.cos(2 * math.pi * x * xi), self.lo, self.hi, epsabs=1e-16, limit=400)[0]
        im = quad(lambda x: -float(self(x)) * math.sin(2 * math.pi * x * xi), self.lo, self.hi, epsabs=1e-16, limit=400)[0]
        return complex(re, im)

    def fourier_lattice(self, q: int, count: int, per_support: int = 512) -> np.ndarray:
        """Transform at xi = k / q^2 for k = 0..count-1, via one FFT of phi sampled with period q^2."""
        h = (self.hi - self.lo) / per_support
        n = q * q * 200 * per_support
        if count > n // 2:
            raise ValueError("requested lattice exceeds the sampled band")
        j0 = 200 * per_support // 200  # index of x = 1/200
        j = np.arange(j0, 2 * j0 + 1)
        samples = np.zeros(2 * j0 + 1)
        samples[j0:] = self(j * h)
        # the sample block sits at the start of a length-n zero-padded signal
        return h * scipy.fft.rfft(samples, n=n)[:count]


@dataclass
class PhiFunction:
    Q: int
    farey: FareySystem = field(repr=False)
    profile: BumpProfile = field(repr=False)

    def __post_init__(self):
        x0 = np.where(self.farey.a == self.farey.q, 0.0, self.farey.a / self.farey.q)
        order = np.argsort(x0, kind="stable")
        self._x0 = x0[order]
        self._q2 = (self.farey.q[order].astype(np.float64)) ** 2
        self._a = self.farey.a[order]
        self._q = self.farey.q[order]
        self._lo = self._x0 + BUMP_LO / self._q2

    def __call__(self, t) -> np.ndarray:
        t = np.mod(np.asarray(t, dtype=np.float64), 1.0)
        idx = np.searchsorted(self._lo, t, side="right") - 1
        idx = np.clip(idx, 0, len(self._lo) - 1)
        y = (t - self._x0[idx]) * self._q2[idx]
        return self.profile(y)

    def support_centers(self) -> np.ndarray:
        return self._x0 + _CENTER / self._q2

    def support_intervals(self) -> list[tuple[Fraction, Fraction]]:
        """Exact [a/q + 1/(200 q^2), a/q + 1/(100 q^2)] per fraction (1/1 wrapped to 0/1)."""
        out = []
        for a, q in zip(self._a.tolist(), self._q.tolist()):
            base = Fraction(a % q, q)
            out.append((base + Fraction(1, 200 * q * q), base + Fraction(1, 100 * q * q)))
        return sorted(out)

    @cached_property
    def hat0(self) -> float:
        """Phi^(0) = sum phi_Euler(q)/q^2 * F phi(0)."""
        phi = phi_table(5 * self.Q)
        q = np.arange(self.Q, 5 * self.Q + 1)
        return float(np.sum(phi[q] / q.astype(float) ** 2) * self.profile.fourier(0.0).real)


def make_phi(Q: int) -> PhiFunction:
    Q = int(Q)
    return PhiFunction(Q, farey_system(Q), BumpProfile())


def phi_fourier(phi: PhiFunction, k) -> np.ndarray:
    """Phi^(k) = sum_q c_q(k) / q^2 * F phi(k / q^2), with the a-sum collapsed to Ramanujan sums."""
    k = np.atleast_1d(np.asarray(k, dtype=np.int64))
    Q = phi.Q
    phis, mus = phi_table(5 * Q), mobius_table(5 * Q)
    out = np.zeros(k.shape, dtype=np.complex128)
    for q in range(Q, 5 * Q + 1):
        r = q // np.gcd(k, q)
        cq = mus[r] * (phis[q] // phis[r])
        nz = cq != 0
        if not np.any(nz):
            continue
        out[nz] += cq[nz] * phi.profile.fourier(k[nz] / (q * q)) / (q * q)
    return out


def phi_fourier_dense(phi: PhiFunction, k_max: int) -> np.ndarray:
    """Phi^(k) for k = 0..k_max using FFT lattices of F phi (for full synthesis)."""
    Q = phi.Q
    phis, mus = phi_table(5 * Q), mobius_table(5 * Q)
    k = np.arange(k_max + 1, dtype=np.int64)
    out = np.zeros(k_max + 1, dtype=np.complex128)
    for q in range(Q, 5 * Q + 1):
        r = q // np.gcd(k, q)
        cq = mus[r] * (phis[q] // phis[r])
        # enough samples that the band reaches past k_max plus the decay range of F phi
        per_support = max(512, -(-(k_max + 40_000 * q * q) // (100 * q * q)))
        out += cq * phi.profile.fourier_lattice(q, k_max + 1, per_support) / (q * q)
    return out


def phi_fourier_direct(phi: PhiFunction, k):
    """int_0^1 Phi(t) e^{-2 pi i k t} dt bump by bump with adaptive quadrature (oracle).

    ``k`` may be an integer or an array; the array case integrates all k at once.
    """
    scalar = np.ndim(k) == 0
    k = np.atleast_1d(np.asarray(k, dtype=np.float64))
    total = np.zeros(k.shape, dtype=np.complex128)
    prof = phi.profile
    for (lo, hi) in phi.support_intervals():
        lo, hi = float(lo), float(hi)
        q2 = (BUMP_HI - BUMP_LO) / (hi - lo)
        x0 = lo - BUMP_LO / q2

        def f(t):
            w = float(prof((t - x0) * q2))
            ang = 2 * math.pi * k * t
            return np.concatenate([w * np.cos(ang), -w * np.sin(ang)])

        v = quad_vec(f, lo, hi, epsabs=1e-17, epsrel=1e-12, limit=400)[0]
        total += v[: k.size] + 1j * v[k.size :]
    return complex(total[0]) if scalar else total


def supports_disjoint(phi: PhiFunction) -> bool:
    iv = phi.support_intervals()
    return all(a[1] < b[0] for a, b in zip(iv, iv[1:]))


@dataclass
class KernelDecomposition:
    N: int
    Q: int
    phi: PhiFunction = field(repr=False)

    @property
    def hat0(self) -> float:
        return self.phi.hat0

    def k1(self, x, t) -> np.ndarray:
        """K_1(x, t) = K_N(x, t) Phi(t) / Phi^(0) (broadcast over x, t)."""
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return kernel_values(self.N, x, t) * self.phi(t) / self.hat0

    def k2_hat(self, n1, n2) -> np.ndarray:
        n1 = np.asarray(n1, dtype=np.int64)
        n2 = np.asarray(n2, dtype=np.int64)
        k = n2 - n1**3
        vals = -phi_fourier(self.phi, np.where(k == 0, 1, k).ravel()).reshape(k.shape) / self.hat0
        return np.where(k == 0, 0.0, vals)

    def k2_table(self) -> tuple[np.ndarray, np.ndarray]:
        """K_2^(n1, n2) for |n1| <= N, |n2| <= N^3, rows indexed by n1 + N and columns by n2 + N^3.

        Also returns Phi^(k) for k = 0..2N^3 (positive side; Phi is real).
        """
        N = self.N
        kk = np.arange(0, 2 * N**3 + 1, dtype=np.int64)
        pos = phi_fourier(self.phi, kk)
        n1 = np.arange(-N, N + 1, dtype=np.int64)[:, None]
        n2 = np.arange(-(N**3), N**3 + 1, dtype=np.int64)[None, :]
        k = n2 - n1**3
        vals = np.where(k >= 0, pos[np.abs(k)], np.conj(pos[np.abs(k)]))
        table = np.where(k == 0, 0.0, -vals / self.hat0)
        return table, pos

    def k1_sup_grid(self, M_x: int | None = None, chunk: int = 8192) -> float:
        """max |K_1| over x_j = j/M_x and t at every support-interval center.

        Phi vanishes off its support intervals, which are far narrower
        (<= 1/(200 Q^2)) than the 1/N^3 scale on which K_N varies in t, and
        the bump peaks at the interval center.
        """
        N = self.N
        M_x = 8 * N if M_x is None else M_x
        check_resolution(N, M_x, 2)
        centers = self.phi.support_centers()
        peak = float(self.phi.profile(_CENTER))
        n = np.arange(-N, N + 1, dtype=np.int64)
        best = 0.0
        for i in range(0, centers.size, chunk):
            t = centers[i : i + chunk]
            ph = np.mod(np.outer(t, (n**3).astype(float)), 1.0)
            spec = np.zeros((t.size, M_x), dtype=np.complex128)
            spec[:, np.mod(n, M_x)] = np.exp(2j * np.pi * ph)
            vals = np.abs(scipy.fft.ifft(spec, axis=1, norm="forward"))
            best = max(best, float(vals.max()))
        return best * peak / self.hat0


def kernel_values(N: int, x, t) -> np.ndarray:
    n = np.arange(-N, N + 1, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    ph = np.mod(x[..., None] * n + t[..., None] * n**3, 1.0)
    return np.exp(2j * np.pi * ph).sum(axis=-1)


def decompose_kernel(N: int, Q) -> KernelDecomposition:
    Q = int(Q)
    if not N * N <= Q <= N**3:
        raise ValueError(f"Q={Q} outside [N^2, N^3] = [{N * N}, {N**3}]")
    return KernelDecomposition(N, Q, make_phi(Q))


@dataclass
class Prop1Row:
    N: int
    Q: int
    hat0: float
    sup_k1: float
    ratio1: float
    max_k2: float
    ratio2: float
    ratio2_log: float


@dataclass
class Prop1Report:
    rows: list[Prop1Row]
    drift1: float
    drift2: float
    drift2_log: float
    limit: float = 4.0

    @property
    def passed(self) -> bool:
        return self.drift1 < self.limit and self.drift2 < self.limit and self.drift2_log < self.limit


def _drift(vals) -> float:
    vals = [v for v in vals]
    return max(vals) / min(vals) if vals and min(vals) > 0 else math.inf


def verify_prop1(N_list, Q_rule=lambda N: N * N, M_x: int | None = None) -> Prop1Report:
    """sup|K_1| / (N^{1/4} Q^{1/4}) and Q max|K_2^| per N, with their drift across N."""
    rows = []
    for N in N_list:
        dec = decompose_kernel(N, Q_rule(N))
        sup1 = dec.k1_sup_grid(M_x)
        table, _ = dec.k2_table()
        max2 = float(np.abs(table).max())
        r2 = dec.Q * max2
        rows.append(
            Prop1Row(N, dec.Q, dec.hat0, sup1, sup1 / (N**0.25 * dec.Q**0.25), max2, r2, r2 / math.log(2 + N))
        )
    return Prop1Report(
        rows,
        _drift([r.ratio1 for r in rows]),
        _drift([r.ratio2 for r in rows]),
        _drift([r.ratio2_log for r in rows]),
    )

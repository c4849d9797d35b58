"""Discrete X_{s,b} and Y_s norms on a periodic time window, dyadic projectors and scaling checks.

Conventions (kept consistent everywhere):
  * fields are stored as spatial Fourier coefficients u(n, t_j), |n| <= N_x, on
    t_j = -T_w/2 + j T_w / M_t;
  * uhat(n, lambda) = dt sum_j u(n, t_j) e^{-i lambda t_j} on lambda_j = 2 pi j / T_w;
  * lambda integrals use the measure d lambda / 2 pi, i.e. a lattice sum times 1/T_w,
    so X_{0,0} is exactly the L^2 norm over the torus (normalized) times the window;
  * <x> = 1 + |x|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy.interpolate import CubicSpline

from . import gkdv


def bracket(x):
    return 1.0 + np.abs(x)


@dataclass
class SpaceTimeField:
    N_x: int
    window: float
    M_t: int
    values: np.ndarray  # (M_t, 2 N_x + 1): u(n, t_j), column n + N_x

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError("window must be positive")
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.M_t, 2 * self.N_x + 1):
            raise ValueError("values must have shape (M_t, 2 N_x + 1)")

    @property
    def n(self) -> np.ndarray:
        return np.arange(-self.N_x, self.N_x + 1)

    @property
    def dt(self) -> float:
        return self.window / self.M_t

    @property
    def times(self) -> np.ndarray:
        return -self.window / 2 + self.dt * np.arange(self.M_t)

    @property
    def lambdas(self) -> np.ndarray:
        return 2 * np.pi * scipy.fft.fftfreq(self.M_t, d=self.dt)

    @classmethod
    def zeros(cls, N_x, window, M_t):
        return cls(N_x, window, M_t, np.zeros((M_t, 2 * N_x + 1), dtype=np.complex128))

    @classmethod
    def from_function(cls, N_x, window, M_t, fn):
        """fn(n[None, :], t[:, None]) -> u(n, t)."""
        f = cls.zeros(N_x, window, M_t)
        f.values = np.asarray(fn(f.n[None, :], f.times[:, None]), dtype=np.complex128) * np.ones_like(f.values)
        return f

    def spectrum(self) -> np.ndarray:
        """uhat(n, lambda_j), shape (M_t, 2 N_x + 1), lambdas in FFT order."""
        ph = np.exp(-1j * self.lambdas * self.times[0])
        return self.dt * scipy.fft.fft(self.values, axis=0) * ph[:, None]

    def l2_norm(self) -> float:
        return math.sqrt(self.dt * float(np.sum(np.abs(self.values) ** 2)))

    def physical(self, M_x: int | None = None) -> np.ndarray:
        """u(x_i, t_j) on x_i = 2 pi i / M_x, shape (M_t, M_x)."""
        M_x = 4 * self.N_x + 2 if M_x is None else M_x
        if M_x < 2 * self.N_x + 1:
            raise ValueError("M_x too small for the band")
        spec = np.zeros((self.M_t, M_x), dtype=np.complex128)
        spec[:, np.mod(self.n, M_x)] = self.values
        return scipy.fft.ifft(spec, axis=1, norm="forward")

    def scaled(self, c) -> "SpaceTimeField":
        return SpaceTimeField(self.N_x, self.window, self.M_t, c * self.values)


def window_samples(N_x: int, window: float, factor: float = 64.0, cap: int = 1 << 22, N_lambda: int | None = None) -> int:
    """Power of two >= factor N^3 T_w / 2 pi (N = N_lambda or N_x), capped."""
    N = N_x if N_lambda is None else N_lambda
    need = max(64, factor * N**3 * window / (2 * np.pi))
    return int(min(cap, 1 << math.ceil(math.log2(need))))


def _weights(f: SpaceTimeField, s: float, b: float):
    lam = f.lambdas[:, None]
    n = f.n[None, :].astype(np.float64)
    return bracket(n) ** s, bracket(lam - n**3) ** b


def xsb_norm(f: SpaceTimeField, s: float, b: float) -> float:
    ws, wb = _weights(f, s, b)
    spec = f.spectrum()
    return math.sqrt(float(np.sum((ws * wb * np.abs(spec)) ** 2)) / f.window)


def _l1_lambda(f: SpaceTimeField, s: float, b: float = 0.0) -> float:
    """|| <n>^s int <lambda - n^3>^b |uhat| d lambda / 2 pi ||_{l^2_n}."""
    ws, wb = _weights(f, s, b)
    row = np.sum(wb * np.abs(f.spectrum()), axis=0) / f.window
    return math.sqrt(float(np.sum((ws[0] * row) ** 2)))


def ys_norm(f: SpaceTimeField, s: float) -> float:
    return xsb_norm(f, s, 0.5) + _l1_lambda(f, s)


def dual_norm(f: SpaceTimeField, s: float) -> float:
    """X_{s,-1/2} norm plus the <lambda - n^3>^{-1} weighted l^1 term."""
    return xsb_norm(f, s, -0.5) + _l1_lambda(f, s, -1.0)


# -- dyadic projectors -----------------------------------------------------


@dataclass(frozen=True)
class DyadicProjector:
    """Sharp cutoff: axis 'space' keeps K/2 < |n| <= K (|n| <= 1 for K = 1);
    axis 'time' keeps L/2 < |lambda - n^3| <= L (|lambda - n^3| <= 1 for L = 1)."""

    K: int
    axis: str = "space"

    def mask(self, f: SpaceTimeField) -> np.ndarray:
        if self.axis == "space":
            a = np.abs(f.n)[None, :] * np.ones((f.M_t, 1))
        elif self.axis == "time":
            a = np.abs(f.lambdas[:, None] - f.n[None, :].astype(np.float64) ** 3)
        else:
            raise ValueError("axis must be 'space' or 'time'")
        lo = -1 if self.K == 1 else self.K / 2
        return (a > lo) & (a <= self.K)

    def __call__(self, f: SpaceTimeField) -> SpaceTimeField:
        if self.axis == "space":
            return SpaceTimeField(f.N_x, f.window, f.M_t, f.values * self.mask(f))
        spec = f.spectrum() * self.mask(f)
        ph = np.exp(1j * f.lambdas * f.times[0])
        vals = scipy.fft.ifft(spec * ph[:, None], axis=0) / f.dt
        return SpaceTimeField(f.N_x, f.window, f.M_t, vals)


def dyadic_scales(top: float) -> list[int]:
    out, K = [1], 2
    while K / 2 < top:
        out.append(K)
        K *= 2
    return out


def low_pass(f: SpaceTimeField, K: float) -> SpaceTimeField:
    """P_K: keep |n| <= K."""
    return SpaceTimeField(f.N_x, f.window, f.M_t, f.values * (np.abs(f.n) <= K)[None, :])


def partition_defect(f: SpaceTimeField, axis: str = "space") -> float:
    if axis == "space":
        scales = dyadic_scales(f.N_x)
    else:
        top = float(np.max(np.abs(f.lambdas[:, None] - f.n[None, :].astype(float) ** 3)))
        scales = dyadic_scales(top)
    total = sum(DyadicProjector(K, axis)(f).values for K in scales)
    return float(np.max(np.abs(total - f.values)))


# -- bump ---------------------------------------------------------------


def _g(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def psi(t):
    """Smooth cutoff: 1 on |t| <= 1, 0 for |t| >= 2 (exp(-1/x) family)."""
    a = np.abs(np.asarray(t, dtype=np.float64))
    num = _g(2.0 - a)
    return num / (num + _g(a - 1.0))


def psi_delta(t, delta):
    return psi(np.asarray(t) / delta)


# -- checks --------------------------------------------------------------


def hs_norm(coeffs, s: float) -> float:
    """(sum <n>^{2s} |phi^(n)|^2)^{1/2} for coefficients indexed n = -N..N."""
    coeffs = np.asarray(coeffs)
    N = (coeffs.size - 1) // 2
    n = np.arange(-N, N + 1)
    return math.sqrt(float(np.sum(bracket(n) ** (2 * s) * np.abs(coeffs) ** 2)))


def free_evolution(coeffs, delta: float, window: float, M_t: int) -> SpaceTimeField:
    """psi_delta(t) e^{-t d_x^3} phi: coefficients psi(t / delta) e^{i n^3 t} phi^(n)."""
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    N = (coeffs.size - 1) // 2
    f = SpaceTimeField.zeros(N, window, M_t)
    t = f.times[:, None]
    n = f.n[None, :].astype(np.float64)
    f.values = psi_delta(t, delta) * np.exp(1j * np.mod(n**3 * t, 2 * np.pi)) * coeffs[None, :]
    return f


@dataclass
class RatioReport:
    deltas: list
    ratios: list
    drift: float
    limit: float = 4.0

    @property
    def passed(self) -> bool:
        return self.drift <= self.limit


def _drift(vals) -> float:
    vals = list(vals)
    if not vals:
        return math.inf
    if max(vals) == 0:
        return 1.0
    return max(vals) / min(vals) if min(vals) > 0 else math.inf


def linear_estimate_check(coeffs, s: float, deltas=(0.2, 0.1, 0.05, 0.025), M_t: int | None = None) -> RatioReport:
    """||psi_delta e^{-t d^3} phi||_{Y_s} / ||phi||_{H^s} across delta on the window 8 max(delta)."""
    if s <= 0.5:
        raise ValueError("s must exceed 1/2")
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    N = (coeffs.size - 1) // 2
    window = 8 * max(deltas)
    M_t = window_samples(max(N, 1), window) if M_t is None else M_t
    h = hs_norm(coeffs, s)
    ratios = []
    for d in deltas:
        if h == 0:
            ratios.append(0.0)
            continue
        ratios.append(ys_norm(free_evolution(coeffs, d, window, M_t), s) / h)
    return RatioReport(list(deltas), ratios, _drift(ratios))


def state_to_coeffs(state: gkdv.SpectralState, N_x: int) -> np.ndarray:
    n = np.arange(-N_x, N_x + 1)
    return state.uhat[np.mod(n, state.M)]


def solution_field(
    phi: gkdv.SpectralState, nl: gkdv.Nonlinearity, half_span: float, window: float, M_t: int, dt: float = 2e-5
) -> SpaceTimeField:
    """Solver output on [-half_span, half_span] sampled on the window grid (zero elsewhere).

    Negative times use the reversal symmetry u(x, -t) = v(-x, t), where v solves the
    same equation with data phi(-x).  Samples between steps are interpolated in the
    interaction picture e^{-i n^3 t} uhat(n, t), which varies slowly.
    """
    M = phi.M
    N_x = int((M - 1) // 3)
    steps = int(math.ceil(half_span / dt))
    cfg = gkdv.SolverConfig(nl, dt=dt, T=steps * dt, save_every=1, check_every=steps)
    n = np.arange(-N_x, N_x + 1)
    fwd = gkdv.solve(phi, cfg)
    mirror = gkdv.SpectralState(M, phi.uhat[(-np.arange(M)) % M])
    bwd = gkdv.solve(mirror, cfg)
    tf = fwd.times
    wf = np.array([st.uhat[np.mod(n, M)] for st in fwd.states]) * np.exp(-1j * np.outer(tf, n.astype(float) ** 3))
    # u(n, -t) = v(-n, t)
    ub = np.array([st.uhat[np.mod(-n, M)] for st in bwd.states])
    tb = -bwd.times
    wb = ub * np.exp(-1j * np.outer(tb, n.astype(float) ** 3))
    t_all = np.concatenate([tb[::-1], tf[1:]])
    w_all = np.concatenate([wb[::-1], wf[1:]])
    field_ = SpaceTimeField.zeros(N_x, window, M_t)
    t = field_.times
    sel = (t >= -half_span) & (t <= half_span)
    spline = CubicSpline(t_all, w_all, axis=0)
    field_.values[sel] = spline(t[sel]) * np.exp(1j * np.mod(np.outer(t[sel], n.astype(float) ** 3), 2 * np.pi))
    return field_


def nonlinear_term(f: SpaceTimeField, nl: gkdv.Nonlinearity, band: int, t_lo: float, t_hi: float) -> SpaceTimeField:
    """w = (F(u) - mean_x F(u)) u_x restricted (sharply) to t in [t_lo, t_hi], kept for |n| <= band."""
    M_x = 1 << math.ceil(math.log2(2 * band + 2))
    M_x = max(M_x, 4 * f.N_x + 2)
    sel = (f.times >= t_lo) & (f.times <= t_hi)
    out = SpaceTimeField.zeros(band, f.window, f.M_t)
    if not np.any(sel) or nl.is_zero:
        return out
    sub = SpaceTimeField(f.N_x, f.window, int(sel.sum()), f.values[sel])
    u = sub.physical(M_x).real
    dsub = SpaceTimeField(f.N_x, f.window, sub.M_t, sub.values * 1j * sub.n[None, :])
    ux = dsub.physical(M_x).real
    Fu = nl.F(u)
    w = (Fu - Fu.mean(axis=1, keepdims=True)) * ux
    wh = scipy.fft.fft(w, axis=1, norm="forward")
    nb = np.arange(-band, band + 1)
    out.values[sel] = wh[:, np.mod(nb, M_x)]
    return out


@dataclass
class ScalingReport:
    deltas: list
    lhs: list
    ys: list
    normalized: list
    theta: float
    intercept: float

    @property
    def passed(self) -> bool:
        return self.theta > 0


def nonlinear_scaling_check(
    phi: gkdv.SpectralState,
    nl: gkdv.Nonlinearity,
    s: float,
    deltas=(0.2, 0.1, 0.05, 0.025),
    power: int | None = None,
    dt: float = 2e-5,
    band_factor: int = 4,
    M_t: int | None = None,
) -> ScalingReport:
    """Fit theta in LHS(delta) / ||u||_{Y_s}^{k+1} ~ delta^theta.

    LHS is the dual norm of w restricted to [0, delta]; the Y_s norm is that of
    psi_delta u, built from a solve over [-2 delta_max, 2 delta_max].
    ``power`` is k (k+1 in the exponent); for non-polynomial F it defaults to 1.
    """
    if s <= 0.5:
        raise ValueError("s must exceed 1/2")
    k = 1 if power is None else power
    window = 8 * max(deltas)
    N_x = int((phi.M - 1) // 3)
    band = band_factor * N_x
    M_t = window_samples(N_x, window, N_lambda=band, factor=8.0) if M_t is None else M_t
    u = solution_field(phi, nl, 2 * max(deltas), window, M_t, dt)
    lhs, ys, norm = [], [], []
    for d in deltas:
        w = nonlinear_term(u, nl, band, 0.0, d)
        L = dual_norm(w, s)
        cut = SpaceTimeField(u.N_x, window, M_t, u.values * psi_delta(u.times, d)[:, None])
        Y = ys_norm(cut, s)
        lhs.append(L)
        ys.append(Y)
        norm.append(L / Y ** (k + 1) if Y > 0 else 0.0)
    if min(norm) <= 0:
        raise ValueError("degenerate fit: zero left side")
    slope, icpt = np.polyfit(np.log(deltas), np.log(norm), 1)
    return ScalingReport(list(deltas), lhs, ys, norm, float(slope), float(icpt))


def lp_telescope_check(f: SpaceTimeField, F, K_min: int, K_max: int, M_x: int | None = None) -> float:
    """sup |sum_K [F(P_K u) - F(P_{K/2} u)] + F(P_{K_min/2} u) - F(P_{K_max} u)| over the sample grid."""
    scales = [K for K in dyadic_scales(K_max) if K_min <= K <= K_max]
    phys = lambda K: F(low_pass(f, K).physical(M_x).real)
    total = phys(K_min / 2) - phys(K_max)
    for K in scales:
        total = total + (phys(K) - phys(K / 2))
    return float(np.max(np.abs(total)))


@dataclass
class EmbeddingReport:
    """``growth`` = max ratio / ratio at the coarsest level; boundedness means no upward drift."""

    which: str
    levels: list
    ratios: list
    drift: float
    growth: float
    limit: float = 4.0

    @property
    def passed(self) -> bool:
        return self.growth <= self.limit


EMBEDDINGS = {
    # name: (s, b, q (time exponent), r (space exponent))
    "emb1": (0.0, 1.0 / 3.0, 4.0, 4.0),
    "emb2": (0.25, 0.5, 6.0, 6.0),
    "emb3": (0.25, 0.25, 3.0, 3.0),
}


def mixed_norm(f: SpaceTimeField, q: float, r: float, M_x: int | None = None) -> float:
    """|| ||u(t)||_{L^r_x} ||_{L^q_t} with normalized x measure."""
    u = np.abs(f.physical(M_x or 8 * f.N_x + 8))
    inner = np.mean(u**r, axis=1) ** (1.0 / r)
    return float((f.dt * np.sum(inner**q)) ** (1.0 / q))


def random_field(N_x: int, window: float, M_t: int, seed: int) -> SpaceTimeField:
    """Free wave with random unit data, cut off by psi, plus a random off-curve component."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(2 * N_x + 1) + 1j * rng.standard_normal(2 * N_x + 1)
    c = rng.standard_normal(2 * N_x + 1) + 1j * rng.standard_normal(2 * N_x + 1)
    mu = rng.uniform(-(N_x**3), N_x**3, 2 * N_x + 1)
    f = free_evolution(a / np.linalg.norm(a), window / 8, window, M_t)
    t = f.times[:, None]
    f.values += 0.5 * psi_delta(t, window / 8) * c[None, :] / np.linalg.norm(c) * np.exp(1j * mu[None, :] * t)
    return f


def embedding_check(which: str, levels=(4, 8, 16), seeds=range(3), window: float = 0.8) -> EmbeddingReport:
    """max over seeds of ||u||_{L^q_t L^r_x} / ||u||_{X_{s,b}} at each band level N_x."""
    s, b, q, r = EMBEDDINGS[which]
    ratios = []
    for N_x in levels:
        M_t = window_samples(N_x, window, factor=16.0)
        best = 0.0
        for seed in seeds:
            f = random_field(N_x, window, M_t, seed)
            best = max(best, mixed_norm(f, q, r) / xsb_norm(f, s, b))
        ratios.append(best)
    return EmbeddingReport(which, list(levels), ratios, _drift(ratios), max(ratios) / ratios[0])

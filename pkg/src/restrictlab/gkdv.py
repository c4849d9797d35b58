"""Pseudospectral solver for periodic u_t + u_xxx + F(u) u_x = 0 on [0, 2 pi).

Coefficients follow u(x) = sum_n uhat(n) e^{inx}, i.e. uhat = fft(u) / M, stored in
numpy FFT order.  Integrals over the torus use the normalized measure dx / 2 pi,
so "mass" is uhat(0) and "momentum" is sum |uhat|^2.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.fft

MAGIC = b"GKDV0001".ljust(16, b"\0")
BINARY_VERSION = 1


class BlowupError(FloatingPointError):
    def __init__(self, time: float):
        super().__init__(f"non-finite state at t={time:.6g}")
        self.time = time


@dataclass(frozen=True)
class Nonlinearity:
    """F and an antiderivative G (G' = F); the flux is written as d/dx G(u)."""

    name: str
    F: Callable[[np.ndarray], np.ndarray]
    G: Callable[[np.ndarray], np.ndarray]
    is_zero: bool = False


def power_nonlinearity(k: int) -> Nonlinearity:
    return Nonlinearity(f"u^{k}", lambda u: u**k, lambda u: u ** (k + 1) / (k + 1))


def sine_nonlinearity() -> Nonlinearity:
    return Nonlinearity("sin(u)", np.sin, lambda u: 1.0 - np.cos(u))


ZERO = Nonlinearity("0", np.zeros_like, np.zeros_like, is_zero=True)


def nonlinearity_from_name(name: str) -> Nonlinearity:
    """'0', 'sin', or an integer power k."""
    name = str(name).strip()
    if name in ("0", "zero", "none"):
        return ZERO
    if name in ("sin", "sin(u)"):
        return sine_nonlinearity()
    return power_nonlinearity(int(name))


def freqs(M: int) -> np.ndarray:
    """Integer frequencies in FFT order, with M/2 mapped to +M/2."""
    n = np.fft.fftfreq(M, 1.0 / M).astype(np.int64)
    n[M // 2] = M // 2
    return n


def band_mask(M: int) -> np.ndarray:
    """Modes kept by the 2/3 rule: |n| < M/3."""
    return 3 * np.abs(freqs(M)) < M


@dataclass
class SpectralState:
    M: int
    uhat: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if self.M < 4 or self.M & (self.M - 1):
            raise ValueError("M must be a power of two >= 4")
        self.uhat = np.asarray(self.uhat, dtype=np.complex128)
        if self.uhat.shape != (self.M,):
            raise ValueError("uhat must have length M")

    @property
    def n(self) -> np.ndarray:
        return freqs(self.M)

    @classmethod
    def from_values(cls, u, time=0.0):
        u = np.asarray(u, dtype=np.float64)
        return cls(u.size, scipy.fft.fft(u) / u.size, time)

    def values(self) -> np.ndarray:
        return scipy.fft.ifft(self.uhat * self.M).real

    def grid(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M

    def reality_defect(self) -> float:
        mirror = self.uhat[(-np.arange(self.M)) % self.M]
        return float(np.max(np.abs(self.uhat - np.conj(mirror))))

    def mass(self) -> float:
        return float(self.uhat[0].real)

    def momentum(self) -> float:
        return float(np.sum(np.abs(self.uhat) ** 2))

    def hs_norm(self, s: float) -> float:
        w = (1.0 + self.n.astype(np.float64) ** 2) ** s
        return math.sqrt(float(np.sum(w * np.abs(self.uhat) ** 2)))

    def copy(self) -> "SpectralState":
        return SpectralState(self.M, self.uhat.copy(), self.time)


def hs_distance(a: SpectralState, b: SpectralState, s: float = 0.0) -> float:
    return SpectralState(a.M, a.uhat - b.uhat).hs_norm(s)


@dataclass
class SobolevSpec:
    s: float
    seed: int = 0
    amplitude: float = 0.1


def make_hs_data(M: int, spec: SobolevSpec) -> SpectralState:
    """phi^(n) = amplitude <n>^{-s-1/2-0.01} e^{i theta_n} on the dealiased band, real-symmetrized."""
    n = freqs(M)
    rng = np.random.default_rng(spec.seed)
    theta = rng.uniform(0, 2 * np.pi, M)
    mag = spec.amplitude * (1.0 + n.astype(np.float64) ** 2) ** (-(spec.s + 0.51) / 2)
    uhat = np.zeros(M, dtype=np.complex128)
    pos = (n > 0) & band_mask(M)
    uhat[pos] = mag[pos] * np.exp(1j * theta[pos])
    uhat[(-np.arange(M))[pos] % M] = np.conj(uhat[pos])
    uhat[0] = mag[0] * math.cos(theta[0])
    return SpectralState(M, uhat)


@dataclass
class SolverConfig:
    nonlinearity: Nonlinearity = field(default_factory=lambda: power_nonlinearity(1))
    dt: float = 1e-4
    T: float = 0.1
    mean_removed: bool = False
    save_every: int = 10
    check_every: int = 10
    dealias: str = "2/3"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= 0:
            raise ValueError("T must be non-negative")
        if self.dealias not in ("2/3", "none"):
            raise ValueError("dealias must be '2/3' or 'none'")


class _Rhs:
    """Nonlinear term -d/dx P G(u) (+ mean(F(u)) u_x when mean-removed) on a 2x fine grid."""

    def __init__(self, M: int, config: SolverConfig):
        self.M, self.L = M, 2 * M
        self.cfg = config
        self.n = freqs(M)
        self.mask = band_mask(M) if config.dealias == "2/3" else np.ones(M, bool)
        self.ik = 1j * self.n * self.mask
        # positions of the coarse modes inside the fine spectrum
        self.idx = np.where(self.n >= 0, self.n, self.L + self.n)
        self.idx[M // 2] = M // 2
        self.last_mean = 0.0

    def to_fine(self, uhat):
        fine = np.zeros(self.L, dtype=np.complex128)
        fine[self.idx] = uhat * self.mask
        return scipy.fft.ifft(fine * self.L).real

    def mean_F(self, uhat) -> float:
        if self.cfg.nonlinearity.is_zero:
            return 0.0
        return float(np.mean(self.cfg.nonlinearity.F(self.to_fine(uhat))))

    def __call__(self, uhat):
        if self.cfg.nonlinearity.is_zero:
            self.last_mean = 0.0
            return np.zeros_like(uhat)
        u = self.to_fine(uhat)
        Gh = scipy.fft.fft(self.cfg.nonlinearity.G(u))[self.idx] / self.L
        out = -self.ik * Gh
        self.last_mean = float(np.mean(self.cfg.nonlinearity.F(u)))
        if self.cfg.mean_removed:
            out += self.last_mean * self.ik * uhat
        return out


def drift_rate(state: SpectralState, nl: Nonlinearity) -> float:
    """mean over the torus of F(u), evaluated on the 2x fine grid."""
    return _Rhs(state.M, SolverConfig(nonlinearity=nl)).mean_F(state.uhat)


def step(state: SpectralState, config: SolverConfig, rhs: _Rhs | None = None) -> SpectralState:
    """One integrating-factor RK4 step of size config.dt."""
    dt = config.dt
    rhs = rhs or _Rhs(state.M, config)
    n = state.n.astype(np.float64)
    E = np.exp(0.5j * dt * n**3)
    E2 = E * E
    u = state.uhat
    with np.errstate(over="ignore", invalid="ignore"):
        a = rhs(u)
        b = rhs(E * (u + 0.5 * dt * a))
        c = rhs(E * u + 0.5 * dt * b)
        d = rhs(E2 * u + dt * E * c)
        new = E2 * u + (dt / 6) * (E2 * a + 2 * E * (b + c) + d)
    if config.dealias == "2/3" and not config.nonlinearity.is_zero:
        new = new * rhs.mask
    # enforce reality: average with the conjugate mirror
    mirror = np.conj(new[(-np.arange(state.M)) % state.M])
    new = 0.5 * (new + mirror)
    t = state.time + dt
    if not np.all(np.isfinite(new)):
        raise BlowupError(t)
    return SpectralState(state.M, new, t)


@dataclass
class ConservationReport:
    mass_drift: float
    momentum_drift: float
    max_reality_defect: float


@dataclass
class Trajectory:
    states: list
    config: SolverConfig = field(repr=False)
    drift_times: np.ndarray = field(repr=False, default=None)
    drift_values: np.ndarray = field(repr=False, default=None)
    report: ConservationReport | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def final(self) -> SpectralState:
        return self.states[-1]


def solve(phi: SpectralState, config: SolverConfig) -> Trajectory:
    """Integrate to config.T, saving every ``save_every`` steps (and at T).

    The drift rate mean(F(u)) is recorded at every step for the gauge transform.
    """
    steps = int(round(config.T / config.dt))
    if abs(steps * config.dt - config.T) > 1e-12 * max(1.0, config.T):
        raise ValueError("T must be an integer multiple of dt")
    rhs = _Rhs(phi.M, config)
    state = phi.copy()
    if config.dealias == "2/3" and not config.nonlinearity.is_zero:
        state.uhat = state.uhat * rhs.mask
    m0, p0 = state.mass(), state.momentum()
    states = [state]
    dtimes = [state.time]
    dvals = [rhs.mean_F(state.uhat)]
    worst_mass = worst_mom = worst_real = 0.0
    for i in range(1, steps + 1):
        state = step(state, config, rhs)
        dtimes.append(state.time)
        dvals.append(rhs.mean_F(state.uhat))
        if i % config.check_every == 0 or i == steps:
            worst_mass = max(worst_mass, abs(state.mass() - m0))
            worst_mom = max(worst_mom, abs(state.momentum() - p0))
            worst_real = max(worst_real, state.reality_defect())
        if i % config.save_every == 0 or i == steps:
            states.append(state)
    rep = ConservationReport(worst_mass, worst_mom, worst_real)
    return Trajectory(states, config, np.array(dtimes), np.array(dvals), rep)


def accumulated_drift(traj: Trajectory) -> np.ndarray:
    """c(t) = int_0^t mean(F) d tau at each saved time (trapezoid on the per-step record)."""
    t, m = traj.drift_times, traj.drift_values
    c = np.concatenate([[0.0], np.cumsum(0.5 * (m[1:] + m[:-1]) * np.diff(t))])
    return np.interp(traj.times, t, c)


def _shift(traj: Trajectory, c: np.ndarray, sign: int) -> Trajectory:
    out = []
    for st, ci in zip(traj.states, c):
        n = st.n.astype(np.float64)
        out.append(SpectralState(st.M, st.uhat * np.exp(-sign * 1j * n * ci), st.time))
    return Trajectory(out, traj.config, traj.drift_times, traj.drift_values, traj.report)


def gauge_transform(v: Trajectory, nl: Nonlinearity | None = None) -> Trajectory:
    """u(x, t) = v(x - c(t), t), i.e. uhat(n) = vhat(n) e^{-inc(t)}.

    The drift record of ``v`` is used when present; otherwise it is recomputed
    from the saved states with ``nl``.
    """
    if v.drift_values is None:
        v = _with_saved_drift(v, nl)
    return _shift(v, accumulated_drift(v), +1)


def inverse_gauge_transform(u: Trajectory, nl: Nonlinearity | None = None) -> Trajectory:
    """v(x, t) = u(x + c(t), t); mean(F(u)) = mean(F(v)) so c is the same function."""
    if u.drift_values is None:
        u = _with_saved_drift(u, nl)
    return _shift(u, accumulated_drift(u), -1)


def _with_saved_drift(traj: Trajectory, nl: Nonlinearity) -> Trajectory:
    if nl is None:
        raise ValueError("a nonlinearity is needed to recompute the drift")
    t = traj.times
    m = np.array([drift_rate(s, nl) for s in traj.states])
    return Trajectory(traj.states, traj.config, t, m, traj.report)


def gauge_equivalence_check(phi: SpectralState, config: SolverConfig) -> float:
    """sup_t L^2 distance between gauge(mean-removed run) and a direct run of the original equation."""
    v = solve(phi, replace(config, mean_removed=True))
    u = solve(phi, replace(config, mean_removed=False))
    ug = gauge_transform(v)
    return max(hs_distance(a, b, 0.0) for a, b in zip(ug.states, u.states))


def gauge_round_trip_error(traj: Trajectory) -> float:
    back = inverse_gauge_transform(gauge_transform(traj))
    return max(hs_distance(a, b, 0.0) for a, b in zip(back.states, traj.states))


@dataclass
class ProbeReport:
    s: float
    T: float
    phi_norm: float
    deltas: list
    ratios: list
    max_norm_ratio: float
    blowup: float | None = None
    ratio_limit: float = 10.0

    @property
    def passed(self) -> bool:
        return self.blowup is None and max(self.ratios) <= self.ratio_limit and self.max_norm_ratio <= 2.0


def local_window(phi_norm: float, c: float = 0.01, T_max: float = 0.1) -> float:
    return min(T_max, c / max(phi_norm, 1e-300) ** 2)


def wellposedness_probe(
    spec: SobolevSpec,
    config: SolverConfig,
    deltas=(1e-2, 1e-3, 1e-4),
    M: int = 128,
    window_const: float = 0.01,
    T: float | None = None,
) -> ProbeReport:
    """sup_t ||u - u~||_{H^s} / delta for data perturbed by delta in H^s, plus the H^s growth of u.

    The window is window_const ||phi||_{H^s}^{-2} rounded to whole steps unless T is given.
    """
    phi = make_hs_data(M, spec)
    norm0 = phi.hs_norm(spec.s)
    if T is None:
        T = local_window(norm0, window_const)
    T = max(config.dt, round(T / config.dt) * config.dt)
    cfg = replace(config, T=T)
    pert = make_hs_data(M, SobolevSpec(spec.s, spec.seed + 7919, 1.0))
    pert.uhat[0] = 0.0
    pert.uhat /= pert.hs_norm(spec.s)
    try:
        base = solve(phi, cfg)
    except BlowupError as e:
        return ProbeReport(spec.s, T, norm0, list(deltas), [math.inf] * len(deltas), math.inf, e.time)
    growth = max(s.hs_norm(spec.s) for s in base.states) / norm0 if norm0 > 0 else 0.0
    ratios = []
    for d in deltas:
        if d == 0:
            ratios.append(0.0)
            continue
        other = solve(SpectralState(M, phi.uhat + d * pert.uhat), cfg)
        ratios.append(max(hs_distance(a, b, spec.s) for a, b in zip(base.states, other.states)) / d)
    return ProbeReport(spec.s, T, norm0, list(deltas), ratios, growth)


# -- export ----------------------------------------------------------------


def write_text(traj: Trajectory, path) -> None:
    """Columns: time, mode index, Re uhat, Im uhat (one row per saved state and mode)."""
    with open(path, "w") as fh:
        fh.write("# time mode re im\n")
        for st in traj.states:
            for n, c in zip(st.n, st.uhat):
                fh.write(f"{float(st.time)!r} {int(n)} {float(c.real)!r} {float(c.imag)!r}\n")


def read_text(path) -> list[SpectralState]:
    data = np.loadtxt(path, comments="#", ndmin=2)
    out = []
    for t in np.unique(data[:, 0]):
        rows = data[data[:, 0] == t]
        M = rows.shape[0]
        uhat = np.zeros(M, dtype=np.complex128)
        uhat[rows[:, 1].astype(np.int64) % M] = rows[:, 2] + 1j * rows[:, 3]
        out.append(SpectralState(M, uhat, float(t)))
    return out


def write_binary(traj: Trajectory, path) -> None:
    """16-byte magic, then little-endian u32 version, u32 M, u64 frames, f64 dt;
    each frame is f64 time followed by M complex128 coefficients in FFT order."""
    M = traj.states[0].M
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQd", BINARY_VERSION, M, len(traj.states), traj.config.dt))
        for st in traj.states:
            fh.write(struct.pack("<d", st.time))
            fh.write(st.uhat.astype("<c16").tobytes())


def read_binary(path) -> list[SpectralState]:
    with open(path, "rb") as fh:
        if fh.read(16) != MAGIC:
            raise ValueError("not a trajectory file")
        version, M, frames, _dt = struct.unpack("<IIQd", fh.read(24))
        if version != BINARY_VERSION:
            raise ValueError(f"unsupported version {version}")
        out = []
        for _ in range(frames):
            (t,) = struct.unpack("<d", fh.read(8))
            uhat = np.frombuffer(fh.read(16 * M), dtype="<c16").astype(np.complex128)
            out.append(SpectralState(M, uhat, t))
    return out

"""Level sets, space-time L^p norms and extremal-constant estimates for F_N."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from . import counting
from .expsum import CoeffSequence, check_resolution, iter_blocks
from .kernel import verify_prop1

MAX_LEVEL_CELLS = 1 << 26


def exact_resolution(N: int, p: int) -> tuple[int, int]:
    """Smallest grid on which the mean of |F|^p is exact (p even)."""
    return p * N + 1, p * N**3 + 1


def default_level_grid(N: int, max_cells: int = MAX_LEVEL_CELLS) -> tuple[int, int]:
    """M_x = 8N, M_t = 8N^3, shrinking M_t to respect the cell cap."""
    M_x = 8 * N
    M_t = min(8 * N**3, max(2 * N**3 + 1, max_cells // M_x))
    return M_x, M_t


def _is_even_int(p) -> bool:
    return float(p).is_integer() and int(p) % 2 == 0


def _power_mean(seq, p, M_x, M_t, threads=None) -> float:
    parts = []
    for _, block in iter_blocks(seq, M_x, M_t, threads=threads):
        parts.append(float(np.sum(np.abs(block) ** p)))
    return math.fsum(parts) / (M_x * M_t)


def lp_norm(seq: CoeffSequence, p: float, M_x: int | None = None, M_t: int | None = None, threads=None) -> float:
    """(grid mean of |F|^p)^{1/p}; exact for even p on grids >= (pN+1, pN^3+1)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    N = seq.N
    if _is_even_int(p):
        ex, et = exact_resolution(N, int(p))
        M_x = ex if M_x is None else M_x
        M_t = et if M_t is None else M_t
        check_resolution(N, M_x, M_t, ex, et)
    else:
        if M_x is None or M_t is None:
            M_x, M_t = default_level_grid(N)
        check_resolution(N, M_x, M_t)
    return _power_mean(seq, p, M_x, M_t, threads) ** (1.0 / p)


def lp_norm_estimate(seq: CoeffSequence, p: float, M_x: int, M_t: int, threads=None) -> tuple[float, float]:
    """Value on (M_x, M_t) plus the change under doubling both resolutions."""
    check_resolution(seq.N, M_x, M_t)
    coarse = _power_mean(seq, p, M_x, M_t, threads) ** (1.0 / p)
    fine = _power_mean(seq, p, 2 * M_x, 2 * M_t, threads) ** (1.0 / p)
    return fine, abs(fine - coarse)


@dataclass
class LevelProfile:
    N: int
    lambdas: np.ndarray
    measures: np.ndarray
    M_x: int
    M_t: int
    l2_squared: float
    sup: float

    def chebyshev_excess(self) -> float:
        """max of lambda^2 |E_lambda| - ||F||_2^2 (non-positive when Chebyshev holds)."""
        return float(np.max(self.lambdas**2 * self.measures) - self.l2_squared)


def level_profile(
    seq: CoeffSequence, lambdas, M_x: int | None = None, M_t: int | None = None, threads=None, keep_above=None
):
    """Fraction of grid cells with |F| > lambda for each lambda.

    With ``keep_above`` set, also returns every |F| sample above that value
    (for exact sup-over-lambda computations).
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    order = np.argsort(lambdas)
    lam_sorted = lambdas[order]
    if M_x is None or M_t is None:
        M_x, M_t = default_level_grid(seq.N)
    check_resolution(seq.N, M_x, M_t)
    counts = np.zeros(len(lam_sorted) + 1, dtype=np.int64)
    l2_parts, sup, kept = [], 0.0, []
    for _, block in iter_blocks(seq, M_x, M_t, threads=threads):
        a = np.abs(block).ravel()
        l2_parts.append(float(np.sum(a * a)))
        sup = max(sup, float(a.max()))
        # number of thresholds strictly below each sample
        idx = np.searchsorted(lam_sorted, a, side="left")
        counts += np.bincount(idx, minlength=len(lam_sorted) + 1)
        if keep_above is not None:
            kept.append(a[a > keep_above])
    # cells exceeding lam_sorted[i] are those with idx > i
    above = np.cumsum(counts[::-1])[::-1][1:]
    measures = np.empty_like(lambdas)
    measures[order] = above / (M_x * M_t)
    prof = LevelProfile(seq.N, lambdas, measures, M_x, M_t, math.fsum(l2_parts) / (M_x * M_t), sup)
    if keep_above is None:
        return prof
    return prof, np.sort(np.concatenate(kept))[::-1]


def sup_weighted_measure(values_desc: np.ndarray, cells: int, power: float) -> float:
    """sup over lambda of |E_lambda| lambda^power, restricted to lambda above the cut used to collect values.

    For lambda just below the i-th largest sample v_i (1-based), |E_lambda| >= i / cells, so
    the supremum over the grid distribution is max_i (i / cells) v_i^power.
    """
    if values_desc.size == 0:
        return 0.0
    ranks = np.arange(1, values_desc.size + 1)
    return float(np.max(ranks / cells * values_desc**power))


# -- Theorem-style checks -------------------------------------------------


@dataclass
class Thm2Report:
    N: int
    C1: float
    C2: float
    rows: list = field(repr=False)
    max_factor: float
    min_slack: float
    limit: float = 8.0

    @property
    def passed(self) -> bool:
        return self.max_factor <= self.limit


def verify_thm2(N: int, Q_grid, seq: CoeffSequence, C1: float | None = None, C2: float | None = None, M_x=None, M_t=None):
    """lambda^2 |E|^2 against C1 N^{1/4} Q^{1/4} |E|^2 + C2 |E| / Q on a dyadic lambda ladder.

    C1, C2 default to the empirical kernel ratios at Q = N^2.
    """
    if C1 is None or C2 is None:
        row = verify_prop1([N]).rows[0]
        C1 = row.ratio1 if C1 is None else C1
        C2 = row.ratio2 if C2 is None else C2
    for Q in Q_grid:
        if not N * N <= Q <= N**3:
            raise ValueError(f"Q={Q} outside [N^2, N^3]")
    sup_bound = math.sqrt(2 * N + 1) * seq.norm()
    lambdas = 2.0 ** np.arange(-4, math.ceil(math.log2(sup_bound)) + 1)
    prof = level_profile(seq, lambdas, M_x, M_t)
    rows, max_factor, min_slack = [], 0.0, math.inf
    for lam, E in zip(prof.lambdas, prof.measures):
        for Q in Q_grid:
            lhs = lam**2 * E**2
            rhs = C1 * N**0.25 * Q**0.25 * E**2 + C2 / Q * E
            factor = lhs / rhs if rhs > 0 else 0.0
            rows.append((float(lam), int(Q), float(E), lhs, rhs, factor))
            max_factor = max(max_factor, factor)
            if lhs > 0:
                min_slack = min(min_slack, rhs / lhs)
    return Thm2Report(N, C1, C2, rows, max_factor, min_slack)


@dataclass
class GatedLevelReport:
    label: str
    Ns: list
    values: list
    drift: float
    limit: float

    @property
    def passed(self) -> bool:
        return self.drift < self.limit


def gated_level_value(seq: CoeffSequence, gate: float, power: float, scale: float, M_x=None, M_t=None, threads=None):
    """sup over lambda >= gate of |E_lambda| lambda^power / scale, plus the profile metadata."""
    if M_x is None or M_t is None:
        M_x, M_t = default_level_grid(seq.N)
    prof, vals = level_profile(seq, [gate], M_x, M_t, threads=threads, keep_above=gate)
    return sup_weighted_measure(vals, M_x * M_t, power) / scale, prof


def _drift(vals):
    pos = [v for v in vals]
    if not pos or min(pos) <= 0:
        return math.inf
    return max(pos) / min(pos)


def verify_cor1(N_list, seq_rule, gate_const: float = 1.0, limit: float = 8.0, label: str = "", threads=None):
    """sup_{lambda >= gate_const N^{3/8}} |E_lambda| lambda^10 / N across N.

    ``seq_rule(N)`` returns the unit sequence to test at each N.
    """
    values = []
    for N in N_list:
        seq = seq_rule(N)
        v, _ = gated_level_value(seq, gate_const * N**0.375, 10, N, threads=threads)
        values.append(v)
    return GatedLevelReport(label, list(N_list), values, _drift(values), limit)


@dataclass
class HuaReport:
    Ns: list
    counts: list
    fit: counting.ScalingFit
    gated: GatedLevelReport
    monotone: bool
    slope_range: tuple = (5.4, 6.3)

    @property
    def slope_ok(self) -> bool:
        return self.slope_range[0] <= self.fit.slope <= self.slope_range[1]


def verify_hua(N_list, gate_const: float = 1.0, level_Ns=None, gate_limit: float = 8.0, threads=None) -> HuaReport:
    """Slope of log S(N;5) against log N, and the |G_lambda| lambda^10 / N^6 profile of K_N."""
    counts = [counting.count_meet_in_middle(N, 5, threads=threads) for N in N_list]
    fit = counting.scaling_fit(counts)
    level_Ns = [N for N in N_list if N <= 32][:3] if level_Ns is None else level_Ns
    values, monotone = [], True
    for N in level_Ns:
        K = CoeffSequence(N, np.ones(2 * N + 1))
        gate = gate_const * N**0.75
        v, _ = gated_level_value(K, gate, 10, N**6, threads=threads)
        values.append(v)
        lam = np.linspace(0, 2 * N + 1, 64)
        prof = level_profile(K, lam, *default_level_grid(N), threads=threads)
        monotone &= bool(np.all(np.diff(prof.measures) <= 0))
    gated = GatedLevelReport("K_N", list(level_Ns), values, _drift(values), gate_limit)
    return HuaReport(list(N_list), [c.value for c in counts], fit, gated, monotone)


# -- Strichartz constant lower bounds --------------------------------------


@dataclass
class OptimizerConfig:
    max_iter: int = 500
    rel_tol: float = 1e-6
    random_starts: int = 2
    seed: int = 0
    min_step: float = 2.0**-30
    threads: int | None = None


@dataclass
class StrichartzEstimate:
    N: int
    p: float
    lower_bound: float
    witness: CoeffSequence = field(repr=False)
    iterations: int
    converged: bool
    history: list = field(repr=False, default_factory=list)
    start_values: list = field(default_factory=list)


class _PowerObjective:
    """Mean of |F|^p and its conjugate gradient on a fixed grid."""

    def __init__(self, N, p, M_x, M_t, threads=None, max_cells=1 << 22, cache_bytes=1 << 29):
        self._cache = {}
        self.cache_bytes = cache_bytes
        self.N, self.p, self.M_x, self.M_t = N, p, M_x, M_t
        self.threads = threads
        self.width = max(1, min(M_t, max_cells // M_x))
        self.n = np.arange(-N, N + 1, dtype=np.int64)
        self.cube_mod = (self.n**3) % M_t

    def _phases(self, k0, k1):
        hit = self._cache.get(k0)
        if hit is not None:
            return hit
        k = np.arange(k0, k1, dtype=np.int64)
        ph = np.exp(2j * np.pi * (np.mod(np.outer(self.cube_mod, k), self.M_t) / self.M_t))
        if self.n.size * self.M_t * 16 <= self.cache_bytes:
            self._cache[k0] = ph
        return ph

    def value_and_grad(self, a: np.ndarray, want_grad=True):
        p, M_x, M_t = self.p, self.M_x, self.M_t
        xi = np.mod(self.n, M_x)  # injective since M_x >= 2N+1
        even = _is_even_int(p)
        totals, grad = [], np.zeros(a.size, dtype=np.complex128)
        for k0 in range(0, M_t, self.width):
            k1 = min(M_t, k0 + self.width)
            ph = self._phases(k0, k1)
            spec = np.zeros((M_x, k1 - k0), dtype=np.complex128)
            spec[xi] = a[:, None] * ph
            F = scipy.fft.ifft(spec, axis=0, norm="forward", overwrite_x=True, workers=self.threads)
            r2 = F.real**2 + F.imag**2
            w = r2 ** (p // 2 - 1) if even else r2 ** (p / 2 - 1)
            totals.append(float(np.sum(w * r2)))
            if want_grad:
                Gh = scipy.fft.fft(w * F, axis=0, overwrite_x=True, workers=self.threads)[xi]
                grad += np.einsum("nk,nk->n", Gh, np.conj(ph))
        cells = M_x * M_t
        val = math.fsum(totals) / cells
        # d/d(conj a_n) of mean |F|^p
        return val, (p / 2) * grad / cells


def _ascent(obj: _PowerObjective, a0: np.ndarray, cfg: OptimizerConfig):
    p = obj.p
    a = a0 / np.linalg.norm(a0)
    val, g = obj.value_and_grad(a)
    history = [val ** (1 / p)]
    step, converged, it = 1.0, False, 0
    for it in range(1, cfg.max_iter + 1):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
        # project onto the tangent space of the unit sphere
        g = g - np.real(np.vdot(a, g)) * a
        gn = np.linalg.norm(g)
        if gn == 0:
            converged = True
            break
        direction = g / gn
        accepted = False
        while step >= cfg.min_step:
            cand = a + step * direction
            cand /= np.linalg.norm(cand)
            cval, _ = obj.value_and_grad(cand, want_grad=False)
            if cval > val:
                accepted = True
                break
            step /= 2
        if not accepted:
            converged = True
            break
        gain = (cval - val) / val
        a = cand
        val, g = obj.value_and_grad(a)
        history.append(val ** (1 / p))
        step = min(1.0, step * 2)
        if gain < cfg.rel_tol:
            converged = True
            break
    return a, val ** (1 / p), it, converged, history


def estimate_Kp(N: int, p: float, config: OptimizerConfig | None = None, M_x=None, M_t=None) -> StrichartzEstimate:
    """Lower bound for the best constant in ||F||_p <= K ||a||_2 by projected gradient ascent.

    Multi-start from the uniform sequence and ``config.random_starts`` random
    unit sequences; for even p the grid is exact, so the returned value is
    attained by the witness and is a certified lower bound.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    cfg = config or OptimizerConfig()
    if M_x is None or M_t is None:
        if _is_even_int(p):
            M_x, M_t = exact_resolution(N, int(p))
            M_x = scipy.fft.next_fast_len(M_x)
        else:
            M_x, M_t = default_level_grid(N)
    obj = _PowerObjective(N, p, M_x, M_t, cfg.threads)
    starts = [CoeffSequence.uniform(N).coeffs]
    starts += [CoeffSequence.random_unit(N, cfg.seed + i).coeffs for i in range(cfg.random_starts)]
    best = None
    start_values = []
    for a0 in starts:
        start_values.append(obj.value_and_grad(a0 / np.linalg.norm(a0), want_grad=False)[0] ** (1 / p))
        if p == 2:
            a, val, it, conv, hist = a0 / np.linalg.norm(a0), start_values[-1], 0, True, [start_values[-1]]
        else:
            a, val, it, conv, hist = _ascent(obj, a0, cfg)
        if best is None or val > best[1]:
            best = (a, val, it, conv, hist)
    a, val, it, conv, hist = best
    return StrichartzEstimate(N, p, val, CoeffSequence(N, a), it, conv, hist, start_values)


def uniform_lower_bound(N: int, b: int) -> float:
    """||F||_{2b} for the normalized uniform sequence: S(N;b)^{1/2b} / sqrt(2N+1)."""
    S = counting.count_meet_in_middle(N, b).value
    return S ** (1.0 / (2 * b)) / math.sqrt(2 * N + 1)

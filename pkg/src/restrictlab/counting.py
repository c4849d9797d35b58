"""Exact counts S(N; b) of solutions to

    n_1 + ... + n_b = m_1 + ... + m_b,   n_1^3 + ... + n_b^3 = m_1^3 + ... + m_b^3,

with every variable in [-N, N].  S(N; b) = sum over keys (s, c) of R_b(s, c)^2
where R_b counts b-tuples with sum s and cube sum c.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from ._parallel import ordered_map
from .expsum import eval_kernel

BRUTE_FORCE_LIMIT = 10**9
DEFAULT_MAX_ENTRIES = (8 << 30) // 24  # 8 GiB at three int64 columns per key
_EXACT_FLOAT = 1 << 53


@dataclass
class RepCounter:
    """Sparse map (sum, cube sum) -> number of b-tuples, sorted by (s, c)."""

    N: int
    b: int
    s: np.ndarray
    c: np.ndarray
    m: np.ndarray

    def __len__(self) -> int:
        return len(self.m)

    def total(self) -> int:
        return int(self.m.sum(dtype=np.int64))

    def energy(self) -> int:
        return _sum_squares(self.m)

    def as_dict(self) -> dict[tuple[int, int], int]:
        return {(int(s), int(c)): int(m) for s, c, m in zip(self.s, self.c, self.m)}

    def slices(self) -> dict[int, tuple[np.ndarray, np.ndarray]]:
        """s -> (cube sums, multiplicities) for that s."""
        if len(self.s) == 0:
            return {}
        cuts = np.flatnonzero(np.diff(self.s)) + 1
        starts = np.concatenate(([0], cuts))
        ends = np.concatenate((cuts, [len(self.s)]))
        return {int(self.s[i]): (self.c[i:j], self.m[i:j]) for i, j in zip(starts, ends)}

    def is_symmetric(self) -> bool:
        d = self.as_dict()
        return all(d.get((-s, -c)) == m for (s, c), m in d.items())


@dataclass
class CountResult:
    N: int
    b: int
    value: int
    method: str
    elapsed: float


def _sum_squares(v: np.ndarray) -> int:
    v = np.asarray(v, dtype=np.int64)
    if v.size == 0:
        return 0
    top, tot = int(v.max()), int(v.sum())
    if top * tot < (1 << 62):
        return int(np.dot(v, v))
    return sum(int(x) * int(x) for x in v)


def _key_width(N: int, b: int) -> int:
    return 2 * b * N**3 + 1


def _tuple_keys(N: int, b: int, lead: int | None = None) -> np.ndarray:
    """Packed (s, c) keys of all b-tuples (optionally with a fixed first entry)."""
    r = np.arange(-N, N + 1, dtype=np.int64)
    s = np.zeros(1, dtype=np.int64)
    c = np.zeros(1, dtype=np.int64)
    free = b
    if lead is not None:
        s, c, free = s + lead, c + lead**3, b - 1
    for _ in range(free):
        s = (s[:, None] + r[None, :]).ravel()
        c = (c[:, None] + (r**3)[None, :]).ravel()
    W = _key_width(N, b)
    return (s + b * N) * W + (c + b * N**3)


def _counter_from_keys(N: int, b: int, keys: np.ndarray, counts: np.ndarray) -> RepCounter:
    W = _key_width(N, b)
    s, c = np.divmod(keys, W)
    return RepCounter(N, b, s - b * N, c - b * N**3, counts.astype(np.int64))


def rep_counter(N: int, b: int, threads=None) -> RepCounter:
    """R_b by direct enumeration of all b-tuples, partitioned by the leading entry."""
    if N < 0 or b < 0:
        raise ValueError("N and b must be non-negative")
    if b == 0:
        return RepCounter(N, 0, np.zeros(1, np.int64), np.zeros(1, np.int64), np.ones(1, np.int64))

    def part(lead):
        return np.unique(_tuple_keys(N, b, lead), return_counts=True)

    parts = ordered_map(part, range(-N, N + 1), threads)
    keys = np.concatenate([k for k, _ in parts])
    counts = np.concatenate([m for _, m in parts])
    ukeys, inv = np.unique(keys, return_inverse=True)
    merged = np.zeros(len(ukeys), dtype=np.int64)
    np.add.at(merged, inv, counts)
    return _counter_from_keys(N, b, ukeys, merged)


def _check_total(N: int, b: int):
    if (2 * N + 1) ** b >= _EXACT_FLOAT:
        raise OverflowError(f"(2N+1)^b too large for exact accumulation at N={N}, b={b}")


def _product_slices(left: RepCounter, right: RepCounter, max_entries: int, threads=None):
    """Yield (s, c_lo, dense counts) of the convolution left * right, one s at a time."""
    N, b = left.N, left.b + right.b
    _check_total(N, b)
    L, R = left.slices(), right.slices()
    s_out = range(min(L) + min(R), max(L) + max(R) + 1)

    def one(s):
        parts_idx, parts_w = [], []
        c_lo = None
        for sa, (ca, ma) in L.items():
            hit = R.get(s - sa)
            if hit is None:
                continue
            cb, mb = hit
            parts_idx.append((ca[:, None] + cb[None, :]).ravel())
            parts_w.append((ma[:, None] * mb[None, :]).ravel())
        if not parts_idx:
            return s, 0, np.zeros(0, dtype=np.int64)
        idx = np.concatenate(parts_idx)
        w = np.concatenate(parts_w).astype(np.float64)
        c_lo = int(idx.min())
        # float bincount is exact: every partial sum is an integer below 2**53
        dense = np.bincount(idx - c_lo, weights=w)
        return s, c_lo, np.rint(dense).astype(np.int64)

    seen = 0
    batch = 16
    s_list = list(s_out)
    for i in range(0, len(s_list), batch):
        for s, c_lo, dense in ordered_map(one, s_list[i : i + batch], threads):
            seen += int(np.count_nonzero(dense))
            if seen > max_entries:
                raise MemoryError(f"convolved counter exceeds {max_entries} entries")
            yield s, c_lo, dense


def convolve(left: RepCounter, right: RepCounter, max_entries=DEFAULT_MAX_ENTRIES, threads=None) -> RepCounter:
    """R_{b1+b2} = R_{b1} * R_{b2} (sparse 2D convolution)."""
    if left.N != right.N:
        raise ValueError("counters must share N")
    ss, cs, ms = [], [], []
    for s, c_lo, dense in _product_slices(left, right, max_entries, threads):
        nz = np.flatnonzero(dense)
        ss.append(np.full(nz.size, s, dtype=np.int64))
        cs.append(nz + c_lo)
        ms.append(dense[nz])
    return RepCounter(left.N, left.b + right.b, np.concatenate(ss), np.concatenate(cs), np.concatenate(ms))


def count_bruteforce(N: int, b: int, threads=None) -> CountResult:
    if (2 * N + 1) ** b > BRUTE_FORCE_LIMIT:
        raise ValueError(f"(2N+1)^b = {(2 * N + 1) ** b} exceeds the brute-force guard")
    t0 = time.perf_counter()
    value = rep_counter(N, b, threads).energy()
    return CountResult(N, b, value, "brute", time.perf_counter() - t0)


def count_meet_in_middle(N: int, b: int, max_entries=DEFAULT_MAX_ENTRIES, threads=None) -> CountResult:
    """S(N; b) from the ceil(b/2)- and floor(b/2)-tuple counters.

    The b-fold counter is never stored: each s-slice of the convolution is
    squared and summed, then dropped.
    """
    if not 1 <= b <= 6:
        raise ValueError("meet-in-the-middle supports 1 <= b <= 6")
    t0 = time.perf_counter()
    big = rep_counter(N, (b + 1) // 2, threads)
    small = rep_counter(N, b // 2, threads)
    if len(big) + len(small) > max_entries:
        raise MemoryError("half counters exceed the entry cap")
    value = 0
    for _, _, dense in _product_slices(small, big, max_entries, threads):
        value += _sum_squares(dense)
    return CountResult(N, b, value, "mim", time.perf_counter() - t0)


def count_pairs_direct(N: int) -> int:
    """S(N; 2) by grouping ordered pairs (n, m) by (n + m, n^3 + m^3) in pure Python."""
    classes: dict[tuple[int, int], int] = {}
    for n, m in itertools.product(range(-N, N + 1), repeat=2):
        key = (n + m, n**3 + m**3)
        classes[key] = classes.get(key, 0) + 1
    return sum(v * v for v in classes.values())


@dataclass
class LowerBoundReport:
    N: int
    b: int
    S: int
    diagonal_ratio: float
    offdiag_ratio: float | None
    rho_grid: float
    rho_analytic: float
    omega_bound: float
    omega_holds: bool


def omega_rho(N: int, points: int = 33) -> float:
    """min of Re K_N / (2N+1) over a grid on |x| <= 1/(60N), |t| <= 1/(60N^3)."""
    n = np.arange(-N, N + 1, dtype=np.float64)
    xs = np.linspace(-1.0 / (60 * N), 1.0 / (60 * N), points)
    ts = np.linspace(-1.0 / (60 * N**3), 1.0 / (60 * N**3), points)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    re = np.cos(2 * np.pi * (X[..., None] * n + T[..., None] * n**3)).sum(axis=-1)
    return float(re.min() / (2 * N + 1))


def verify_lower_bound(N: int, b: int, S: int | None = None, points: int = 33) -> LowerBoundReport:
    """Diagonal and box lower bounds for S(N; b).

    On the box |x| <= 1/(60N), |t| <= 1/(60N^3) every phase t n^3 + x n is at
    most 1/30 in size, so |K_N| >= Re K_N >= rho (2N+1) and
    S >= (rho (2N+1))^{2b} |box| with |box| = 1/(900 N^4).
    """
    if S is None:
        S = count_meet_in_middle(N, b).value
    rho_grid = omega_rho(N, points)
    rho_an = math.cos(2 * math.pi / 30)
    bound = (rho_an * (2 * N + 1)) ** (2 * b) / (900 * N**4)
    return LowerBoundReport(
        N=N,
        b=b,
        S=S,
        diagonal_ratio=S / (2 * N + 1) ** b,
        offdiag_ratio=S / N ** (2 * b - 4) if b >= 3 else None,
        rho_grid=rho_grid,
        rho_analytic=rho_an,
        omega_bound=bound,
        omega_holds=S >= bound,
    )


def verify_cubic_identity(m: int, *ns: int) -> bool:
    """Check the two cubic identities used to bound resonances.

    With n = m + n_1 + ... + n_k and a = n_2 + ... + n_k,
        n^3 - (m^3 + sum n_i^3) = 3 (m + n_1)(m + a)(n_1 + a) + a^3 - sum_{i>=2} n_i^3.
    For k = 4 (entries n_0..n_3) the five-term identity
        (n_0+n_1+n_2+n_3+m)^3 - n_0^3 - n_1^3 - n_2^3 - n_3^3 - m^3
          = 3 (n_0+n_1)(n_0+n_2+n_3+m)(n_1+n_2+n_3+m) + (n_2+n_3+m)^3 - n_2^3 - n_3^3 - m^3
    is checked as well.
    """
    if len(ns) < 2:
        raise ValueError("need at least two n's")
    m = int(m)
    ns = [int(v) for v in ns]
    n = m + sum(ns)
    a = sum(ns[1:])
    lhs = n**3 - (m**3 + sum(v**3 for v in ns))
    rhs = 3 * (m + ns[0]) * (m + a) * (ns[0] + a) + a**3 - sum(v**3 for v in ns[1:])
    ok = lhs == rhs
    if len(ns) == 4:
        n0, n1, n2, n3 = ns
        lhs2 = (n0 + n1 + n2 + n3 + m) ** 3 - n0**3 - n1**3 - n2**3 - n3**3 - m**3
        rhs2 = 3 * (n0 + n1) * (n0 + n2 + n3 + m) * (n1 + n2 + n3 + m) + (n2 + n3 + m) ** 3 - n2**3 - n3**3 - m**3
        ok = ok and lhs2 == rhs2
    return ok


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    residual: float


def scaling_fit(results) -> ScalingFit:
    """Least-squares fit of log S against log N.

    Accepts CountResult objects or (N, value) pairs.
    """
    pts = [(r.N, r.value) if isinstance(r, CountResult) else (r[0], r[1]) for r in results]
    Ns = np.array([p[0] for p in pts], dtype=float)
    vals = np.array([float(p[1]) for p in pts])
    if len(set(Ns.tolist())) < 4:
        raise ValueError("scaling_fit needs at least 4 distinct N")
    if np.any(Ns <= 0) or np.any(vals <= 0):
        raise ValueError("scaling_fit needs positive N and values")
    x, y = np.log(Ns), np.log(vals)
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return ScalingFit(float(slope), float(intercept), residual)

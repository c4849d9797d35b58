import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from restrictlab.counting import (
    CountResult,
    RepCounter,
    convolve,
    count_bruteforce,
    count_meet_in_middle,
    count_pairs_direct,
    rep_counter,
    scaling_fit,
    verify_cubic_identity,
    verify_lower_bound,
)


def solutions_enumerated(N, b):
    """Count 2b-tuples solving the system by looping over every (n, m) pair of b-tuples."""
    r = range(-N, N + 1)
    tuples = list(itertools.product(r, repeat=b))
    keys = [(sum(t), sum(v**3 for v in t)) for t in tuples]
    return sum(1 for k1 in keys for k2 in keys if k1 == k2)


@pytest.mark.parametrize("N,b,expected", [(1, 1, 3), (1, 2, 19), (2, 2, 61)])
def test_count_examples(N, b, expected):
    assert count_bruteforce(N, b).value == expected
    assert count_meet_in_middle(N, b).value == expected
    assert solutions_enumerated(N, b) == expected


@pytest.mark.parametrize("N,b", [(1, 3), (2, 3), (3, 2), (1, 4)])
def test_bruteforce_matches_raw_enumeration(N, b):
    assert count_bruteforce(N, b).value == solutions_enumerated(N, b)


@pytest.mark.parametrize("N", range(1, 5))
@pytest.mark.parametrize("b", range(1, 5))
def test_oracle_equivalence(N, b):
    assert count_meet_in_middle(N, b).value == count_bruteforce(N, b).value


@pytest.mark.parametrize("N", [1, 2])
def test_oracle_equivalence_b5(N):
    assert count_meet_in_middle(N, 5).value == count_bruteforce(N, 5).value


def test_mim_b6_against_brute():
    assert count_meet_in_middle(1, 6).value == count_bruteforce(1, 6).value


@pytest.mark.parametrize("N", [1, 2, 3, 4])
@pytest.mark.parametrize("b", [1, 2, 3, 4, 5])
def test_diagonal_lower_bound(N, b):
    assert count_meet_in_middle(N, b).value >= (2 * N + 1) ** b


def test_pairs_direct_up_to_50():
    for N in list(range(1, 21)) + [33, 50]:
        assert count_meet_in_middle(N, 2).value == count_pairs_direct(N)


@pytest.mark.parametrize("N,b", [(3, 2), (2, 3), (3, 3), (2, 4)])
def test_counter_symmetry_and_mass(N, b):
    rc = rep_counter(N, b)
    assert rc.total() == (2 * N + 1) ** b
    assert rc.is_symmetric()
    assert np.all(np.abs(rc.s) <= b * N)
    assert np.all(np.abs(rc.c) <= b * N**3)


def test_convolution_stages_conserve_mass():
    N = 3
    one = rep_counter(N, 1)
    acc = one
    for b in range(2, 5):
        acc = convolve(acc, one)
        assert acc.total() == (2 * N + 1) ** b
        assert acc.as_dict() == rep_counter(N, b).as_dict()
        assert acc.is_symmetric()


def test_convolve_memory_cap():
    one = rep_counter(3, 1)
    with pytest.raises(MemoryError):
        convolve(one, one, max_entries=5)


def test_bruteforce_guard():
    with pytest.raises(ValueError):
        count_bruteforce(40, 6)


def test_monotone_in_N():
    for b in (2, 3):
        vals = [count_meet_in_middle(N, b).value for N in range(1, 9)]
        assert all(x < y for x, y in zip(vals, vals[1:]))


def test_thread_count_does_not_change_count():
    assert count_meet_in_middle(6, 5, threads=1).value == count_meet_in_middle(6, 5, threads=4).value


def test_lower_bound_report():
    rep = verify_lower_bound(2, 2)
    assert rep.diagonal_ratio >= 1 and rep.offdiag_ratio is None
    rep = verify_lower_bound(16, 5)
    assert rep.offdiag_ratio > 0
    assert rep.omega_holds
    assert verify_lower_bound(32, 3).rho_grid >= 0.5


def test_cubic_identity_examples():
    assert verify_cubic_identity(0, 0, 0)
    assert verify_cubic_identity(0, 0, 0, 0, 0)
    assert verify_cubic_identity(1, 2, 3)
    # the same example evaluated independently
    m, n1, n2 = 1, 2, 3
    assert (m + n1 + n2) ** 3 - (m**3 + n1**3 + n2**3) == 180 == 3 * 3 * 4 * 5


def test_cubic_identity_random_tuples():
    rng = random.Random(20240601)
    for _ in range(100_000):
        k = rng.randint(2, 6)
        vals = [rng.randint(-1000, 1000) for _ in range(k + 1)]
        assert verify_cubic_identity(*vals)


@given(st.lists(st.integers(-(10**6), 10**6), min_size=5, max_size=5))
def test_five_term_identity(vals):
    assert verify_cubic_identity(*vals)


def test_cubic_identity_needs_two():
    with pytest.raises(ValueError):
        verify_cubic_identity(1, 2)


def test_scaling_fit_exact_power():
    fit = scaling_fit([(N, N**6) for N in (2, 3, 5, 8, 13)])
    assert abs(fit.slope - 6) < 1e-9 and fit.residual < 1e-9


def test_scaling_fit_b1_tends_to_one():
    low = scaling_fit([count_meet_in_middle(N, 1) for N in (1, 2, 3, 4)]).slope
    high = scaling_fit([count_meet_in_middle(N, 1) for N in (100, 200, 400, 800)]).slope
    assert abs(high - 1) < abs(low - 1) and abs(high - 1) < 0.01


def test_scaling_fit_degenerate():
    with pytest.raises(ValueError):
        scaling_fit([(2, 4), (2, 4), (3, 9), (4, 16)])
    with pytest.raises(ValueError):
        scaling_fit([CountResult(N, 1, 0, "mim", 0.0) for N in (1, 2, 3, 4)])

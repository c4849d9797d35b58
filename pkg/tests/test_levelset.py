import math

import numpy as np
import pytest

from restrictlab.counting import count_meet_in_middle
from restrictlab.expsum import CoeffSequence
from restrictlab.levelset import (
    OptimizerConfig,
    _PowerObjective,
    estimate_Kp,
    exact_resolution,
    level_profile,
    lp_norm,
    lp_norm_estimate,
    sup_weighted_measure,
    uniform_lower_bound,
    verify_cor1,
    verify_hua,
    verify_thm2,
)


def test_lp_norm_examples():
    for N in (2, 5):
        assert lp_norm(CoeffSequence.random_unit(N, 3), 2) == pytest.approx(1, abs=1e-12)
        assert lp_norm(CoeffSequence(N, np.ones(2 * N + 1)), 2) == pytest.approx(math.sqrt(2 * N + 1), rel=1e-12)
        for p in (2, 4, 3.5, 7):
            assert lp_norm(CoeffSequence.delta(N), p) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("N,b", [(2, 2), (3, 3), (4, 2), (2, 4)])
def test_even_norm_matches_count(N, b):
    # ||F||_{2b}^{2b} for a = 1 equals S(N; b)
    seq = CoeffSequence(N, np.ones(2 * N + 1))
    assert lp_norm(seq, 2 * b) ** (2 * b) == pytest.approx(count_meet_in_middle(N, b).value, rel=1e-10)


def test_resolution_guard():
    with pytest.raises(ValueError):
        lp_norm(CoeffSequence.uniform(3), 4, 12, 200)


def test_lp_monotone_in_p():
    for seed in range(20):
        seq = CoeffSequence.random_unit(3, seed)
        vals = [lp_norm(seq, p) for p in (2, 4, 6, 8)]
        assert all(x <= y + 1e-12 for x, y in zip(vals, vals[1:]))


def test_lp_estimate_for_real_p():
    seq = CoeffSequence.random_unit(3, 1)
    v, err = lp_norm_estimate(seq, 3.0, 48, 432)
    assert err < 1e-2 * v


def test_level_profile_examples():
    N = 4
    seq = CoeffSequence.random_unit(N, 2)
    lam = np.linspace(0, 4, 41)
    prof = level_profile(seq, lam)
    assert prof.measures[0] == 1.0
    assert np.all(np.diff(prof.measures) <= 0)
    assert np.all((prof.measures >= 0) & (prof.measures <= 1))
    assert np.all(lam**2 * prof.measures <= 1 + 1e-6)
    assert prof.l2_squared == pytest.approx(1, abs=1e-12)
    assert level_profile(seq, [math.sqrt(2 * N + 1) + 1e-9]).measures[0] == 0


def test_level_profile_unsorted_lambdas():
    seq = CoeffSequence.uniform(3)
    a = level_profile(seq, [1.0, 0.5, 2.0])
    b = level_profile(seq, [0.5, 1.0, 2.0])
    assert np.array_equal(a.measures, b.measures[[1, 0, 2]])


def test_grid_refinement_stability():
    N = 4
    seq = CoeffSequence.uniform(N)
    lam = np.array([0.25, 0.5, 1.0, 1.5, 2.0])
    a = level_profile(seq, lam, 8 * N, 8 * N**3)
    b = level_profile(seq, lam, 16 * N, 16 * N**3)
    ok = lam < 0.99 * a.sup
    diff = np.abs(a.measures - b.measures)[ok]
    # 2% of the total (unit) measure; relative 2% where the set is not a thin tail
    assert np.all(diff < 0.02)
    bulk = a.measures[ok] >= 0.1
    assert np.all(diff[bulk] < 0.02 * a.measures[ok][bulk])


def test_sup_weighted_measure():
    vals = np.array([3.0, 2.0, 1.0])
    assert sup_weighted_measure(vals, 10, 2) == pytest.approx(max(0.1 * 9, 0.2 * 4, 0.3 * 1))
    assert sup_weighted_measure(np.array([]), 10, 2) == 0.0


def test_gradient_matches_finite_difference():
    N, p = 2, 4
    obj = _PowerObjective(N, p, *exact_resolution(N, p))
    a = CoeffSequence.random_unit(N, 5).coeffs
    _, g = obj.value_and_grad(a)
    h = 1e-6
    for i in range(a.size):
        for d in (1, 1j):
            e = np.zeros_like(a)
            e[i] = d * h
            fd = (obj.value_and_grad(a + e, False)[0] - obj.value_and_grad(a - e, False)[0]) / (2 * h)
            # directional derivative = 2 Re(conj(d) * dJ/d conj(a))
            assert fd == pytest.approx(2 * np.real(np.conj(d) * g[i]), rel=1e-6, abs=1e-9)


def test_estimate_kp_p2():
    est = estimate_Kp(3, 2)
    assert est.lower_bound == pytest.approx(1, abs=1e-8)


def test_estimate_kp_n1_p4():
    est = estimate_Kp(1, 4)
    uniform = 19**0.25 / math.sqrt(3)
    assert est.start_values[0] == pytest.approx(uniform, rel=1e-12)
    assert est.lower_bound >= uniform
    assert np.linalg.norm(est.witness.coeffs) == pytest.approx(1, abs=1e-10)
    assert all(x <= y for x, y in zip(est.history, est.history[1:]))
    # certified: recompute independently on the exact grid
    assert lp_norm(est.witness, 4) == pytest.approx(est.lower_bound, rel=1e-12)


@pytest.mark.parametrize("N,b", [(2, 2), (3, 3)])
def test_estimate_beats_uniform(N, b):
    est = estimate_Kp(N, 2 * b, OptimizerConfig(max_iter=50))
    assert est.lower_bound >= uniform_lower_bound(N, b) - 1e-6


def test_thm2_small():
    rep = verify_thm2(4, [16, 64], CoeffSequence.uniform(4))
    assert rep.passed
    assert all(r[3] == 0 for r in rep.rows if r[2] == 0)


def test_cor1_uniform_small():
    rep = verify_cor1([4, 8], CoeffSequence.uniform)
    assert rep.passed and all(v > 0 for v in rep.values)


def test_hua_small():
    rep = verify_hua([2, 3, 4, 5, 6], level_Ns=[2, 4])
    assert rep.monotone
    assert len(rep.counts) == 5

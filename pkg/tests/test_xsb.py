import math

import numpy as np
import pytest

from restrictlab import gkdv
from restrictlab.xsb import (
    DyadicProjector,
    SpaceTimeField,
    dual_norm,
    dyadic_scales,
    embedding_check,
    free_evolution,
    linear_estimate_check,
    lp_telescope_check,
    nonlinear_scaling_check,
    nonlinear_term,
    partition_defect,
    psi,
    random_field,
    window_samples,
    xsb_norm,
    ys_norm,
)

TW = 2 * np.pi  # lambda lattice = integers


def single_mode(n0, N_x=4, M_t=256):
    return SpaceTimeField.from_function(N_x, TW, M_t, lambda n, t: (n == n0) * np.exp(1j * n0**3 * t))


def test_zero_field():
    f = SpaceTimeField.zeros(3, 1.0, 64)
    assert xsb_norm(f, 0.6, 0.5) == 0 and ys_norm(f, 0.6) == 0 and dual_norm(f, 0.6) == 0


@pytest.mark.parametrize("n0", [0, 1, -2, 3])
def test_single_node(n0):
    f = single_mode(n0)
    w = (1 + abs(n0)) ** 0.6
    assert xsb_norm(f, 0.6, 0.7) == pytest.approx(w * math.sqrt(TW), rel=1e-12)
    assert ys_norm(f, 0.6) == pytest.approx(w * (math.sqrt(TW) + 1), rel=1e-12)


def test_parseval_and_homogeneity():
    f = random_field(5, 0.8, 1024, 3)
    assert xsb_norm(f, 0, 0) == pytest.approx(f.l2_norm(), rel=1e-8)
    assert xsb_norm(f.scaled(-2.5j), 0.6, 0.5) == pytest.approx(2.5 * xsb_norm(f, 0.6, 0.5), rel=1e-12)
    assert ys_norm(f.scaled(3), 0.6) == pytest.approx(3 * ys_norm(f, 0.6), rel=1e-12)
    assert ys_norm(f, 0.6) >= xsb_norm(f, 0.6, 0.5)


def test_partition_exact():
    f = random_field(9, 0.8, 512, 1)
    assert partition_defect(f, "space") == 0.0
    assert partition_defect(f, "time") < 1e-12
    blocks = [DyadicProjector(K)(f).values for K in dyadic_scales(9)]
    assert np.array_equal(sum(blocks), f.values)


def test_psi_bump():
    t = np.linspace(-3, 3, 6001)
    y = psi(t)
    assert np.all(y[np.abs(t) <= 1] == 1) and np.all(y[np.abs(t) >= 2] == 0)
    assert np.all((y >= 0) & (y <= 1))


def test_linear_estimate_examples():
    c = np.zeros(9, complex)
    c[6] = 1.0
    rep = linear_estimate_check(c, 0.6, (0.2, 0.1, 0.05))
    assert rep.passed
    assert linear_estimate_check(np.zeros(9), 0.6, (0.2, 0.1)).ratios == [0.0, 0.0]
    phi = gkdv.make_hs_data(32, gkdv.SobolevSpec(0.6, 2, 0.1))
    from restrictlab.xsb import state_to_coeffs

    c = state_to_coeffs(phi, 10)
    a = linear_estimate_check(c, 0.6, (0.2, 0.1))
    b = linear_estimate_check(2 * c, 0.6, (0.2, 0.1))
    shifted = c * np.exp(1j * 0.7 * np.arange(-10, 11))
    s = linear_estimate_check(shifted, 0.6, (0.2, 0.1))
    assert np.allclose(a.ratios, b.ratios, rtol=1e-12)
    assert np.allclose(a.ratios, s.ratios, rtol=1e-12)
    with pytest.raises(ValueError):
        linear_estimate_check(c, 0.5)


def test_nonlinear_term_vanishes_for_constant():
    f = SpaceTimeField.from_function(4, 0.8, 128, lambda n, t: (n == 0) * (0.3 + 0 * t))
    w = nonlinear_term(f, gkdv.power_nonlinearity(3), 16, 0.0, 0.1)
    assert np.all(w.values == 0)
    assert dual_norm(w, 0.6) == 0


def test_nonlinear_scaling_small():
    phi = gkdv.make_hs_data(16, gkdv.SobolevSpec(0.6, 1, 0.3))
    rep = nonlinear_scaling_check(phi, gkdv.power_nonlinearity(3), 0.6, deltas=(0.1, 0.05, 0.025), power=3, dt=1e-4)
    assert rep.theta > 0
    zero = gkdv.SpectralState(16, np.zeros(16))
    with pytest.raises(ValueError):
        nonlinear_scaling_check(zero, gkdv.power_nonlinearity(3), 0.6, deltas=(0.1, 0.05), power=3, dt=1e-4)


def test_lp_telescope():
    f = random_field(8, 0.8, 256, 0)
    assert lp_telescope_check(f, lambda u: 2 * u - 1, 1, 8) < 1e-12
    assert lp_telescope_check(f, lambda u: u**3, 1, 8) <= 1e-10
    assert lp_telescope_check(f, np.sin, 2, 16) <= 1e-10


def test_single_scale_one_increment():
    f = single_mode(3, N_x=8)
    incs = [np.max(np.abs(DyadicProjector(K)(f).values)) for K in dyadic_scales(8)]
    assert sum(v > 0 for v in incs) == 1


@pytest.mark.parametrize("which", ["emb1", "emb2", "emb3"])
def test_embedding_bounded(which):
    rep = embedding_check(which, levels=(4, 8), seeds=range(2))
    assert rep.passed


def test_window_samples_power_of_two():
    m = window_samples(10, 1.6)
    assert m & (m - 1) == 0 and m >= 64 * 1000 * 1.6 / (2 * np.pi)

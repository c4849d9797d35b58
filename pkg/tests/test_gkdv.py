import numpy as np
import pytest
from dataclasses import replace

from restrictlab.gkdv import (
    MAGIC,
    ZERO,
    BlowupError,
    SobolevSpec,
    SolverConfig,
    SpectralState,
    band_mask,
    gauge_equivalence_check,
    gauge_round_trip_error,
    gauge_transform,
    hs_distance,
    make_hs_data,
    nonlinearity_from_name,
    power_nonlinearity,
    read_binary,
    read_text,
    sine_nonlinearity,
    solve,
    step,
    wellposedness_probe,
    write_binary,
    write_text,
)


def test_make_hs_data():
    a = make_hs_data(64, SobolevSpec(0.6, 3, 0.2))
    b = make_hs_data(64, SobolevSpec(0.6, 3, 0.2))
    assert np.array_equal(a.uhat, b.uhat)
    assert a.reality_defect() == 0
    assert a.uhat[0].imag == 0
    assert np.all(a.uhat[~band_mask(64)] == 0)
    n = a.n
    direct = np.sqrt(sum((1 + float(k) ** 2) ** 0.6 * abs(c) ** 2 for k, c in zip(n, a.uhat)))
    assert a.hs_norm(0.6) == pytest.approx(direct, rel=1e-13)
    assert np.all(make_hs_data(64, SobolevSpec(0.6, 3, 0.0)).uhat == 0)
    assert np.allclose(np.fft.ifft(a.uhat * 64).imag, 0, atol=1e-15)


def test_values_round_trip():
    a = make_hs_data(32, SobolevSpec(1.0, 1, 1.0))
    b = SpectralState.from_values(a.values())
    assert np.max(np.abs(a.uhat - b.uhat)) < 1e-15


def test_airy_propagator_exact():
    phi = make_hs_data(256, SobolevSpec(0.6, 1, 0.1))
    traj = solve(phi, SolverConfig(ZERO, dt=1e-3, T=0.1))
    n = phi.n.astype(float)
    for st in traj.states:
        exact = phi.uhat * np.exp(1j * n**3 * st.time)
        assert np.max(np.abs(st.uhat - exact)) <= 1e-9 * np.max(np.abs(exact))
    assert traj.report.momentum_drift < 1e-10
    for s in (0.0, 0.6, 2.0):
        assert traj.final.hs_norm(s) == pytest.approx(phi.hs_norm(s), rel=1e-12)


@pytest.mark.parametrize("nl", [power_nonlinearity(2), sine_nonlinearity()])
def test_constant_state_unchanged(nl):
    u = SpectralState(32, np.r_[0.7, np.zeros(31)])
    out = solve(u, SolverConfig(nl, dt=1e-3, T=0.05)).final
    assert np.max(np.abs(out.uhat - u.uhat)) < 1e-14


def test_blowup_signal():
    u = SpectralState(16, np.r_[0.0, 1e200, np.zeros(13), 1e200])
    with pytest.raises(BlowupError) as info:
        step(u, SolverConfig(power_nonlinearity(3), dt=1e-3, T=1e-3))
    assert info.value.time == pytest.approx(1e-3)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(dt=0)
    with pytest.raises(ValueError):
        SolverConfig(T=-1)
    with pytest.raises(ValueError):
        solve(make_hs_data(16, SobolevSpec(1)), SolverConfig(dt=0.3, T=1.0))


def test_nonlinearity_names():
    assert nonlinearity_from_name("0").is_zero
    assert nonlinearity_from_name("sin").name == "sin(u)"
    assert nonlinearity_from_name("3").name == "u^3"


def test_conservation_small_data():
    phi = make_hs_data(64, SobolevSpec(0.6, 2, 0.1))
    for k in (1, 2, 3):
        rep = solve(phi, SolverConfig(power_nonlinearity(k), dt=1e-4, T=0.02)).report
        assert rep.mass_drift <= 1e-10
        assert rep.momentum_drift <= 1e-8
        assert rep.max_reality_defect <= 1e-13


def test_self_convergence_order():
    phi = make_hs_data(64, SobolevSpec(1.0, 3, 0.5))
    T = 0.02
    cfg = SolverConfig(power_nonlinearity(1), T=T)
    ref = solve(phi, replace(cfg, dt=T / 800)).final
    errs = [hs_distance(solve(phi, replace(cfg, dt=T / m)).final, ref) for m in (50, 100)]
    assert 3.5 <= np.log2(errs[0] / errs[1]) <= 4.5


def test_gauge_examples():
    phi = make_hs_data(32, SobolevSpec(0.6, 1, 0.1))
    cfg = SolverConfig(ZERO, dt=1e-3, T=0.01, save_every=1)
    v = solve(phi, cfg)
    u = gauge_transform(v)
    assert all(np.array_equal(a.uhat, b.uhat) for a, b in zip(u.states, v.states))
    const = SpectralState(32, np.r_[0.5, np.zeros(31)])
    cfg3 = SolverConfig(power_nonlinearity(3), dt=1e-3, T=0.01, mean_removed=True)
    v = solve(const, cfg3)
    u = gauge_transform(v)
    assert max(np.max(np.abs(s.uhat - const.uhat)) for s in u.states) < 1e-14


def test_gauge_round_trip_and_equivalence_short():
    phi = make_hs_data(64, SobolevSpec(0.6, 4, 0.1))
    cfg = SolverConfig(power_nonlinearity(3), dt=1e-4, T=0.01, mean_removed=True)
    assert gauge_round_trip_error(solve(phi, cfg)) < 1e-9
    assert gauge_equivalence_check(phi, replace(cfg, mean_removed=False)) < 1e-6
    assert gauge_equivalence_check(SpectralState(64, np.r_[0.3, np.zeros(63)]), cfg) < 1e-14


def test_mean_removed_mass_exact():
    phi = make_hs_data(64, SobolevSpec(0.6, 4, 0.2))
    rep = solve(phi, SolverConfig(sine_nonlinearity(), dt=1e-4, T=0.01, mean_removed=True)).report
    assert rep.mass_drift == 0.0


def test_probe_linear_isometry():
    rep = wellposedness_probe(SobolevSpec(0.6, 1, 0.1), SolverConfig(ZERO, dt=1e-3), deltas=(1e-2, 0.0), M=32)
    assert rep.ratios[0] == pytest.approx(1, rel=1e-9)
    assert rep.ratios[1] == 0.0
    assert rep.passed


def test_export_round_trip(tmp_path):
    phi = make_hs_data(16, SobolevSpec(1.0, 1, 0.3))
    traj = solve(phi, SolverConfig(power_nonlinearity(2), dt=1e-3, T=0.005, save_every=2))
    write_binary(traj, tmp_path / "t.bin")
    write_text(traj, tmp_path / "t.txt")
    raw = (tmp_path / "t.bin").read_bytes()
    assert raw[:16] == MAGIC and raw[:8] == b"GKDV0001"
    for back in (read_binary(tmp_path / "t.bin"), read_text(tmp_path / "t.txt")):
        assert len(back) == len(traj.states)
        for a, b in zip(back, traj.states):
            assert a.time == b.time and np.array_equal(a.uhat, b.uhat)

"""Sequence simulation against an independent isochromat implementation."""

import numpy as np
import pytest

import mrfpipe.epg as epg
from mrfpipe.epg import (Dictionary, ParameterGrid, SequenceSchedule, TissueParams,
                         build_dictionary, default_grid, default_schedule,
                         load_dictionary, rf_rotation, save_dictionary,
                         simulate_fingerprint, simulate_fingerprints)

from oracle_isochromat import epg_matrix_from_spins, simulate_isochromat


def test_rf_rotation_zero_is_identity():
    np.testing.assert_allclose(rf_rotation(0.0), np.eye(3), atol=1e-15)


@pytest.mark.parametrize("alpha", [7.0, 30.0, 45.0, 90.0, 123.4, 180.0])
def test_rf_rotation_matches_spin_ensemble(alpha):
    """The mixing matrix must act exactly like a per-spin rotation."""
    ins, outs = epg_matrix_from_spins(alpha)
    r = rf_rotation(alpha)
    for states_in, states_out in zip(ins, outs):
        for vec_in, vec_out in zip(states_in, states_out):
            np.testing.assert_allclose(r @ np.array(vec_in), np.array(vec_out),
                                       atol=1e-12)


def test_rf_rotation_is_real_valued():
    """Rotation about +y keeps every EPG state real; dtype stays complex."""
    r = rf_rotation(63.0)
    assert r.dtype == np.complex128
    assert np.max(np.abs(r.imag)) == 0.0


def test_zero_flip_train_gives_zero_signal():
    sched = SequenceSchedule(
        flip_angles_deg=np.zeros(10), tr_ms=np.full(10, 12.0), te_ms=2.0,
        inversion_delay_ms=18.0,
    )
    sig = simulate_fingerprints(sched, [800.0], [80.0])
    np.testing.assert_array_equal(sig, np.zeros((1, 10)))


def test_first_frame_closed_form():
    """Frame 1 sees only inversion recovery, one pulse and TE decay."""
    t1, t2, ti, te = 950.0, 70.0, 18.0, 2.0
    sched = default_schedule(d0=5, tr_ms=12.0, te_ms=te, inversion_delay_ms=ti)
    alpha = np.deg2rad(sched.flip_angles_deg[0])
    sig = simulate_fingerprints(sched, [t1], [t2])[0, 0]
    mz = 1.0 - 2.0 * np.exp(-ti / t1)
    expected = np.sin(alpha) * mz * np.exp(-te / t2)
    np.testing.assert_allclose(sig, expected, rtol=1e-12)


@pytest.mark.parametrize(
    "t1,t2",
    [(200.0, 50.0), (800.0, 80.0), (1400.0, 300.0), (3000.0, 550.0), (100.0, 20.0)],
)
def test_fingerprint_matches_isochromat(t1, t2):
    sched = default_schedule(d0=60)
    sig = simulate_fingerprints(sched, [t1], [t2])[0]
    ref = simulate_isochromat(
        sched.flip_angles_deg, sched.tr_ms, sched.te_ms, t1, t2,
        inversion_delay_ms=sched.inversion_delay_ms,
    )
    assert np.max(np.abs(ref.imag)) < 1e-12
    np.testing.assert_allclose(sig, ref.real, atol=1e-10)


def test_varying_tr_and_flip_matches_isochromat():
    rng = np.random.default_rng(5)
    d0 = 40
    sched = SequenceSchedule(
        flip_angles_deg=rng.uniform(5.0, 80.0, d0),
        tr_ms=rng.uniform(11.0, 15.0, d0),
        te_ms=1.5,
        inversion_delay_ms=25.0,
    )
    sig = simulate_fingerprints(sched, [640.0], [90.0])[0]
    ref = simulate_isochromat(sched.flip_angles_deg, sched.tr_ms, sched.te_ms,
                              640.0, 90.0, inversion_delay_ms=25.0)
    np.testing.assert_allclose(sig, ref.real, atol=1e-10)


def test_no_inversion_starts_positive():
    sched = default_schedule(d0=30, inversion_delay_ms=0.0)
    sig = simulate_fingerprints(sched, [900.0], [90.0])[0]
    # TI = 0 leaves Mz = -1: every early echo is inverted relative to TI -> inf
    ref = simulate_isochromat(sched.flip_angles_deg, sched.tr_ms, sched.te_ms,
                              900.0, 90.0, inversion_delay_ms=0.0)
    np.testing.assert_allclose(sig, ref.real, atol=1e-10)


def test_block_size_does_not_change_results(monkeypatch):
    sched = default_schedule(d0=25)
    t1 = np.array([300.0, 800.0, 1500.0, 2200.0, 3100.0])
    t2 = np.array([40.0, 80.0, 200.0, 320.0, 500.0])
    full = simulate_fingerprints(sched, t1, t2)
    monkeypatch.setattr(epg, "_SIM_BLOCK", 2)
    chunked = simulate_fingerprints(sched, t1, t2)
    np.testing.assert_array_equal(full, chunked)


def test_simulate_fingerprint_scales_by_pd():
    sched = default_schedule(d0=20)
    base = simulate_fingerprints(sched, [700.0], [60.0])[0]
    scaled = simulate_fingerprint(sched, TissueParams(t1_ms=700.0, t2_ms=60.0, pd=1.7))
    np.testing.assert_allclose(scaled, 1.7 * base, rtol=1e-14)


def test_schedule_validation():
    with pytest.raises(ValueError):
        SequenceSchedule(flip_angles_deg=np.array([190.0]), tr_ms=np.array([12.0]),
                         te_ms=2.0, inversion_delay_ms=0.0)
    with pytest.raises(ValueError):
        SequenceSchedule(flip_angles_deg=np.array([30.0]), tr_ms=np.array([1.0]),
                         te_ms=2.0, inversion_delay_ms=0.0)
    with pytest.raises(ValueError):
        TissueParams(t1_ms=100.0, t2_ms=200.0, pd=1.0)  # t2 > t1


def test_grid_entries_filter_t2_above_t1():
    grid = ParameterGrid(t1_values_ms=np.array([100.0, 300.0]),
                         t2_values_ms=np.array([50.0, 200.0, 400.0]))
    entries = grid.entries
    assert np.all(entries[:, 1] <= entries[:, 0])
    assert len(entries) == 3  # (100,50), (300,50), (300,200)


def test_default_grid_size():
    grid = default_grid()
    assert len(grid.t1_values_ms) == 196
    assert len(grid.t2_values_ms) == 146
    assert len(grid.entries) == 26991


def test_build_dictionary_normalized():
    sched = default_schedule(d0=30)
    grid = default_grid(t1_step=500.0, t2_step=100.0)
    d = build_dictionary(sched, grid, normalize=True)
    assert d.normalized
    np.testing.assert_allclose(np.linalg.norm(d.atoms, axis=1), 1.0, atol=1e-12)
    assert np.all(d.norms > 0.0)
    # the stored norms must reproduce the unnormalized fingerprints
    raw = simulate_fingerprints(sched, d.lut[:, 0], d.lut[:, 1])
    np.testing.assert_allclose(d.atoms * d.norms[:, None], raw, atol=1e-12)


def test_dictionary_roundtrip(tmp_path):
    sched = default_schedule(d0=20)
    d = build_dictionary(sched, default_grid(t1_step=800.0, t2_step=150.0))
    path = tmp_path / "dict.mrfa"
    save_dictionary(d, path)
    back = load_dictionary(path)
    assert back.normalized == d.normalized
    np.testing.assert_array_equal(back.atoms, d.atoms)
    np.testing.assert_array_equal(back.lut, d.lut)
    np.testing.assert_array_equal(back.norms, d.norms)


def test_dictionary_roundtrip_unnormalized(tmp_path):
    sched = default_schedule(d0=20)
    d = build_dictionary(sched, default_grid(t1_step=800.0, t2_step=150.0),
                         normalize=False)
    assert not d.normalized
    path = tmp_path / "dict.mrfa"
    save_dictionary(d, path)
    assert not load_dictionary(path).normalized


def test_empty_grid_rejected():
    sched = default_schedule(d0=10)
    grid = ParameterGrid(t1_values_ms=np.array([100.0]),
                         t2_values_ms=np.array([400.0]))
    assert len(grid.entries) == 0
    with pytest.raises(ValueError):
        build_dictionary(sched, grid)


def test_dictionary_invariants():
    with pytest.raises(ValueError):
        Dictionary(atoms=np.ones((2, 3)), lut=np.ones((3, 2)), norms=np.ones(2),
                   normalized=False)
    with pytest.raises(ValueError):
        Dictionary(atoms=np.ones((2, 3)), lut=np.ones((2, 2)),
                   norms=np.array([1.0, 0.0]), normalized=False)
    with pytest.raises(ValueError):
        Dictionary(atoms=np.full((1, 4), 0.7), lut=np.ones((1, 2)),
                   norms=np.ones(1), normalized=True)

"""Forward simulation, k-space undersampling, augmentation and sample I/O."""

import numpy as np
import pytest

from mrfpipe.acquisition import (AugmentParams, augment, forward_simulate,
                                 load_maps, load_sample, make_spiral_scheme,
                                 save_maps, save_sample, transform_identity,
                                 undersample)
from mrfpipe.epg import TissueParams, default_schedule, simulate_fingerprint
from mrfpipe.images import TSMI, ParametricMaps
from mrfpipe.phantom import generate_phantom, random_brain_spec


@pytest.fixture(scope="module")
def sched():
    return default_schedule(d0=30)


@pytest.fixture(scope="module")
def phantom16():
    return generate_phantom(random_brain_spec(16, 16, seed=2))


def test_forward_simulate_per_voxel(sched, phantom16):
    tsmi = forward_simulate(phantom16, sched)
    assert tsmi.kind == "raw"
    assert tsmi.shape == (16, 16, 30)
    # spot-check voxels against the scalar simulation path
    rng = np.random.default_rng(0)
    fg = np.argwhere(phantom16.mask)
    for i, j in fg[rng.choice(len(fg), 5, replace=False)]:
        tissue = TissueParams(
            t1_ms=phantom16.t1_ms[i, j], t2_ms=phantom16.t2_ms[i, j],
            pd=phantom16.pd[i, j],
        )
        np.testing.assert_allclose(tsmi.data[i, j], simulate_fingerprint(sched, tissue),
                                   rtol=1e-12)
    assert np.all(tsmi.data[~phantom16.mask] == 0.0)


def test_spiral_scheme_invariants():
    scheme = make_spiral_scheme(32, 32, 8, sampling_fraction=1.0 / 8.0)
    fm = scheme.frame_masks
    assert fm.shape == (8, 32, 32)
    assert fm[:, 16, 16].all()  # DC in every frame
    frac = fm.mean(axis=(1, 2))
    assert np.all(np.abs(frac - 1.0 / 8.0) <= 0.1 / 8.0)
    # golden-angle rotation makes consecutive frames differ
    distinct = {fm[i].tobytes() for i in range(8)}
    assert len(distinct) == 8


def test_full_fraction_samples_everything():
    scheme = make_spiral_scheme(8, 8, 3, sampling_fraction=1.0)
    assert scheme.frame_masks.all()


def test_scheme_odd_canvas():
    scheme = make_spiral_scheme(17, 15, 4, sampling_fraction=0.25)
    assert scheme.frame_masks.shape == (4, 17, 15)
    assert scheme.frame_masks[:, 8, 7].all()


def test_full_sampling_roundtrip(sched, phantom16):
    tsmi = forward_simulate(phantom16, sched)
    scheme = make_spiral_scheme(16, 16, sched.d0, sampling_fraction=1.0)
    back = undersample(tsmi, scheme, noise_sigma=0.0)
    assert np.max(np.abs(back.data - tsmi.data)) < 1e-9


def test_dc_only_keeps_frame_mean(sched):
    maps = ParametricMaps(
        t1_ms=np.full((8, 8), 900.0), t2_ms=np.full((8, 8), 90.0),
        pd=np.ones((8, 8)), mask=np.ones((8, 8), dtype=bool),
    )
    tsmi = forward_simulate(maps, sched)
    masks = np.zeros((sched.d0, 8, 8), dtype=bool)
    masks[:, 4, 4] = True
    scheme = make_spiral_scheme(8, 8, sched.d0, sampling_fraction=1.0)
    object.__setattr__(scheme, "frame_masks", masks)
    out = undersample(tsmi, scheme)
    # a constant image lives entirely in DC, so it survives unchanged
    np.testing.assert_allclose(out.data, tsmi.data, atol=1e-12)


def test_noise_variance_prediction(sched):
    """Parseval: k-space noise on m cells -> image variance m*sigma^2/(HW)^2."""
    h = w = 24
    maps = ParametricMaps(
        t1_ms=np.full((h, w), 800.0), t2_ms=np.full((h, w), 80.0),
        pd=np.ones((h, w)), mask=np.ones((h, w), dtype=bool),
    )
    tsmi = forward_simulate(maps, sched)
    scheme = make_spiral_scheme(h, w, sched.d0, sampling_fraction=0.25)
    sigma = 0.05
    clean = undersample(tsmi, scheme, noise_sigma=0.0)
    noisy = undersample(tsmi, scheme, noise_sigma=sigma, seed=3)
    resid = noisy.data - clean.data
    m = scheme.frame_masks[0].sum(dtype=float)
    predicted = m * sigma**2 / (h * w) ** 2
    measured = resid.var()
    assert abs(measured / predicted - 1.0) < 0.05


def test_undersample_deterministic(sched, phantom16):
    tsmi = forward_simulate(phantom16, sched)
    scheme = make_spiral_scheme(16, 16, sched.d0, sampling_fraction=0.25)
    a = undersample(tsmi, scheme, noise_sigma=0.01, seed=5)
    b = undersample(tsmi, scheme, noise_sigma=0.01, seed=5)
    np.testing.assert_array_equal(a.data, b.data)
    c = undersample(tsmi, scheme, noise_sigma=0.01, seed=6)
    assert not np.array_equal(a.data, c.data)


def test_undersample_rejects_compressed(sched):
    tsmi = TSMI(data=np.zeros((4, 4, 6)), kind="compressed")
    scheme = make_spiral_scheme(4, 4, 6, sampling_fraction=1.0)
    with pytest.raises(ValueError):
        undersample(tsmi, scheme)


def test_augment_identity_params(sched, phantom16):
    tsmi = forward_simulate(phantom16, sched)
    params = AugmentParams(max_translation_px=0, max_rotation_deg=0.0,
                           scale_min=1.0, scale_max=1.0, noise_sigma=0.0)
    assert transform_identity(params)
    out_tsmi, out_maps = augment((tsmi, phantom16), params, seed=0)
    np.testing.assert_array_equal(out_tsmi.data, tsmi.data)
    np.testing.assert_array_equal(out_maps.t1_ms, phantom16.t1_ms)
    np.testing.assert_array_equal(out_maps.mask, phantom16.mask)


def test_augment_pure_translation(sched, phantom16):
    tsmi = forward_simulate(phantom16, sched)
    # mirror the augmenter's own draws to know the shift it will apply
    params = AugmentParams(max_translation_px=3, max_rotation_deg=0.0,
                           scale_min=1.0, scale_max=1.0, noise_sigma=0.0)
    rng = np.random.default_rng(9)
    dy = int(rng.integers(-3, 4))
    dx = int(rng.integers(-3, 4))
    out_tsmi, out_maps = augment((tsmi, phantom16), params, seed=9)
    h, w = phantom16.shape
    for i in range(h):
        for j in range(w):
            si, sj = i - dy, j - dx
            if 0 <= si < h and 0 <= sj < w:
                assert out_maps.mask[i, j] == phantom16.mask[si, sj]
                if out_maps.mask[i, j]:
                    assert out_maps.t1_ms[i, j] == phantom16.t1_ms[si, sj]
                    assert out_tsmi.data[i, j, 0] == tsmi.data[si, sj, 0]
            else:
                assert not out_maps.mask[i, j]


def test_augment_same_transform_on_all_channels(sched, phantom16):
    tsmi = forward_simulate(phantom16, sched)
    params = AugmentParams(noise_sigma=0.0)
    out_tsmi, out_maps = augment((tsmi, phantom16), params, seed=4)
    out_maps.validate()
    # wherever the warped mask is set, the tsmi voxel must be the fingerprint
    # of the warped tissue: check zero/nonzero consistency
    fg = out_maps.mask
    assert np.all(np.abs(out_tsmi.data[fg]).max(axis=1) > 0.0)
    assert np.all(out_tsmi.data[~fg] == 0.0)


def test_augment_deterministic_and_noise_only_on_tsmi(sched, phantom16):
    tsmi = forward_simulate(phantom16, sched)
    params = AugmentParams(noise_sigma=0.01)
    a_tsmi, a_maps = augment((tsmi, phantom16), params, seed=12)
    b_tsmi, b_maps = augment((tsmi, phantom16), params, seed=12)
    np.testing.assert_array_equal(a_tsmi.data, b_tsmi.data)
    np.testing.assert_array_equal(a_maps.t1_ms, b_maps.t1_ms)
    quiet_tsmi, quiet_maps = augment(
        (tsmi, phantom16), AugmentParams(noise_sigma=0.0), seed=12)
    np.testing.assert_array_equal(a_maps.t1_ms, quiet_maps.t1_ms)
    assert not np.array_equal(a_tsmi.data, quiet_tsmi.data)


def test_sample_roundtrip(tmp_path, sched, phantom16):
    tsmi = forward_simulate(phantom16, sched)
    path = tmp_path / "s.mrfa"
    save_sample(path, tsmi, phantom16)
    back_tsmi, back_maps = load_sample(path)
    np.testing.assert_array_equal(back_tsmi.data, tsmi.data)
    np.testing.assert_array_equal(back_maps.t1_ms, phantom16.t1_ms)
    np.testing.assert_array_equal(back_maps.mask, phantom16.mask)
    assert back_maps.mask.dtype == bool


def test_maps_roundtrip(tmp_path, phantom16):
    path = tmp_path / "m.mrfa"
    save_maps(path, phantom16)
    back = load_maps(path)
    np.testing.assert_array_equal(back.t2_ms, phantom16.t2_ms)
    np.testing.assert_array_equal(back.pd, phantom16.pd)


def test_maps_file_not_a_sample_file(tmp_path, sched, phantom16):
    tsmi = forward_simulate(phantom16, sched)
    path = tmp_path / "s.mrfa"
    save_sample(path, tsmi, phantom16)
    with pytest.raises(ValueError):
        load_maps(path)

"""Map-quality metrics against scalar-loop references."""

import csv
import math

import numpy as np
import pytest

from mrfpipe.images import ParametricMaps
from mrfpipe.metrics import (CHANNELS, DEFAULT_PEAKS, EvalReport, evaluate,
                             write_report_csv)
from oracles import scalar_mae_rmse_psnr


def _maps_from(t1, t2, pd, mask):
    m = np.asarray(mask, dtype=bool)
    return ParametricMaps(
        t1_ms=np.where(m, t1, 0.0), t2_ms=np.where(m, t2, 0.0),
        pd=np.where(m, pd, 0.0), mask=m,
    )


def _random_pair(seed, h=9, w=7):
    rng = np.random.default_rng(seed)
    mask_a = rng.random((h, w)) > 0.2
    mask_b = rng.random((h, w)) > 0.2
    def draw():
        return (rng.uniform(200, 3000, (h, w)), rng.uniform(30, 400, (h, w)),
                rng.uniform(0.5, 1.5, (h, w)))
    pa = _maps_from(*draw(), mask_a)
    pb = _maps_from(*draw(), mask_b)
    return pa, pb


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_channel_metrics_match_scalar_loops(seed):
    pred, truth = _random_pair(seed)
    report = evaluate(pred, truth, method="probe")
    both = pred.mask & truth.mask
    for name, peak in zip(CHANNELS, DEFAULT_PEAKS):
        attr = {"t1_ms": "t1", "t2_ms": "t2", "pd": "pd"}[name]
        cm = getattr(report, attr)
        mae, rmse, psnr = scalar_mae_rmse_psnr(
            getattr(pred, name), getattr(truth, name), both, peak)
        assert cm.mae == pytest.approx(mae, rel=1e-12)
        assert cm.rmse == pytest.approx(rmse, rel=1e-12)
        assert cm.psnr_db == pytest.approx(psnr, rel=1e-12)
        assert cm.normalized_mae == pytest.approx(mae / peak, rel=1e-12)
    assert report.voxels == int(np.sum(both))
    assert report.method == "probe"


def test_metrics_use_mask_intersection_only():
    h = w = 6
    t1 = np.full((h, w), 1000.0)
    truth = _maps_from(t1, t1 / 5, np.ones((h, w)), np.ones((h, w), bool))
    # Predicted masks out the right half; garbage there must not count.
    pred_mask = np.ones((h, w), bool)
    pred_mask[:, 3:] = False
    t1_pred = t1.copy()
    t1_pred[:, 3:] = 9e9  # would wreck MAE if included
    pred = _maps_from(t1_pred, t1 / 5, np.ones((h, w)), pred_mask)
    report = evaluate(pred, truth)
    assert report.t1.mae == 0.0
    assert report.voxels == h * 3


def test_perfect_prediction_gives_infinite_psnr():
    pred, _ = _random_pair(5)
    report = evaluate(pred, pred)
    for attr in ("t1", "t2", "pd"):
        cm = getattr(report, attr)
        assert cm.mae == 0.0
        assert cm.rmse == 0.0
        assert math.isinf(cm.psnr_db)
        assert cm.psnr_db > 0


def test_psnr_formula_spot_value():
    h = w = 4
    ones = np.ones((h, w), bool)
    truth = _maps_from(np.full((h, w), 1000.0), np.full((h, w), 100.0),
                       np.ones((h, w)), ones)
    pred = _maps_from(np.full((h, w), 1040.0), np.full((h, w), 100.0),
                      np.ones((h, w)), ones)
    report = evaluate(pred, truth)
    # rmse = 40, peak 4000 -> 20*log10(100) = 40 dB
    assert report.t1.rmse == pytest.approx(40.0)
    assert report.t1.psnr_db == pytest.approx(40.0)


def test_custom_peaks_change_normalization():
    pred, truth = _random_pair(3)
    base = evaluate(pred, truth)
    scaled = evaluate(pred, truth, peaks=(8000.0, 1200.0, 4.0))
    assert scaled.t1.mae == pytest.approx(base.t1.mae, rel=1e-12)
    assert scaled.t1.normalized_mae == pytest.approx(base.t1.normalized_mae / 2,
                                                     rel=1e-12)
    assert scaled.t2.psnr_db == pytest.approx(base.t2.psnr_db + 20 * math.log10(2),
                                              rel=1e-12)


def test_empty_intersection_rejected():
    h = w = 4
    left = np.zeros((h, w), bool)
    left[:, :2] = True
    a = _maps_from(np.full((h, w), 500.0), np.full((h, w), 50.0),
                   np.ones((h, w)), left)
    b = _maps_from(np.full((h, w), 500.0), np.full((h, w), 50.0),
                   np.ones((h, w)), ~left)
    with pytest.raises(ValueError):
        evaluate(a, b)


def test_shape_mismatch_rejected():
    a, _ = _random_pair(0, h=5, w=5)
    b, _ = _random_pair(0, h=6, w=5)
    with pytest.raises(ValueError):
        evaluate(a, b)


def test_report_rows_and_csv(tmp_path):
    pred, truth = _random_pair(7)
    ra = evaluate(pred, truth, method="net", seconds=1.25)
    rb = evaluate(truth, pred, method="dm")
    path = tmp_path / "metrics.csv"
    write_report_csv(path, [ra, rb])
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["method", "channel", "mae", "rmse", "psnr_db",
                       "normalized_mae", "voxels", "seconds"]
    assert len(rows) == 1 + 6  # two reports x three channels
    assert rows[1][0] == "net"
    assert rows[1][1] == "t1_ms"
    # values are written with six fixed decimals
    assert float(rows[1][2]) == pytest.approx(ra.t1.mae, abs=5e-7)
    assert rows[1][7] == "1.250000"
    assert rows[4][0] == "dm"
    assert rows[4][7] == ""  # seconds omitted


def test_channel_lookup():
    pred, truth = _random_pair(11)
    report = evaluate(pred, truth)
    assert report.channel("t2_ms") is report.t2
    with pytest.raises(KeyError):
        report.channel("flow")


@pytest.mark.parametrize("seed", [3, 4])
def test_error_magnitudes_symmetric(seed):
    a, b = _random_pair(seed)
    fwd = evaluate(a, b, method="fwd")
    rev = evaluate(b, a, method="rev")
    for attr in ("t1", "t2", "pd"):
        assert getattr(fwd, attr).mae == getattr(rev, attr).mae
        assert getattr(fwd, attr).rmse == getattr(rev, attr).rmse
    assert fwd.voxels == rev.voxels

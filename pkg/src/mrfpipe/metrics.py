"""Map-accuracy metrics against a ground-truth phantom."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .images import ParametricMaps

# Peaks used for PSNR and for normalized error; match the model's
# denormalization range so normalized MAE is comparable across channels.
DEFAULT_PEAKS = (4000.0, 600.0, 2.0)

CHANNELS = ("t1_ms", "t2_ms", "pd")


@dataclass(frozen=True)
class ChannelMetrics:
    mae: float
    rmse: float
    psnr_db: float
    normalized_mae: float


@dataclass(frozen=True)
class EvalReport:
    method: str
    voxels: int
    seconds: float | None
    t1: ChannelMetrics
    t2: ChannelMetrics
    pd: ChannelMetrics

    def channel(self, name: str) -> ChannelMetrics:
        return {"t1_ms": self.t1, "t2_ms": self.t2, "pd": self.pd}[name]

    def rows(self):
        """Per-channel rows: (method, channel, mae, rmse, psnr_db, normalized_mae)."""
        out = []
        for name in CHANNELS:
            c = self.channel(name)
            out.append((self.method, name, c.mae, c.rmse, c.psnr_db, c.normalized_mae))
        return out


def _channel_metrics(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray,
                     peak: float) -> ChannelMetrics:
    diff = pred[mask] - truth[mask]
    mae = float(np.mean(np.abs(diff)))
    rmse = float(np.sqrt(np.mean(diff * diff)))
    psnr = math.inf if rmse == 0.0 else 20.0 * math.log10(peak / rmse)
    return ChannelMetrics(mae=mae, rmse=rmse, psnr_db=psnr, normalized_mae=mae / peak)


def evaluate(
    predicted: ParametricMaps,
    truth: ParametricMaps,
    method: str = "",
    seconds: float | None = None,
    peaks=DEFAULT_PEAKS,
) -> EvalReport:
    """Compare maps on the intersection of both masks.

    Raises ValueError when the shapes disagree or the intersection is empty.
    """
    if predicted.shape != truth.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    mask = predicted.mask & truth.mask
    n = int(mask.sum())
    if n == 0:
        raise ValueError("mask intersection is empty")
    stats = [
        _channel_metrics(getattr(predicted, name), getattr(truth, name), mask, peak)
        for name, peak in zip(CHANNELS, peaks)
    ]
    return EvalReport(method=method, voxels=n, seconds=seconds,
                      t1=stats[0], t2=stats[1], pd=stats[2])


def write_report_csv(path, reports) -> None:
    """Delimited summary, one row per (method, channel)."""
    lines = ["method,channel,mae,rmse,psnr_db,normalized_mae,voxels,seconds"]
    for rep in reports:
        secs = "" if rep.seconds is None else f"{rep.seconds:.6f}"
        for method, channel, mae, rmse, psnr, nmae in rep.rows():
            lines.append(
                f"{method},{channel},{mae:.6f},{rmse:.6f},{psnr:.6f},"
                f"{nmae:.6f},{rep.voxels},{secs}"
            )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

"""Masked mean-squared-error loss."""

from __future__ import annotations

import numpy as np


def _broadcast_mask(mask, shape) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    try:
        return np.broadcast_to(mask, shape)
    except ValueError as exc:
        raise ValueError(f"mask shape {mask.shape} does not broadcast to {shape}") from exc


def mse_loss(pred: np.ndarray, target: np.ndarray, mask=None) -> float:
    """Mean of squared differences over unmasked entries.

    ``mask`` may be None (all entries count) or any boolean array that
    broadcasts to the prediction shape, e.g. (H, W) against (N, C, H, W).
    """
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if mask is None:
        count = pred.size
        diff = pred - target
        return float(np.sum(diff * diff) / count)
    m = _broadcast_mask(mask, pred.shape)
    count = int(m.sum())
    if count == 0:
        raise ValueError("mask excludes every entry")
    diff = np.where(m, pred - target, 0.0)
    return float(np.sum(diff * diff) / count)


def mse_loss_backward(pred: np.ndarray, target: np.ndarray, mask=None) -> np.ndarray:
    """Gradient of :func:`mse_loss` w.r.t. the prediction."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if mask is None:
        return 2.0 * (pred - target) / pred.size
    m = _broadcast_mask(mask, pred.shape)
    count = int(m.sum())
    if count == 0:
        raise ValueError("mask excludes every entry")
    return np.where(m, 2.0 * (pred - target) / count, 0.0)

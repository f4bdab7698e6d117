"""Supervised training of the coefficient-to-maps network.

Targets are parametric maps normalized channel-wise by the model's
constants; the loss is mean squared error restricted to mask voxels. The
subspace basis is fixed before training starts and is never updated here:
samples arrive already projected, and the loop only touches network
parameters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .acquisition import AugmentParams, augment, transform_identity
from .images import TSMI, ParametricMaps
from .model import Model
from .nn import AdamState, adam_step, mse_loss, mse_loss_backward
from .subspace import SubspaceBasis, project


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: int = 2
    learning_rate: float = 1e-3
    lr_min_factor: float = 0.05
    seed: int = 0
    augment: bool = True
    augment_params: AugmentParams = field(
        default_factory=lambda: AugmentParams(
            max_translation_px=6, max_rotation_deg=0.0,
            scale_min=1.0, scale_max=1.0, noise_sigma=0.002,
        )
    )
    val_every: int = 1

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.lr_min_factor <= 1.0:
            raise ValueError("lr_min_factor must lie in (0, 1]")
        if self.val_every <= 0:
            raise ValueError("val_every must be positive")


@dataclass(frozen=True)
class TrainRecord:
    epoch: int
    train_loss: float
    val_loss: float | None


@dataclass
class TrainResult:
    records: list
    seconds: float
    steps: int

    @property
    def final_train_loss(self) -> float:
        return self.records[-1].train_loss

    @property
    def final_val_loss(self):
        for rec in reversed(self.records):
            if rec.val_loss is not None:
                return rec.val_loss
        return None


def compress_samples(samples, basis: SubspaceBasis):
    """Project raw (TSMI, maps) pairs into the subspace once, up front."""
    out = []
    for tsmi, maps in samples:
        if tsmi.kind != "raw":
            raise ValueError("compress_samples expects raw TSMIs")
        h, w, t = tsmi.shape
        if t != basis.d0:
            raise ValueError(f"TSMI has {t} frames, basis expects {basis.d0}")
        coeffs = project(tsmi.voxels(), basis).reshape(h, w, basis.d1)
        out.append((TSMI(data=coeffs, kind="compressed"), maps))
    return out


def _sample_tensors(tsmi: TSMI, maps: ParametricMaps, norm: np.ndarray):
    """One sample as (x, target, mask) in network layout."""
    x = tsmi.data.transpose(2, 0, 1)
    target = maps.channels().transpose(2, 0, 1) / norm[:, None, None]
    return x, target, maps.mask


def evaluate_loss(model: Model, samples, norm: np.ndarray) -> float:
    """Masked MSE over a sample collection, eval-mode forward."""
    se = 0.0
    count = 0
    for tsmi, maps in samples:
        x, target, mask = _sample_tensors(tsmi, maps, norm)
        pred = model.forward(x[None], train=False)[0]
        diff = (pred - target)[:, mask]
        se += float(np.sum(diff * diff))
        count += diff.size
    if count == 0:
        raise ValueError("no masked voxels in the evaluation set")
    return se / count


def epoch_learning_rate(config: TrainConfig, epoch: int) -> float:
    """Cosine decay from the base rate down to lr_min_factor times it."""
    if config.epochs == 1:
        return config.learning_rate
    frac = (epoch - 1) / (config.epochs - 1)
    shape = 0.5 * (1.0 + math.cos(math.pi * frac))
    return config.learning_rate * (
        config.lr_min_factor + (1.0 - config.lr_min_factor) * shape
    )


def train(
    model: Model,
    samples,
    config: TrainConfig,
    val_samples=(),
    on_epoch=None,
) -> tuple[TrainResult, AdamState]:
    """Run the optimization loop over compressed samples.

    All samples must share one canvas size so they stack into batches.
    ``on_epoch`` (if given) receives each TrainRecord as it is produced.
    Returns the loss history and the final optimizer state.
    """
    if not samples:
        raise ValueError("no training samples")
    d1 = model.config.input_channels
    shape0 = samples[0][0].shape[:2]
    for tsmi, maps in list(samples) + list(val_samples):
        if tsmi.kind != "compressed" or tsmi.shape[2] != d1:
            raise ValueError(
                f"expected compressed samples with {d1} channels, got "
                f"kind={tsmi.kind!r} shape={tsmi.shape}"
            )
        if tsmi.shape[:2] != shape0 or maps.shape != shape0:
            raise ValueError("all samples must share one canvas size")

    norm = model.config.norm_constants
    params = model.parameters()
    adam = AdamState(learning_rate=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    use_aug = config.augment and not transform_identity(config.augment_params)

    records = []
    steps = 0
    t0 = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        adam.learning_rate = epoch_learning_rate(config, epoch)
        order = rng.permutation(len(samples))
        loss_sum = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            xs, ts, ms = [], [], []
            for i in batch_idx:
                tsmi, maps = samples[int(i)]
                if use_aug:
                    tsmi, maps = augment(
                        (tsmi, maps), config.augment_params,
                        seed=(config.seed, epoch, int(i)),
                    )
                x, target, mask = _sample_tensors(tsmi, maps, norm)
                xs.append(x)
                ts.append(target)
                ms.append(mask)
            mask = np.stack(ms)[:, None]
            if not mask.any():
                continue  # augmentation can empty a mask in principle
            x = np.stack(xs)
            target = np.stack(ts)
            pred = model.forward(x, train=True, dropout_seed=(config.seed, epoch, steps))
            loss = mse_loss(pred, target, mask)
            model.backward(mse_loss_backward(pred, target, mask))
            adam_step(params, model.gradients(), adam)
            loss_sum += loss
            n_batches += 1
            steps += 1
        train_loss = loss_sum / max(n_batches, 1)
        val_loss = None
        if val_samples and (epoch % config.val_every == 0 or epoch == config.epochs):
            val_loss = evaluate_loss(model, val_samples, norm)
        rec = TrainRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss)
        records.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
    seconds = time.perf_counter() - t0
    return TrainResult(records=records, seconds=seconds, steps=steps), adam

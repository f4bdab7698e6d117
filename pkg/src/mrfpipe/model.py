"""Fully convolutional mapper from subspace coefficient images to maps.

Architecture: four separable blocks (depthwise 3x3 -> pointwise 1x1 -> ReLU
-> dropout) taking the channel count from d1 through (256, 128, 64, 32),
then a pointwise 32->3 with ReLU and a linear pointwise 3->3 head. No
pooling anywhere, so spatial dims are preserved end to end. The network
regresses per-channel normalized (T1, T2, PD); the public inference API
denormalizes before returning.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .images import TSMI, ParametricMaps
from .mrfa import read_arrays, write_arrays
from .nn import AdamState, DepthwiseConv3x3, Dropout, PointwiseConv, ReLU
from .subspace import SubspaceBasis, load_basis, project, save_basis


@dataclass(frozen=True)
class ModelConfig:
    """Channel plan and output normalization constants."""

    input_channels: int = 10
    block_channels: tuple = (256, 128, 64, 32)
    head_channels: int = 3
    dropout_rate: float = 0.1
    t1_max_ms: float = 4000.0
    t2_max_ms: float = 600.0
    pd_max: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "block_channels", tuple(int(c) for c in self.block_channels))
        if self.input_channels <= 0 or any(c <= 0 for c in self.block_channels):
            raise ValueError("channel counts must be positive")
        if len(self.block_channels) == 0:
            raise ValueError("at least one separable block is required")
        if self.head_channels != 3:
            raise ValueError("head must emit 3 channels (T1, T2, PD)")
        if min(self.t1_max_ms, self.t2_max_ms, self.pd_max) <= 0.0:
            raise ValueError("normalization constants must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def channel_trace(self) -> tuple:
        return (self.input_channels, *self.block_channels,
                self.head_channels, self.head_channels)

    @property
    def norm_constants(self) -> np.ndarray:
        return np.array([self.t1_max_ms, self.t2_max_ms, self.pd_max])


class Model:
    """Ordered layer list with explicit forward/backward passes."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.layers = []  # (name, layer) pairs
        chans = [config.input_channels, *config.block_channels]
        for i in range(len(config.block_channels)):
            cin, cout = chans[i], chans[i + 1]
            self.layers.append((f"block{i + 1}.depthwise", DepthwiseConv3x3(cin)))
            self.layers.append((f"block{i + 1}.pointwise", PointwiseConv(cin, cout)))
            self.layers.append((f"block{i + 1}.relu", ReLU()))
            self.layers.append((f"block{i + 1}.dropout", Dropout(config.dropout_rate)))
        self.layers.append(("head1.pointwise", PointwiseConv(chans[-1], config.head_channels)))
        self.layers.append(("head1.relu", ReLU()))
        self.layers.append(("head2.pointwise", PointwiseConv(config.head_channels,
                                                             config.head_channels)))

    def initialize(self, seed: int) -> None:
        """He fan-in initialization; draw order follows the layer order."""
        rng = np.random.default_rng(seed)
        for _, layer in self.layers:
            if isinstance(layer, DepthwiseConv3x3):
                layer.kernels = rng.standard_normal(layer.kernels.shape) * np.sqrt(2.0 / 9.0)
                layer.bias = np.zeros_like(layer.bias)
            elif isinstance(layer, PointwiseConv):
                layer.weight = rng.standard_normal(layer.weight.shape) * np.sqrt(
                    2.0 / layer.in_channels
                )
                layer.bias = np.zeros_like(layer.bias)

    def forward(self, x: np.ndarray, train: bool = False, dropout_seed=0) -> np.ndarray:
        """(N, d1, H, W) -> (N, 3, H, W) in normalized units.

        ``dropout_seed`` may be an int or a tuple of ints; each dropout
        layer derives its own stream from it plus the layer position.
        """
        base = tuple(dropout_seed) if isinstance(dropout_seed, (tuple, list)) else (dropout_seed,)
        for idx, (_, layer) in enumerate(self.layers):
            if isinstance(layer, Dropout):
                x = layer.forward(x, train=train, seed=(*base, idx))
            else:
                x = layer.forward(x)
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        for _, layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def parameters(self):
        out = []
        for name, layer in self.layers:
            out += [(f"{name}.{p}", arr) for p, arr in layer.parameters()]
        return out

    def gradients(self):
        out = []
        for name, layer in self.layers:
            out += [(f"{name}.{p}", arr) for p, arr in layer.gradients()]
        return out

    def parameter_count(self) -> int:
        return sum(arr.size for _, arr in self.parameters())

    def channel_trace(self) -> tuple:
        """Input channel count followed by every conv layer's output width."""
        trace = [self.config.input_channels]
        for _, layer in self.layers:
            if isinstance(layer, DepthwiseConv3x3):
                continue
            if isinstance(layer, PointwiseConv):
                trace.append(layer.out_channels)
        return tuple(trace)

    def set_parameters(self, named_arrays: dict) -> None:
        for name, arr in self.parameters():
            if name not in named_arrays:
                raise ValueError(f"missing parameter {name!r}")
            src = named_arrays[name]
            if src.shape != arr.shape:
                raise ValueError(f"shape mismatch for {name!r}: {src.shape} vs {arr.shape}")
            arr[...] = src


def build_model(config: ModelConfig, seed: int) -> Model:
    """Construct and deterministically initialize the network."""
    model = Model(config)
    model.initialize(seed)
    return model


def infer(model: Model, coeff_image: np.ndarray) -> np.ndarray:
    """Eval-mode forward of one (H, W, d1) image, denormalized to (H, W, 3)."""
    coeff_image = np.asarray(coeff_image, dtype=float)
    if coeff_image.ndim != 3 or coeff_image.shape[2] != model.config.input_channels:
        raise ValueError(
            f"expected (H, W, {model.config.input_channels}) coefficients, "
            f"got {coeff_image.shape}"
        )
    x = coeff_image.transpose(2, 0, 1)[None]
    y = model.forward(x, train=False)[0]
    return y.transpose(1, 2, 0) * model.config.norm_constants


@dataclass
class Checkpoint:
    """Trained parameters plus everything needed to reproduce inference."""

    model: Model
    basis: SubspaceBasis
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.basis.d1 != self.model.config.input_channels:
            raise ValueError(
                f"basis d1 {self.basis.d1} != model input channels "
                f"{self.model.config.input_channels}"
            )


def _model_config_dict(config: ModelConfig) -> dict:
    return {
        "input_channels": config.input_channels,
        "block_channels": list(config.block_channels),
        "head_channels": config.head_channels,
        "dropout_rate": config.dropout_rate,
        "t1_max_ms": config.t1_max_ms,
        "t2_max_ms": config.t2_max_ms,
        "pd_max": config.pd_max,
    }


def save_checkpoint(
    directory,
    checkpoint: Checkpoint,
    adam_state: AdamState | None = None,
    config_text: str | None = None,
    loss_rows=None,
) -> None:
    """Write params, manifest, basis and training sidecars to a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    params = checkpoint.model.parameters()
    write_arrays(directory / "params.mrfa", [arr for _, arr in params])

    layers = []
    digest = hashlib.sha256()
    for name, arr in params:
        payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        digest.update(payload)
        layers.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "sha256": hashlib.sha256(payload).hexdigest(),
            }
        )
    manifest = {
        "layers": layers,
        "checksum": digest.hexdigest(),
        "model_config": _model_config_dict(checkpoint.model.config),
        "metadata": checkpoint.metadata,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    save_basis(checkpoint.basis, directory / "basis.mrfa", directory / "basis.txt")
    if adam_state is not None:
        arrays = []
        order = []
        for name, _ in params:
            arrays += [adam_state.m[name], adam_state.v[name]]
            order.append(name)
        write_arrays(directory / "adam.mrfa", arrays)
        (directory / "adam.json").write_text(
            json.dumps(
                {
                    "step": adam_state.step,
                    "learning_rate": adam_state.learning_rate,
                    "beta1": adam_state.beta1,
                    "beta2": adam_state.beta2,
                    "eps": adam_state.eps,
                    "order": order,
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
    if config_text is not None:
        (directory / "config.txt").write_text(config_text, encoding="utf-8")
    if loss_rows is not None:
        lines = ["epoch,train_loss,val_loss"]
        for epoch, train_loss, val_loss in loss_rows:
            val = "" if val_loss is None else repr(float(val_loss))
            lines.append(f"{epoch},{float(train_loss)!r},{val}")
        (directory / "loss.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(directory) -> Checkpoint:
    """Load a checkpoint directory, verifying the manifest checksum."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    mc = manifest["model_config"]
    config = ModelConfig(
        input_channels=mc["input_channels"],
        block_channels=tuple(mc["block_channels"]),
        head_channels=mc["head_channels"],
        dropout_rate=mc["dropout_rate"],
        t1_max_ms=mc["t1_max_ms"],
        t2_max_ms=mc["t2_max_ms"],
        pd_max=mc["pd_max"],
    )
    model = Model(config)
    arrays = read_arrays(directory / "params.mrfa")
    entries = manifest["layers"]
    if len(arrays) != len(entries):
        raise ValueError(
            f"{directory}: params.mrfa holds {len(arrays)} records, "
            f"manifest lists {len(entries)}"
        )
    named = {}
    digest = hashlib.sha256()
    for entry, arr in zip(entries, arrays):
        if list(arr.shape) != entry["shape"]:
            raise ValueError(f"{directory}: shape mismatch for {entry['name']!r}")
        payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        if hashlib.sha256(payload).hexdigest() != entry["sha256"]:
            raise ValueError(f"{directory}: checksum mismatch for {entry['name']!r}")
        digest.update(payload)
        named[entry["name"]] = arr
    if digest.hexdigest() != manifest["checksum"]:
        raise ValueError(f"{directory}: manifest content checksum mismatch")
    model.set_parameters(named)
    basis = load_basis(directory / "basis.mrfa", directory / "basis.txt")
    return Checkpoint(model=model, basis=basis, metadata=manifest.get("metadata", {}))


def reconstruct(
    tsmi: TSMI, checkpoint: Checkpoint, mask_rel_threshold: float = 1e-3
) -> tuple[ParametricMaps, float]:
    """Project a raw stack, run eval-mode inference, denormalize and mask.

    Voxels whose raw signal energy is below ``mask_rel_threshold`` times the
    maximum voxel norm are masked out. Returns (maps, wall seconds).
    """
    if tsmi.kind != "raw":
        raise ValueError("reconstruct expects a raw TSMI")
    h, w, t = tsmi.shape
    if t != checkpoint.basis.d0:
        raise ValueError(f"TSMI has {t} frames, basis expects {checkpoint.basis.d0}")
    t0 = time.perf_counter()
    vox = tsmi.voxels()
    coeffs = project(vox, checkpoint.basis)
    out = infer(checkpoint.model, coeffs.reshape(h, w, checkpoint.basis.d1))
    elapsed = time.perf_counter() - t0

    energy = np.linalg.norm(vox, axis=1).reshape(h, w)
    mask = energy > mask_rel_threshold * energy.max() if energy.max() > 0 else energy > 0
    t1 = np.where(mask, out[:, :, 0], 0.0)
    t2 = np.where(mask, out[:, :, 1], 0.0)
    pd = np.where(mask, out[:, :, 2], 0.0)
    maps = ParametricMaps(t1_ms=t1, t2_ms=t2, pd=pd, mask=mask)
    return maps, elapsed

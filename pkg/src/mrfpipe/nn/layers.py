"""Convolution, activation and dropout layers with explicit backward passes.

All convolutions preserve spatial dims: the 3x3 depthwise kernel uses zero
padding of 1, the 1x1 pointwise kernel needs none. He fan-in initialization
throughout (fan_in = 9 per channel for depthwise, C_in for pointwise).
"""

from __future__ import annotations

import numpy as np


def _check_4d(x: np.ndarray, channels: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 4:
        raise ValueError(f"expected (N, C, H, W) tensor, got shape {x.shape}")
    if channels is not None and x.shape[1] != channels:
        raise ValueError(f"expected {channels} channels, got {x.shape[1]}")
    return x


class DepthwiseConv3x3:
    """Per-channel 3x3 convolution; channel c of the output sees only
    channel c of the input."""

    def __init__(self, channels: int, rng: np.random.Generator | None = None):
        self.channels = channels
        if rng is None:
            self.kernels = np.zeros((channels, 3, 3))
        else:
            self.kernels = rng.standard_normal((channels, 3, 3)) * np.sqrt(2.0 / 9.0)
        self.bias = np.zeros(channels)
        self.grad_kernels = np.zeros_like(self.kernels)
        self.grad_bias = np.zeros_like(self.bias)
        self._x_pad = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _check_4d(x, self.channels)
        n, c, h, w = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        self._x_pad = xp
        out = np.empty((n, c, h, w))
        out[:] = self.bias[None, :, None, None]
        for u in range(3):
            for v in range(3):
                out += self.kernels[None, :, u, v, None, None] * xp[:, :, u : u + h, v : v + w]
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_out = _check_4d(grad_out, self.channels)
        xp = self._x_pad
        n, c, h, w = grad_out.shape
        self.grad_bias = grad_out.sum(axis=(0, 2, 3))
        self.grad_kernels = np.empty_like(self.kernels)
        gx_pad = np.zeros_like(xp)
        for u in range(3):
            for v in range(3):
                patch = xp[:, :, u : u + h, v : v + w]
                self.grad_kernels[:, u, v] = np.einsum("nchw,nchw->c", patch, grad_out)
                gx_pad[:, :, u : u + h, v : v + w] += (
                    self.kernels[None, :, u, v, None, None] * grad_out
                )
        return gx_pad[:, :, 1 : 1 + h, 1 : 1 + w]

    def parameters(self):
        return [("kernels", self.kernels), ("bias", self.bias)]

    def gradients(self):
        return [("kernels", self.grad_kernels), ("bias", self.grad_bias)]


class PointwiseConv:
    """1x1 convolution: a per-pixel linear map C_in -> C_out."""

    def __init__(self, in_channels: int, out_channels: int,
                 rng: np.random.Generator | None = None):
        self.in_channels = in_channels
        self.out_channels = out_channels
        if rng is None:
            self.weight = np.zeros((out_channels, in_channels))
        else:
            self.weight = rng.standard_normal((out_channels, in_channels)) * np.sqrt(
                2.0 / in_channels
            )
        self.bias = np.zeros(out_channels)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _check_4d(x, self.in_channels)
        self._x = x
        n, c, h, w = x.shape
        flat = x.transpose(0, 2, 3, 1).reshape(-1, c)  # (N*H*W, Cin)
        out = flat @ self.weight.T + self.bias
        return out.reshape(n, h, w, self.out_channels).transpose(0, 3, 1, 2)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_out = _check_4d(grad_out, self.out_channels)
        n, _, h, w = grad_out.shape
        gflat = grad_out.transpose(0, 2, 3, 1).reshape(-1, self.out_channels)
        xflat = self._x.transpose(0, 2, 3, 1).reshape(-1, self.in_channels)
        self.grad_weight = gflat.T @ xflat
        self.grad_bias = gflat.sum(axis=0)
        gx = gflat @ self.weight
        return gx.reshape(n, h, w, self.in_channels).transpose(0, 3, 1, 2)

    def parameters(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def gradients(self):
        return [("weight", self.grad_weight), ("bias", self.grad_bias)]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


class ReLU:
    """Elementwise max(0, x); the subgradient at 0 is taken as 0."""

    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return np.where(self._mask, grad_out, 0.0)

    def parameters(self):
        return []

    def gradients(self):
        return []


def dropout(x: np.ndarray, rate: float, train: bool, seed: int):
    """Inverted dropout. Returns (output, mask); mask is None in eval mode.

    The mask is regenerated from the seed alone, so a forward pass can be
    replayed bit-identically and the backward pass reuses the exact mask.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    x = np.asarray(x, dtype=float)
    if not train or rate == 0.0:
        return x, None
    rng = np.random.default_rng(seed)
    mask = rng.random(x.shape) >= rate
    return x * mask / (1.0 - rate), mask


class Dropout:
    """Seeded inverted dropout; identity in eval mode."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate
        self._mask = None

    def forward(self, x: np.ndarray, train: bool = False, seed: int = 0) -> np.ndarray:
        out, self._mask = dropout(x, self.rate, train, seed)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return grad_out
        return grad_out * self._mask / (1.0 - self.rate)

    def parameters(self):
        return []

    def gradients(self):
        return []

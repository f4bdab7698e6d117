"""Image-shaped containers: parametric maps and time-series image stacks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ParametricMaps:
    """Per-voxel T1 (ms), T2 (ms) and PD maps with a validity mask.

    Masked-out voxels always carry zeros in every channel.
    """

    t1_ms: np.ndarray
    t2_ms: np.ndarray
    pd: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.t1_ms = np.asarray(self.t1_ms, dtype=float)
        self.t2_ms = np.asarray(self.t2_ms, dtype=float)
        self.pd = np.asarray(self.pd, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        shape = self.t1_ms.shape
        if len(shape) != 2:
            raise ValueError("maps must be 2-D")
        for name in ("t2_ms", "pd", "mask"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} shape {getattr(self, name).shape} != {shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.t1_ms.shape

    def validate(self) -> None:
        """Check physical invariants; raises ValueError on violation."""
        m = self.mask
        if np.any(self.t1_ms[m] <= 0.0) or np.any(self.t2_ms[m] <= 0.0):
            raise ValueError("unmasked voxels must have positive T1 and T2")
        if np.any(self.t2_ms[m] > self.t1_ms[m]):
            raise ValueError("unmasked voxels must satisfy t2 <= t1")
        if np.any(self.pd[m] < 0.0):
            raise ValueError("unmasked voxels must have pd >= 0")
        out = ~m
        for name in ("t1_ms", "t2_ms", "pd"):
            if np.any(getattr(self, name)[out] != 0.0):
                raise ValueError(f"masked voxels must carry zeros in {name}")

    def channels(self) -> np.ndarray:
        """Stack the three value channels as (H, W, 3)."""
        return np.stack([self.t1_ms, self.t2_ms, self.pd], axis=-1)

    @staticmethod
    def zeros(height: int, width: int) -> "ParametricMaps":
        z = np.zeros((height, width))
        return ParametricMaps(
            t1_ms=z.copy(), t2_ms=z.copy(), pd=z.copy(),
            mask=np.zeros((height, width), dtype=bool),
        )


@dataclass
class TSMI:
    """Time-series of magnitude images, (H, W, T).

    ``kind`` is ``"raw"`` when T equals the acquired train length d0 and
    ``"compressed"`` when T equals the subspace dimension d1.
    """

    data: np.ndarray
    kind: str = "raw"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 3:
            raise ValueError("TSMI data must be (H, W, T)")
        if self.kind not in ("raw", "compressed"):
            raise ValueError("kind must be 'raw' or 'compressed'")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("TSMI entries must be finite")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]

    def voxels(self) -> np.ndarray:
        """Flatten to (H*W, T) voxel rows."""
        h, w, t = self.data.shape
        return self.data.reshape(h * w, t)

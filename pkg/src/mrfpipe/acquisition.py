"""Forward acquisition simulation: TSMI synthesis, k-space undersampling
with spiral-like on-grid masks, paired augmentation, and sample I/O.

The spiral trajectory is an Archimedean arc rasterized onto the Cartesian
k-space grid (centered DC), rotated per time frame and thinned to the target
sampling fraction. Thinning is radius-aware: a low-frequency core of the arc
is kept densely (as variable-density spiral acquisitions do) and the budget
remainder is spread evenly along the outer arc, so the rotating part of the
mask carries the per-frame incoherent aliasing. No non-uniform transforms
are involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .epg import SequenceSchedule, simulate_fingerprints
from .images import TSMI, ParametricMaps
from .mrfa import read_arrays, write_arrays

GOLDEN_ANGLE_DEG = 111.246


def forward_simulate(maps: ParametricMaps, schedule: SequenceSchedule) -> TSMI:
    """Per-voxel fingerprints scaled by PD; one simulation per unique tissue."""
    maps.validate()
    h, w = maps.shape
    data = np.zeros((h, w, schedule.d0))
    if maps.mask.any():
        t1 = maps.t1_ms[maps.mask]
        t2 = maps.t2_ms[maps.mask]
        pd = maps.pd[maps.mask]
        pairs = np.stack([t1, t2], axis=1)
        uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
        bank = simulate_fingerprints(schedule, uniq[:, 0], uniq[:, 1])
        data[maps.mask] = pd[:, None] * bank[inverse]
    return TSMI(data=data, kind="raw")


@dataclass(frozen=True)
class UndersamplingScheme:
    """Per-frame boolean k-space masks (centered DC convention)."""

    frame_masks: np.ndarray  # (T, H, W) bool
    sampling_fraction: float
    rotation_increment_deg: float

    def __post_init__(self):
        fm = np.asarray(self.frame_masks, dtype=bool)
        object.__setattr__(self, "frame_masks", fm)
        if fm.ndim != 3:
            raise ValueError("frame_masks must be (T, H, W)")
        if not 0.0 < self.sampling_fraction <= 1.0:
            raise ValueError("sampling_fraction must lie in (0, 1]")
        t, h, w = fm.shape
        if not fm[:, h // 2, w // 2].all():
            raise ValueError("every frame mask must sample the DC coefficient")
        measured = fm.mean(axis=(1, 2))
        if np.any(np.abs(measured - self.sampling_fraction) > 0.1 * self.sampling_fraction):
            raise ValueError("measured sampling fraction deviates more than 10%")


def _spiral_cells(h: int, w: int, rotation_rad: float) -> np.ndarray:
    """Distinct grid cells along a rotated Archimedean arc, path ordered.

    Arm spacing is one cell, so the arc visits essentially the whole grid;
    density shaping happens later by thinning the returned path.
    """
    r_max = np.hypot(h / 2.0, w / 2.0)
    turns = float(np.ceil(r_max)) + 1.0
    phi_max = 2.0 * np.pi * turns
    # sample the arc uniformly in path length (~r dphi), ~10 points per cell
    n_pts = int(10.0 * np.pi * r_max * r_max) + 64
    t = np.sqrt(np.linspace(0.0, 1.0, n_pts))
    phi = phi_max * t
    r = (r_max / phi_max) * phi
    ky = np.rint(r * np.sin(phi + rotation_rad)).astype(np.int64)
    kx = np.rint(r * np.cos(phi + rotation_rad)).astype(np.int64)
    keep = (
        (ky >= -(h // 2))
        & (ky <= (h - 1) // 2)
        & (kx >= -(w // 2))
        & (kx <= (w - 1) // 2)
    )
    cells = np.stack([ky[keep], kx[keep]], axis=1)
    # dedupe while preserving path order
    _, first = np.unique(cells, axis=0, return_index=True)
    return cells[np.sort(first)]


def _thin_radius_aware(cells: np.ndarray, n_target: int, core_fraction: float) -> np.ndarray:
    """Keep the full low-frequency disk that fits ``core_fraction`` of the
    budget, then spread the remainder evenly along the outer path."""
    if cells.shape[0] <= n_target:
        return cells
    radius = np.hypot(cells[:, 0], cells[:, 1])
    core_budget = int(core_fraction * n_target)
    in_core = np.zeros(cells.shape[0], dtype=bool)
    if core_budget >= 1:
        # largest radius whose complete disk still fits in the core budget
        sorted_r = np.sort(radius)
        r_core = sorted_r[core_budget - 1]
        if core_budget < sorted_r.size and sorted_r[core_budget] == r_core:
            smaller = sorted_r[sorted_r < r_core]
            r_core = smaller[-1] if smaller.size else -1.0
        in_core = radius <= r_core
    core = cells[in_core]
    outer = cells[~in_core]
    k = n_target - core.shape[0]
    if k <= 0:
        outer = outer[:0]
    elif outer.shape[0] > k:
        pick = np.unique(np.rint(np.linspace(0, outer.shape[0] - 1, k)).astype(np.int64))
        outer = outer[pick]
    return np.concatenate([core, outer], axis=0)


def make_spiral_scheme(
    height: int,
    width: int,
    n_frames: int,
    sampling_fraction: float = 1.0 / 16.0,
    rotation_increment_deg: float = GOLDEN_ANGLE_DEG,
) -> UndersamplingScheme:
    """Build per-frame spiral masks thinned to the requested fraction."""
    if not 0.0 < sampling_fraction <= 1.0:
        raise ValueError("sampling_fraction must lie in (0, 1]")
    n_target = max(1, round(sampling_fraction * height * width))
    masks = np.zeros((n_frames, height, width), dtype=bool)
    if sampling_fraction == 1.0:
        masks[:] = True
        return UndersamplingScheme(masks, sampling_fraction, rotation_increment_deg)
    for frame in range(n_frames):
        rot = np.deg2rad(rotation_increment_deg * frame)
        cells = _thin_radius_aware(_spiral_cells(height, width, rot), n_target,
                                   core_fraction=0.6)
        rows = cells[:, 0] + height // 2
        cols = cells[:, 1] + width // 2
        masks[frame, rows, cols] = True
        masks[frame, height // 2, width // 2] = True  # DC always sampled
        deficit = n_target - int(masks[frame].sum())
        if deficit > 0:
            # rasterization misses a few far-corner cells at high fractions;
            # top up deterministically from the lowest-radius unvisited ones
            ky, kx = np.nonzero(~masks[frame])
            order = np.lexsort((kx, ky, np.hypot(ky - height // 2, kx - width // 2)))
            masks[frame, ky[order[:deficit]], kx[order[:deficit]]] = True
    return UndersamplingScheme(masks, sampling_fraction, rotation_increment_deg)


def undersample(
    tsmi: TSMI, scheme: UndersamplingScheme, noise_sigma: float = 0.0, seed: int = 0
) -> TSMI:
    """Mask each frame's centered 2-D spectrum, add complex noise, transform back.

    Noise with standard deviation ``noise_sigma`` is added independently to
    the real and imaginary part of every retained k-space sample. The real
    part of the inverse transform is kept.
    """
    if tsmi.kind != "raw":
        raise ValueError("undersample expects a raw TSMI")
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be >= 0")
    h, w, t = tsmi.shape
    if scheme.frame_masks.shape != (t, h, w):
        raise ValueError(
            f"scheme masks {scheme.frame_masks.shape} do not fit TSMI {(t, h, w)}"
        )
    rng = np.random.default_rng(seed)
    out = np.empty_like(tsmi.data)
    for i in range(t):
        k = np.fft.fftshift(np.fft.fft2(tsmi.data[:, :, i]))
        mask = scheme.frame_masks[i]
        k = np.where(mask, k, 0.0)
        if noise_sigma > 0.0:
            m = int(mask.sum())
            noise = noise_sigma * (
                rng.standard_normal(m) + 1j * rng.standard_normal(m)
            )
            k[mask] += noise
        out[:, :, i] = np.real(np.fft.ifft2(np.fft.ifftshift(k)))
    return TSMI(data=out, kind="raw")


@dataclass(frozen=True)
class AugmentParams:
    """Draw ranges for the paired geometric + noise augmentation."""

    max_translation_px: int = 4
    max_rotation_deg: float = 15.0
    scale_min: float = 0.9
    scale_max: float = 1.1
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.scale_min <= 0.0 or self.scale_max < self.scale_min:
            raise ValueError("need 0 < scale_min <= scale_max")
        if self.max_translation_px < 0 or self.max_rotation_deg < 0 or self.noise_sigma < 0:
            raise ValueError("augmentation magnitudes must be >= 0")


def _resample_nearest(stack, dy, dx, angle_deg, scale):
    """Inverse-map nearest-neighbor warp of an (H, W, C) stack, zero fill.

    The forward transform scales about the image center, rotates about it,
    then translates by integer pixels. Nearest-neighbor lookup keeps tissue
    values exact instead of blending unphysical mixtures.
    """
    h, w = stack.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    yq = rows - dy - cy
    xq = cols - dx - cx
    a = np.deg2rad(angle_deg)
    ys = (np.cos(a) * yq + np.sin(a) * xq) / scale + cy
    xs = (-np.sin(a) * yq + np.cos(a) * xq) / scale + cx
    yi = np.rint(ys).astype(np.int64)
    xi = np.rint(xs).astype(np.int64)
    valid = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
    yi = np.clip(yi, 0, h - 1)
    xi = np.clip(xi, 0, w - 1)
    warped = stack[yi, xi]
    warped[~valid] = 0
    return warped, valid


def augment(
    sample: tuple[TSMI, ParametricMaps],
    params: AugmentParams,
    seed,
) -> tuple[TSMI, ParametricMaps]:
    """Apply one random rigid+scale transform to a (TSMI, maps) pair.

    The identical transform hits the image stack, all three maps and the
    mask; Gaussian noise is then added to the TSMI only. Deterministic for
    a given seed.
    """
    tsmi, maps = sample
    if tsmi.data.shape[:2] != maps.shape:
        raise ValueError("TSMI and maps disagree on the canvas size")
    rng = np.random.default_rng(seed)
    dy = int(rng.integers(-params.max_translation_px, params.max_translation_px + 1))
    dx = int(rng.integers(-params.max_translation_px, params.max_translation_px + 1))
    angle = float(rng.uniform(-params.max_rotation_deg, params.max_rotation_deg))
    scale = float(rng.uniform(params.scale_min, params.scale_max))

    stack = np.concatenate([tsmi.data, maps.channels()], axis=2)
    warped, valid = _resample_nearest(stack, dy, dx, angle, scale)
    mask_w, _ = _resample_nearest(maps.mask[:, :, None].astype(float), dy, dx, angle, scale)
    new_mask = (mask_w[:, :, 0] > 0.5) & valid

    t = tsmi.data.shape[2]
    data = warped[:, :, :t]
    if params.noise_sigma > 0.0:
        data = data + params.noise_sigma * rng.standard_normal(data.shape)
    t1, t2, pd = warped[:, :, t], warped[:, :, t + 1], warped[:, :, t + 2]
    zero = ~new_mask
    t1[zero] = 0.0
    t2[zero] = 0.0
    pd[zero] = 0.0
    return (
        TSMI(data=data, kind=tsmi.kind),
        ParametricMaps(t1_ms=t1, t2_ms=t2, pd=pd, mask=new_mask),
    )


def transform_identity(params: AugmentParams) -> bool:
    """True when the parameter ranges can only draw the identity transform."""
    return (
        params.max_translation_px == 0
        and params.max_rotation_deg == 0.0
        and params.scale_min == 1.0
        and params.scale_max == 1.0
        and params.noise_sigma == 0.0
    )


def save_sample(path, tsmi: TSMI, maps: ParametricMaps) -> None:
    """Serialize a paired sample: tsmi, t1, t2, pd, mask records in order."""
    write_arrays(path, [tsmi.data, maps.t1_ms, maps.t2_ms, maps.pd, maps.mask])


def load_sample(path, kind: str = "raw") -> tuple[TSMI, ParametricMaps]:
    """Load a sample written by :func:`save_sample`."""
    arrays = read_arrays(path)
    if len(arrays) != 5:
        raise ValueError(f"{path}: sample file must hold 5 records, found {len(arrays)}")
    tsmi = TSMI(data=arrays[0], kind=kind)
    maps = ParametricMaps(
        t1_ms=arrays[1], t2_ms=arrays[2], pd=arrays[3], mask=arrays[4]
    )
    return tsmi, maps


def save_maps(path, maps: ParametricMaps) -> None:
    """Serialize maps alone: t1, t2, pd, mask records."""
    write_arrays(path, [maps.t1_ms, maps.t2_ms, maps.pd, maps.mask])


def load_maps(path) -> ParametricMaps:
    arrays = read_arrays(Path(path))
    if len(arrays) != 4:
        raise ValueError(f"{path}: maps file must hold 4 records, found {len(arrays)}")
    return ParametricMaps(t1_ms=arrays[0], t2_ms=arrays[1], pd=arrays[2], mask=arrays[3])

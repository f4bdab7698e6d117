"""Synthetic ground-truth phantoms built from ordered ellipse regions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .epg import TissueParams
from .images import ParametricMaps


@dataclass(frozen=True)
class EllipseRegion:
    """Axis lengths in pixels, rotation in degrees, center in (row, col)."""

    center: tuple[float, float]
    axes: tuple[float, float]
    rotation_deg: float
    tissue: TissueParams

    def __post_init__(self):
        if self.axes[0] <= 0.0 or self.axes[1] <= 0.0:
            raise ValueError("ellipse axes must be positive")


@dataclass(frozen=True)
class PhantomSpec:
    """Canvas size plus an ordered region list; later regions overwrite."""

    height: int
    width: int
    regions: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValueError("phantom canvas must have positive area")
        object.__setattr__(self, "regions", tuple(self.regions))


def _inside(region: EllipseRegion, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    cr, cc = region.center
    a, b = region.axes
    phi = np.deg2rad(region.rotation_deg)
    dr = rows - cr
    dc = cols - cc
    u = dc * np.cos(phi) + dr * np.sin(phi)
    v = -dc * np.sin(phi) + dr * np.cos(phi)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def generate_phantom(spec: PhantomSpec) -> ParametricMaps:
    """Rasterize the region list in order onto pixel centers."""
    maps = ParametricMaps.zeros(spec.height, spec.width)
    rows, cols = np.meshgrid(
        np.arange(spec.height, dtype=float),
        np.arange(spec.width, dtype=float),
        indexing="ij",
    )
    for region in spec.regions:
        hit = _inside(region, rows, cols)
        maps.t1_ms[hit] = region.tissue.t1_ms
        maps.t2_ms[hit] = region.tissue.t2_ms
        maps.pd[hit] = region.tissue.pd
        maps.mask |= hit
    maps.validate()
    return maps


def _draw_tissue(rng, t1_range, t2_range, pd_range) -> TissueParams:
    t1 = rng.uniform(*t1_range)
    t2 = rng.uniform(t2_range[0], min(t2_range[1], t1))
    return TissueParams(t1_ms=t1, t2_ms=t2, pd=rng.uniform(*pd_range))


def random_brain_spec(
    height: int,
    width: int,
    seed: int,
    t1_range=(100.0, 4000.0),
    t2_range=(20.0, 600.0),
    pd_range=(0.5, 1.5),
    lesions_min: int = 1,
    lesions_max: int = 4,
) -> PhantomSpec:
    """Brain-like layout: three nested tissue shells plus random lesions.

    Parameter values are drawn uniformly from the given ranges (t2 capped
    at t1); geometry is jittered per seed so every phantom differs.
    """
    if lesions_min < 0 or lesions_max < lesions_min:
        raise ValueError("need 0 <= lesions_min <= lesions_max")
    rng = np.random.default_rng(seed)
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    ry, rx = 0.42 * height, 0.42 * width

    def jitter(scale):
        return rng.uniform(1.0 - scale, 1.0 + scale)

    regions = []
    for shrink in (1.0, 0.78, 0.5):
        regions.append(
            EllipseRegion(
                center=(cy + rng.uniform(-1.5, 1.5), cx + rng.uniform(-1.5, 1.5)),
                axes=(ry * shrink * jitter(0.06), rx * shrink * jitter(0.06)),
                rotation_deg=rng.uniform(-20.0, 20.0),
                tissue=_draw_tissue(rng, t1_range, t2_range, pd_range),
            )
        )
    for _ in range(rng.integers(lesions_min, lesions_max + 1)):
        radius = rng.uniform(0.04, 0.12) * min(height, width)
        r = rng.uniform(0.15, 0.3) * min(height, width)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        regions.append(
            EllipseRegion(
                center=(cy + r * np.sin(angle), cx + r * np.cos(angle)),
                axes=(radius * jitter(0.3), radius * jitter(0.3)),
                rotation_deg=rng.uniform(0.0, 180.0),
                tissue=_draw_tissue(rng, t1_range, t2_range, pd_range),
            )
        )
    return PhantomSpec(height=height, width=width, regions=tuple(regions))

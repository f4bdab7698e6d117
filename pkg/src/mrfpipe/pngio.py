"""Minimal deterministic 8-bit grayscale PNG output.

Images are written directly (signature + IHDR + IDAT + IEND, filter 0 on
every scanline, one fixed zlib level) so identical arrays always produce
identical bytes. Each image gets a sidecar entry recording the window
used, since the 8-bit rendering is lossy.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .images import ParametricMaps

_ZLIB_LEVEL = 6


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def encode_gray_png(pixels: np.ndarray) -> bytes:
    """Encode a (H, W) uint8 array as PNG bytes."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 array")
    h, w = pixels.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    raw = b"".join(b"\x00" + pixels[row].tobytes() for row in range(h))
    idat = zlib.compress(raw, _ZLIB_LEVEL)
    return (
        b"\x89PNG\r\n\x1a\n"
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", idat)
        + _chunk(b"IEND", b"")
    )


def quantize(values: np.ndarray, vmin: float, vmax: float) -> np.ndarray:
    """Window to [vmin, vmax] and map to uint8 with round-half-up."""
    values = np.asarray(values, dtype=float)
    if vmax <= vmin:
        return np.zeros(values.shape, dtype=np.uint8)
    unit = np.clip((values - vmin) / (vmax - vmin), 0.0, 1.0)
    return np.floor(255.0 * unit + 0.5).astype(np.uint8)


def write_gray_png(path, values: np.ndarray, vmin=None, vmax=None) -> tuple[float, float]:
    """Write one grayscale PNG; returns the (vmin, vmax) window used."""
    values = np.asarray(values, dtype=float)
    lo = float(values.min()) if vmin is None else float(vmin)
    hi = float(values.max()) if vmax is None else float(vmax)
    Path(path).write_bytes(encode_gray_png(quantize(values, lo, hi)))
    return lo, hi


def write_map_pngs(maps: ParametricMaps, directory, stem: str = "map") -> list:
    """Render T1/T2/PD to PNGs plus a CSV recording each window.

    Returns (channel, path, vmin, vmax) tuples in write order.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for channel in ("t1_ms", "t2_ms", "pd"):
        path = directory / f"{stem}_{channel}.png"
        lo, hi = write_gray_png(path, getattr(maps, channel))
        rows.append((channel, path, lo, hi))
    csv_path = directory / f"{stem}_windows.csv"
    lines = ["channel,file,vmin,vmax"]
    for channel, path, lo, hi in rows:
        lines.append(f"{channel},{path.name},{lo!r},{hi!r}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows

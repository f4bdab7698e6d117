"""Exhaustive dictionary matching, full-length and subspace-compressed.

The match is a blocked matrix product of query rows against normalized atom
rows: the winner maximizes the absolute normalized inner product, the signed
inner product divided by the winner's stored pre-normalization norm gives
the proton-density scale, and the lookup table gives (T1, T2). Query blocking (configurable) bounds the score buffer; atoms are
additionally tiled internally with a running argmax so arbitrarily large
dictionaries fit in memory. Ties break toward the smallest atom index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .epg import Dictionary
from .images import TSMI, ParametricMaps
from .subspace import SubspaceBasis, project

_ATOM_TILE = 16384


@dataclass(frozen=True)
class MatchResult:
    """Per-voxel match: lookup values, PD scale, correlation score."""

    t1_ms: float
    t2_ms: float
    pd: float
    score: float
    flagged: bool = False


class MatchResults:
    """Array-backed batch of per-voxel match results."""

    def __init__(self, t1_ms, t2_ms, pd, score, flagged, index):
        self.t1_ms = np.asarray(t1_ms, dtype=float)
        self.t2_ms = np.asarray(t2_ms, dtype=float)
        self.pd = np.asarray(pd, dtype=float)
        self.score = np.asarray(score, dtype=float)
        self.flagged = np.asarray(flagged, dtype=bool)
        self.index = np.asarray(index, dtype=np.int64)

    def __len__(self) -> int:
        return self.t1_ms.size

    def __getitem__(self, i: int) -> MatchResult:
        return MatchResult(
            t1_ms=float(self.t1_ms[i]),
            t2_ms=float(self.t2_ms[i]),
            pd=float(self.pd[i]),
            score=float(self.score[i]),
            flagged=bool(self.flagged[i]),
        )


def _match_rows(queries: np.ndarray, atoms: np.ndarray, block_size: int):
    """Running argmax of |queries @ atoms.T| over atom tiles.

    Returns (winner index, signed inner product with the winner).
    """
    m = queries.shape[0]
    best_idx = np.zeros(m, dtype=np.int64)
    best_abs = np.full(m, -1.0)
    best_signed = np.zeros(m)

    for q0 in range(0, m, block_size):
        q1 = min(q0 + block_size, m)
        qb = queries[q0:q1]
        idx_b = np.zeros(q1 - q0, dtype=np.int64)
        abs_b = np.full(q1 - q0, -1.0)
        signed_b = np.zeros(q1 - q0)
        for a0 in range(0, atoms.shape[0], _ATOM_TILE):
            a1 = min(a0 + _ATOM_TILE, atoms.shape[0])
            scores = qb @ atoms[a0:a1].T
            ascores = np.abs(scores)
            local = np.argmax(ascores, axis=1)  # first max: smallest index
            local_abs = ascores[np.arange(q1 - q0), local]
            better = local_abs > abs_b  # strict: earlier tiles win ties
            idx_b[better] = local[better] + a0
            abs_b[better] = local_abs[better]
            signed_b[better] = scores[np.arange(q1 - q0), local][better]
        best_idx[q0:q1] = idx_b
        best_abs[q0:q1] = abs_b
        best_signed[q0:q1] = signed_b

    return best_idx, best_signed


def _assemble(dictionary, idx, signed, qnorm, pd_scale=None) -> MatchResults:
    flagged = qnorm == 0.0
    idx = np.where(flagged, 0, idx)
    signed = np.where(flagged, 0.0, signed)
    pd = signed if pd_scale is None else signed * pd_scale[idx]
    neg = pd < 0.0
    pd = np.where(neg, 0.0, pd)
    score = np.divide(signed, qnorm, out=np.zeros_like(signed), where=~flagged)
    return MatchResults(
        t1_ms=dictionary.lut[idx, 0],
        t2_ms=dictionary.lut[idx, 1],
        pd=pd,
        score=score,
        flagged=flagged | neg,
        index=idx,
    )


def match_full(
    voxels: np.ndarray, dictionary: Dictionary, block_size: int = 512
) -> MatchResults:
    """Match length-d0 voxel rows against a normalized dictionary."""
    if not dictionary.normalized:
        raise ValueError("match_full requires a normalized dictionary")
    voxels = np.atleast_2d(np.asarray(voxels, dtype=float))
    if voxels.shape[1] != dictionary.d0:
        raise ValueError(
            f"voxel length {voxels.shape[1]} != dictionary d0 {dictionary.d0}"
        )
    idx, signed = _match_rows(voxels, dictionary.atoms, block_size)
    qnorm = np.linalg.norm(voxels, axis=1)
    # signed = pd * norm_j for a voxel holding pd-scaled atom j
    return _assemble(dictionary, idx, signed, qnorm, pd_scale=1.0 / dictionary.norms)


def compress_atoms(dictionary: Dictionary, basis: SubspaceBasis) -> np.ndarray:
    """Project normalized atoms into the subspace; rows are not re-normalized."""
    if not dictionary.normalized:
        raise ValueError("compress_atoms requires a normalized dictionary")
    return project(dictionary.atoms, basis)


def match_compressed(
    coeffs: np.ndarray,
    dictionary: Dictionary,
    basis: SubspaceBasis,
    block_size: int = 512,
    compressed_atoms: np.ndarray | None = None,
) -> MatchResults:
    """Match subspace-coefficient rows against the projected dictionary.

    The argmax runs against unit-normalized projected atoms so that a
    noiselessly projected atom always matches itself; the PD scale is
    corrected by each winner's projected norm, which makes the recovered
    scale agree with full-domain matching when the subspace is exact.
    """
    if not dictionary.normalized:
        raise ValueError("match_compressed requires a normalized dictionary")
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if coeffs.shape[1] != basis.d1:
        raise ValueError(f"coefficient length {coeffs.shape[1]} != d1 {basis.d1}")
    if compressed_atoms is None:
        compressed_atoms = compress_atoms(dictionary, basis)
    cnorm = np.linalg.norm(compressed_atoms, axis=1)
    if np.any(cnorm == 0.0):
        raise ValueError("dictionary contains atoms orthogonal to the subspace")
    unit_atoms = compressed_atoms / cnorm[:, None]
    idx, signed = _match_rows(coeffs, unit_atoms, block_size)
    qnorm = np.linalg.norm(coeffs, axis=1)
    # signed = pd * norm_j * ||P a_j|| when the voxel holds pd-scaled atom j
    return _assemble(dictionary, idx, signed, qnorm,
                     pd_scale=1.0 / (dictionary.norms * cnorm))


def match_maps(
    tsmi: TSMI,
    dictionary: Dictionary,
    basis: SubspaceBasis | None = None,
    block_size: int = 512,
) -> ParametricMaps:
    """Per-voxel matching reshaped into (H, W) maps.

    A raw stack is matched in the full domain when ``basis`` is None and
    projected first otherwise; a compressed stack requires ``basis``.
    Flagged voxels (zero signal or clamped PD) are masked out.
    """
    h, w, t = tsmi.shape
    vox = tsmi.voxels()
    if basis is None:
        if t != dictionary.d0:
            raise ValueError(f"raw TSMI has {t} channels, dictionary d0 {dictionary.d0}")
        res = match_full(vox, dictionary, block_size)
    else:
        if t == basis.d0:
            vox = project(vox, basis)
        elif t != basis.d1:
            raise ValueError(f"TSMI has {t} channels, expected {basis.d0} or {basis.d1}")
        res = match_compressed(vox, dictionary, basis, block_size)

    mask = ~res.flagged.reshape(h, w)
    maps = ParametricMaps(
        t1_ms=np.where(mask, res.t1_ms.reshape(h, w), 0.0),
        t2_ms=np.where(mask, res.t2_ms.reshape(h, w), 0.0),
        pd=np.where(mask, res.pd.reshape(h, w), 0.0),
        mask=mask,
    )
    return maps


def append_timing(path, method: str, atoms: int, voxels: int, d: int, seconds: float):
    """Append one row to the matching timing log, writing the header once."""
    path = Path(path)
    new = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(["method", "atoms", "voxels", "d", "seconds"])
        writer.writerow([method, atoms, voxels, d, f"{seconds:.6f}"])

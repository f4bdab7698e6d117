"""Truncated-SVD subspace for fingerprint compression.

"PCA" here means truncated SVD without mean-centering: matching and
compression operate on raw signal subspaces, and proton-density scaling makes
the mean non-physical. The SVD is always taken of the row-normalized atom
matrix so long-T1 atoms do not dominate the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .epg import Dictionary
from .mrfa import read_mrfa, write_mrfa


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis of the top right-singular subspace.

    Attributes
    ----------
    basis : ndarray, shape (d0, d1)
        Orthonormal columns; sign fixed so each column's largest-magnitude
        entry is positive.
    singular_values : ndarray, shape (d1,)
        Descending singular values of the retained components.
    total_energy : float
        Sum of squared singular values of the full spectrum.
    """

    basis: np.ndarray
    singular_values: np.ndarray
    total_energy: float

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        s = np.asarray(self.singular_values, dtype=float)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "singular_values", s)
        if b.ndim != 2 or s.shape != (b.shape[1],):
            raise ValueError("basis must be d0 x d1 with d1 singular values")
        if np.any(np.diff(s) > 0.0) or np.any(s < 0.0):
            raise ValueError("singular values must be non-negative and descending")
        gram = b.T @ b
        if np.max(np.abs(gram - np.eye(b.shape[1]))) > 1e-10:
            raise ValueError("basis columns are not orthonormal")

    @property
    def d0(self) -> int:
        return self.basis.shape[0]

    @property
    def d1(self) -> int:
        return self.basis.shape[1]

    @property
    def captured_energy_fraction(self) -> float:
        return float(np.sum(self.singular_values**2) / self.total_energy)


def fit_subspace(dictionary: Dictionary, d1: int) -> SubspaceBasis:
    """Fit the rank-``d1`` right singular subspace of the atom matrix.

    The atoms are row-normalized first if the dictionary is not already
    normalized. No mean removal is performed.
    """
    atoms = dictionary.atoms
    n, d0 = atoms.shape
    if not 1 <= d1 <= min(n, d0):
        raise ValueError(f"d1 must lie in [1, {min(n, d0)}], got {d1}")
    if not dictionary.normalized:
        atoms = atoms / dictionary.norms[:, None]

    _, s, vt = np.linalg.svd(atoms, full_matrices=False)
    basis = vt[:d1].T.copy()

    # deterministic sign: largest-magnitude entry of each column positive
    for j in range(d1):
        col = basis[:, j]
        if col[np.argmax(np.abs(col))] < 0.0:
            basis[:, j] = -col

    return SubspaceBasis(
        basis=basis,
        singular_values=s[:d1].copy(),
        total_energy=float(np.sum(s**2)),
    )


def project(signals: np.ndarray, basis: SubspaceBasis) -> np.ndarray:
    """Map length-d0 signals (rows) to their d1 subspace coefficients."""
    signals = np.asarray(signals, dtype=float)
    if signals.shape[-1] != basis.d0:
        raise ValueError(
            f"signal length {signals.shape[-1]} does not match basis d0 {basis.d0}"
        )
    return signals @ basis.basis


def reconstruct(coeffs: np.ndarray, basis: SubspaceBasis) -> np.ndarray:
    """Expand d1 coefficients (rows) back to length-d0 signals."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != basis.d1:
        raise ValueError(
            f"coefficient length {coeffs.shape[-1]} does not match basis d1 {basis.d1}"
        )
    return coeffs @ basis.basis.T


def save_basis(basis: SubspaceBasis, path, sidecar_path=None) -> None:
    """Persist the basis array plus a text record of its spectrum."""
    write_mrfa(basis.basis, path)
    if sidecar_path is None:
        sidecar_path = Path(path).with_suffix(".txt")
    lines = ["# singular values (descending)"]
    lines += [repr(float(v)) for v in basis.singular_values]
    lines.append(f"total_energy = {basis.total_energy!r}")
    lines.append(f"captured_energy_fraction = {basis.captured_energy_fraction!r}")
    Path(sidecar_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_basis(path, sidecar_path=None) -> SubspaceBasis:
    """Load a basis saved by :func:`save_basis`."""
    arr = read_mrfa(path)
    if sidecar_path is None:
        sidecar_path = Path(path).with_suffix(".txt")
    values = []
    total = None
    for line in Path(sidecar_path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("total_energy"):
            total = float(line.split("=", 1)[1])
        elif line.startswith("captured_energy_fraction"):
            continue
        else:
            values.append(float(line))
    if total is None or len(values) != arr.shape[1]:
        raise ValueError(f"{sidecar_path}: sidecar does not match basis shape")
    return SubspaceBasis(
        basis=arr, singular_values=np.array(values), total_energy=total
    )

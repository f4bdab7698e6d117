"""FISP fingerprint simulation via the extended phase graph formalism.

The transient response of a gradient-spoiled FISP train is propagated over
configuration states (F+, F-, Z). The RF axis is fixed along +y, which keeps
every state real: the rotation matrix has no imaginary part and the measured
F0 amplitude lies on one axis. Assumptions baked in: instantaneous RF pulses,
an ideal spoiler per TR (one dephasing order), no off-resonance, no B1 error.

Conventions
-----------
* States are stored as three real vectors ``Fp[k]``, ``Fm[k]``, ``Z[k]`` for
  dephasing orders ``k = 0 .. d0``; each TR adds at most one order, so
  ``d0 + 1`` orders are exact for a train of length ``d0``.
* The signal sample for pulse ``i`` is ``Fp[0]`` right after the pulse,
  decayed by ``exp(-te / t2)``.
* The spoiler shifts ``Fp`` up one order and ``Fm`` down one order; the new
  ``Fp[0]`` is refilled from ``Fm[0]`` (conjugation is the identity here).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_SIM_BLOCK = 8192  # tissues simulated per vectorized block


@dataclass(frozen=True)
class SequenceSchedule:
    """Per-excitation flip angles and timing of a FISP train.

    Parameters
    ----------
    flip_angles_deg : ndarray, shape (d0,)
        Flip angle of every excitation, degrees, each in [0, 180].
    tr_ms : ndarray, shape (d0,)
        Repetition time of every excitation, milliseconds.
    te_ms : float
        Echo time, milliseconds; the signal is sampled ``te_ms`` after
        each pulse. Must satisfy ``0 <= te_ms < min(tr_ms)``.
    inversion_delay_ms : float
        Delay between an initial 180 degree inversion and the first pulse.
        Zero disables the inversion.
    """

    flip_angles_deg: np.ndarray
    tr_ms: np.ndarray
    te_ms: float
    inversion_delay_ms: float = 0.0

    def __post_init__(self):
        fa = np.atleast_1d(np.asarray(self.flip_angles_deg, dtype=float))
        tr = np.atleast_1d(np.asarray(self.tr_ms, dtype=float))
        object.__setattr__(self, "flip_angles_deg", fa)
        object.__setattr__(self, "tr_ms", tr)
        if fa.ndim != 1 or tr.ndim != 1 or fa.size != tr.size or fa.size == 0:
            raise ValueError(
                "flip_angles_deg and tr_ms must be 1-D with equal nonzero length"
            )
        if np.any(fa < 0.0) or np.any(fa > 180.0):
            raise ValueError("flip angles must lie in [0, 180] degrees")
        if self.te_ms < 0.0:
            raise ValueError("te_ms must be >= 0")
        if np.any(tr <= self.te_ms):
            raise ValueError("every tr_ms must exceed te_ms")
        if self.inversion_delay_ms < 0.0:
            raise ValueError("inversion_delay_ms must be >= 0")

    @property
    def d0(self) -> int:
        """Number of acquired time points."""
        return self.flip_angles_deg.size


@dataclass(frozen=True)
class TissueParams:
    """Relaxation times (ms) and proton density of one tissue."""

    t1_ms: float
    t2_ms: float
    pd: float = 1.0

    def __post_init__(self):
        if self.t1_ms <= 0.0 or self.t2_ms <= 0.0:
            raise ValueError("t1_ms and t2_ms must be > 0")
        if self.t2_ms > self.t1_ms:
            raise ValueError("t2_ms must not exceed t1_ms")
        if self.pd < 0.0:
            raise ValueError("pd must be >= 0")


@dataclass(frozen=True)
class ParameterGrid:
    """Cross product of T1/T2 values filtered to physical pairs (t2 <= t1)."""

    t1_values_ms: np.ndarray
    t2_values_ms: np.ndarray
    entries: np.ndarray = field(init=False)  # (N, 2) columns t1, t2

    def __post_init__(self):
        t1 = np.atleast_1d(np.asarray(self.t1_values_ms, dtype=float))
        t2 = np.atleast_1d(np.asarray(self.t2_values_ms, dtype=float))
        for name, v in (("t1_values_ms", t1), ("t2_values_ms", t2)):
            if v.size == 0 or np.any(v <= 0.0):
                raise ValueError(f"{name} must be nonempty and positive")
            if np.any(np.diff(v) <= 0.0):
                raise ValueError(f"{name} must be strictly ascending")
        object.__setattr__(self, "t1_values_ms", t1)
        object.__setattr__(self, "t2_values_ms", t2)
        t1g, t2g = np.meshgrid(t1, t2, indexing="ij")
        pairs = np.column_stack([t1g.ravel(), t2g.ravel()])
        pairs = pairs[pairs[:, 1] <= pairs[:, 0]]
        object.__setattr__(self, "entries", pairs)

    def __len__(self) -> int:
        return self.entries.shape[0]


@dataclass
class Dictionary:
    """Simulated fingerprints with their (T1, T2) lookup table.

    ``norms`` always records the Euclidean norm of each atom *before* any
    normalization, so proton-density scale can be recovered from a
    normalized dictionary.
    """

    atoms: np.ndarray  # (N, d0)
    lut: np.ndarray  # (N, 2) columns t1_ms, t2_ms
    norms: np.ndarray  # (N,)
    normalized: bool

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        self.lut = np.asarray(self.lut, dtype=float)
        self.norms = np.asarray(self.norms, dtype=float)
        n = self.atoms.shape[0]
        if self.lut.shape != (n, 2) or self.norms.shape != (n,):
            raise ValueError("atoms, lut and norms must agree on N")
        if np.any(self.norms <= 0.0):
            raise ValueError("norms must be positive")
        if self.normalized:
            row = np.linalg.norm(self.atoms, axis=1)
            if np.any(np.abs(row - 1.0) > 1e-10):
                raise ValueError("normalized dictionary has non-unit rows")

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def d0(self) -> int:
        return self.atoms.shape[1]


def rf_rotation(alpha_deg: float) -> np.ndarray:
    """EPG mixing matrix of an RF pulse about the +y axis.

    Parameters
    ----------
    alpha_deg : float
        Flip angle in degrees, in [0, 180].

    Returns
    -------
    ndarray, shape (3, 3), complex
        Matrix acting on ``(F+, F-, Z)`` per dephasing order. With the +y
        phase convention all entries are real (zero imaginary part); the
        complex dtype keeps the state algebra uniform.
    """
    if not 0.0 <= alpha_deg <= 180.0:
        raise ValueError("alpha_deg must lie in [0, 180]")
    a = np.deg2rad(alpha_deg)
    c2 = np.cos(a / 2.0) ** 2
    s2 = np.sin(a / 2.0) ** 2
    sa = np.sin(a)
    ca = np.cos(a)
    return np.array(
        [
            [c2, -s2, sa],
            [-s2, c2, sa],
            [-sa / 2.0, -sa / 2.0, ca],
        ],
        dtype=complex,
    )


def _simulate_block(schedule: SequenceSchedule, t1_ms, t2_ms) -> np.ndarray:
    """Propagate the EPG recursion for a block of tissues at once.

    Returns the (n, d0) signal block for unit proton density. All state
    arithmetic is real; see the module docstring for the convention.
    """
    t1 = np.asarray(t1_ms, dtype=float)
    t2 = np.asarray(t2_ms, dtype=float)
    n = t1.size
    d0 = schedule.d0
    n_orders = d0 + 1

    fp = np.zeros((n_orders, n))
    fm = np.zeros((n_orders, n))
    z = np.zeros((n_orders, n))
    z[0] = 1.0

    if schedule.inversion_delay_ms > 0.0:
        z[0] = -1.0
        e1i = np.exp(-schedule.inversion_delay_ms / t1)
        z[0] = z[0] * e1i + (1.0 - e1i)

    e1 = np.exp(-schedule.tr_ms[:, None] / t1[None, :])  # (d0, n)
    e2 = np.exp(-schedule.tr_ms[:, None] / t2[None, :])
    e2_te = np.exp(-schedule.te_ms / t2)

    rot = [rf_rotation(a).real for a in schedule.flip_angles_deg]
    signal = np.empty((n, d0))

    for i in range(d0):
        r = rot[i]
        k = min(i + 1, n_orders)  # orders that can be populated before pulse i
        fp_k, fm_k, z_k = fp[:k], fm[:k], z[:k]
        fp_new = r[0, 0] * fp_k + r[0, 1] * fm_k + r[0, 2] * z_k
        fm_new = r[1, 0] * fp_k + r[1, 1] * fm_k + r[1, 2] * z_k
        z_new = r[2, 0] * fp_k + r[2, 1] * fm_k + r[2, 2] * z_k
        fp[:k], fm[:k], z[:k] = fp_new, fm_new, z_new

        signal[:, i] = fp[0] * e2_te

        # relaxation over the full TR, then the end-of-TR spoiler shift
        kk = min(i + 2, n_orders)  # one more order exists after the shift
        fp[:k] *= e2[i]
        fm[:k] *= e2[i]
        z[:k] *= e1[i]
        z[0] += 1.0 - e1[i]

        refill = fm[1].copy() if n_orders > 1 else np.zeros(n)
        fp[1:kk] = fp[: kk - 1]
        fp[0] = refill
        fm[: kk - 1] = fm[1:kk]
        fm[kk - 1] = 0.0

    return signal


def simulate_fingerprints(schedule: SequenceSchedule, t1_ms, t2_ms) -> np.ndarray:
    """Simulate unit-PD fingerprints for arrays of (T1, T2) pairs.

    Parameters
    ----------
    schedule : SequenceSchedule
    t1_ms, t2_ms : array_like, shape (n,)
        Tissue relaxation times, milliseconds.

    Returns
    -------
    ndarray, shape (n, d0)
    """
    t1 = np.atleast_1d(np.asarray(t1_ms, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2_ms, dtype=float))
    if t1.shape != t2.shape:
        raise ValueError("t1_ms and t2_ms must have the same shape")
    out = np.empty((t1.size, schedule.d0))
    for start in range(0, t1.size, _SIM_BLOCK):
        stop = min(start + _SIM_BLOCK, t1.size)
        out[start:stop] = _simulate_block(schedule, t1[start:stop], t2[start:stop])
    return out


def simulate_fingerprint(schedule: SequenceSchedule, tissue: TissueParams) -> np.ndarray:
    """Simulate the length-d0 signal of one tissue, scaled by its PD."""
    sig = _simulate_block(
        schedule, np.array([tissue.t1_ms]), np.array([tissue.t2_ms])
    )[0]
    return tissue.pd * sig


def build_dictionary(
    schedule: SequenceSchedule, grid: ParameterGrid, normalize: bool = True
) -> Dictionary:
    """Simulate one unit-PD atom per grid entry.

    Raises
    ------
    ValueError
        If the grid is empty or any atom is identically zero (its norm
        could not be recorded).
    """
    if len(grid) == 0:
        raise ValueError("parameter grid is empty")
    atoms = simulate_fingerprints(schedule, grid.entries[:, 0], grid.entries[:, 1])
    norms = np.linalg.norm(atoms, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("schedule produced zero-signal atoms; cannot normalize")
    if normalize:
        atoms = atoms / norms[:, None]
    return Dictionary(atoms=atoms, lut=grid.entries.copy(), norms=norms, normalized=normalize)


def save_dictionary(dictionary: Dictionary, path) -> None:
    """Write atoms, lut and norms as three records in one file."""
    from .mrfa import write_arrays

    write_arrays(path, [dictionary.atoms, dictionary.lut, dictionary.norms])


def load_dictionary(path) -> Dictionary:
    """Read a dictionary file; normalization status is inferred from the rows."""
    from .mrfa import read_arrays

    arrays = read_arrays(path)
    if len(arrays) != 3:
        raise ValueError(f"{path}: expected 3 records (atoms, lut, norms), got {len(arrays)}")
    atoms, lut, norms = arrays
    row = np.linalg.norm(atoms, axis=1)
    normalized = bool(np.all(np.abs(row - 1.0) <= 1e-10))
    return Dictionary(atoms=atoms, lut=lut, norms=norms, normalized=normalized)


def default_schedule(
    d0: int = 200,
    flip_peak_deg: float = 70.0,
    tr_ms: float = 12.0,
    te_ms: float = 2.0,
    inversion_delay_ms: float = 18.0,
) -> SequenceSchedule:
    """Inversion-prepared train with a quarter-sine flip-angle ramp to the peak."""
    i = np.arange(1, d0 + 1, dtype=float)
    flips = flip_peak_deg * np.sin(0.5 * np.pi * i / d0)
    return SequenceSchedule(
        flip_angles_deg=flips,
        tr_ms=np.full(d0, float(tr_ms)),
        te_ms=float(te_ms),
        inversion_delay_ms=float(inversion_delay_ms),
    )


def default_grid(
    t1_min: float = 100.0,
    t1_max: float = 4000.0,
    t1_step: float = 20.0,
    t2_min: float = 20.0,
    t2_max: float = 600.0,
    t2_step: float = 4.0,
) -> ParameterGrid:
    """Brain-range T1/T2 grid; roughly 2.7e4 atoms at the default spacing."""
    t1 = np.arange(t1_min, t1_max + 0.5 * t1_step, t1_step)
    t2 = np.arange(t2_min, t2_max + 0.5 * t2_step, t2_step)
    return ParameterGrid(t1_values_ms=t1, t2_values_ms=t2)

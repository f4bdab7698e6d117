"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    worst_coordinate: tuple
    checked: int

    def ok(self, tolerance: float) -> bool:
        return self.max_relative_error < tolerance


def grad_check(
    fn,
    x: np.ndarray,
    analytic_grad: np.ndarray,
    h: float = 1e-5,
    coords=None,
) -> GradCheckReport:
    """Compare ``analytic_grad`` of scalar ``fn`` at ``x`` to central differences.

    ``fn`` maps an array like ``x`` to a float and must be re-evaluable
    (any internal randomness must be frozen). ``coords`` restricts the
    check to a subset of flat indices; by default every coordinate is
    perturbed. Relative error per coordinate is
    ``|num - ana| / max(1e-12, |num| + |ana|)``.
    """
    x = np.asarray(x, dtype=float)
    analytic_grad = np.asarray(analytic_grad, dtype=float)
    if analytic_grad.shape != x.shape:
        raise ValueError("gradient shape must match input shape")
    flat_idx = range(x.size) if coords is None else coords
    worst = 0.0
    worst_coord = ()
    n = 0
    for i in flat_idx:
        idx = np.unravel_index(i, x.shape)
        orig = x[idx]
        x[idx] = orig + h
        fp = fn(x)
        x[idx] = orig - h
        fm = fn(x)
        x[idx] = orig
        numeric = (fp - fm) / (2.0 * h)
        ana = analytic_grad[idx]
        err = abs(numeric - ana) / max(1e-12, abs(numeric) + abs(ana))
        if err > worst:
            worst = err
            worst_coord = idx
        n += 1
    return GradCheckReport(max_relative_error=worst, worst_coordinate=worst_coord, checked=n)

"""Wendland C2 quintic smoothing kernel on the reference configuration.

W(r) = sigma_d * (1 - q/2)^4 * (2q + 1)   for q = r/h in [0, 2]

with sigma_d the dimension-dependent normalization making the kernel
integrate to one over its compact support of radius 2h.  The smoothing
length is tied to the initial particle spacing, h = 1.15 dp, so the
cutoff radius is 2.3 dp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

H_OVER_DP = 1.15
CUTOFF_OVER_DP = 2.3


def _normalization(h: float, dimension: int) -> float:
    if dimension == 2:
        return 7.0 / (4.0 * math.pi * h**2)
    if dimension == 3:
        return 21.0 / (16.0 * math.pi * h**3)
    raise ValueError(f"dimension must be 2 or 3, got {dimension}")


@dataclass(frozen=True)
class KernelModel:
    """Kernel geometry derived from the initial particle spacing."""

    dp: float
    dimension: int
    h: float = field(init=False)
    cutoff: float = field(init=False)
    normalization: float = field(init=False)

    def __post_init__(self) -> None:
        if self.dp <= 0.0:
            raise ValueError(f"dp must be positive, got {self.dp}")
        object.__setattr__(self, "h", H_OVER_DP * self.dp)
        object.__setattr__(self, "cutoff", CUTOFF_OVER_DP * self.dp)
        object.__setattr__(
            self, "normalization", _normalization(self.h, self.dimension)
        )

    def value(self, r):
        """Kernel value W(r, h); zero at and beyond the cutoff radius."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0.0):
            raise ValueError("kernel evaluated at negative distance")
        q = r / self.h
        inside = q < 2.0
        w = np.where(
            inside,
            self.normalization * (1.0 - 0.5 * q) ** 4 * (2.0 * q + 1.0),
            0.0,
        )
        return w if w.ndim else float(w)

    def radial_derivative(self, r):
        """dW/dr; non-positive everywhere, zero at r = 0 and beyond cutoff."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0.0):
            raise ValueError("kernel derivative evaluated at negative distance")
        q = r / self.h
        inside = q < 2.0
        dw = np.where(
            inside,
            -5.0 * self.normalization / self.h * q * (1.0 - 0.5 * q) ** 3,
            0.0,
        )
        return dw if dw.ndim else float(dw)

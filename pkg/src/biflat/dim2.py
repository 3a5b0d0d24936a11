"""Closed-form two-dimensional family.

On the ordered chart u^1 < u^2 the fields are written with x = u^1 - u^2 < 0::

    beta_12 = C1 |x|^(d1-d2) / x      H_1 = D1 |x|^d1
    beta_21 = C2 |x|^(d2-d1) / x      H_2 = D2 |x|^d2

which is the real gauge representative of C1 x^(d1-d2-1), D1 x^d1, ... and
keeps the linear constraints -d1 D1 = C1 D2, d2 D2 = C2 D1 in their
original form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCoupling
from .geometry import LameField, RotationField, check_chart, real_power


@dataclass(frozen=True)
class Dim2Family:
    C1: float
    C2: float
    d1: float
    d2: float
    D1: float
    D2: float

    @property
    def degrees(self) -> np.ndarray:
        return np.array([self.d1, self.d2])

    def constraint_residuals(self):
        """(d1 d2 + C1 C2, d1 D1 + C1 D2, d2 D2 - C2 D1)."""
        return (
            self.d1 * self.d2 + self.C1 * self.C2,
            self.d1 * self.D1 + self.C1 * self.D2,
            self.d2 * self.D2 - self.C2 * self.D1,
        )

    def eigenvalues(self):
        """Roots of lambda^2 - (d1 - d2) lambda + C1 C2."""
        s = self.d1 - self.d2
        disc = s * s - 4 * self.C1 * self.C2
        r = np.sqrt(complex(disc))
        return ((s + r) / 2, (s - r) / 2)


def build_dim2(C1: float, C2: float, d1: float, D1: float = 1.0, d2: float | None = None,
               D2: float | None = None) -> Dim2Family:
    """Family with d2 = -C1 C2 / d1 and D2 = -d1 D1 / C1.

    With d1 = 0 the product C1 C2 must vanish and d2 is free (``d2``
    argument, default 0).  With C1 = 0 and d1 = 0, D2 is free (``D2``
    argument, default D1).
    """
    if d1 != 0:
        d2 = -C1 * C2 / d1
    else:
        if C1 * C2 != 0:
            raise DegenerateCoupling("d1 = 0 requires C1 C2 = 0")
        d2 = 0.0 if d2 is None else d2
    if C1 != 0:
        D2 = -d1 * D1 / C1
    elif d1 != 0:
        raise DegenerateCoupling("C1 = 0 with d1 != 0 leaves no D2")
    else:
        D2 = D1 if D2 is None else D2
    fam = Dim2Family(C1, C2, d1, d2, D1, D2)
    # d2 D2 = C2 D1 follows from the other two only when D1 != 0
    if abs(fam.constraint_residuals()[2]) > 1e-12 * max(1.0, abs(C2 * D1)):
        raise DegenerateCoupling("the constraint d2 D2 = C2 D1 cannot be met")
    return fam


def build_dim2_branch(C1: float, C2: float, d_gap: float, branch: str = "plus", D1: float = 1.0):
    """Pick d1 as an eigenvalue of [[0, -C1], [C2, d_gap]] with d_gap = d1 - d2.

    Eigenvalue d1 of that matrix is exactly d1 (d_gap - d1) = C1 C2, i.e.
    d1 d2 = -C1 C2 with d2 = d1 - d_gap.
    """
    disc = d_gap * d_gap - 4 * C1 * C2
    if disc < 0:
        raise DegenerateCoupling("complex degrees are not supported")
    sign = 1.0 if branch == "plus" else -1.0
    d1 = (d_gap + sign * math.sqrt(disc)) / 2
    if d1 == 0:
        return build_dim2(C1, C2, 0.0, D1, d2=-d_gap)
    return build_dim2(C1, C2, d1, D1)


def violated_dim2(C1: float, C2: float, d1: float, d2: float, D1: float = 1.0) -> Dim2Family:
    """A family that ignores the constraint (for negative tests)."""
    D2 = -d1 * D1 / C1 if C1 else D1
    return Dim2Family(C1, C2, d1, d2, D1, D2)


def dim2_fields(fam: Dim2Family):
    d = fam.degrees

    def beta(u):
        u = check_chart(u)
        x = u[0] - u[1]
        return np.array([
            [0.0, fam.C1 * real_power(x, fam.d1 - fam.d2) / x],
            [fam.C2 * real_power(x, fam.d2 - fam.d1) / x, 0.0],
        ])

    def H(u):
        u = check_chart(u)
        x = u[0] - u[1]
        return np.array([fam.D1 * real_power(x, fam.d1), fam.D2 * real_power(x, fam.d2)])

    return RotationField(2, beta, d), LameField(2, H, d)

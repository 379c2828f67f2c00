"""Butcher tableaus for the explicit Runge-Kutta steppers.

Coefficients are the standard published ones.  The embedded pairs carry the
5th-order propagating weights in ``b`` and the 4th-order weights in
``b_hat``; the classic RK4 tableau has no embedded weights and therefore no
error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ButcherTableau", "RK4", "CASH_KARP", "DORMAND_PRINCE", "TABLEAUS"]


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    order: int
    c: np.ndarray
    a: tuple
    b: np.ndarray
    b_hat: np.ndarray | None = None
    # b - b_hat, precomputed for the error estimate
    d: np.ndarray = field(init=False, default=None)

    def __post_init__(self):
        s = self.stages
        if len(self.a) != s or len(self.c) != s or len(self.b) != s:
            raise ValueError(f"{self.name}: inconsistent stage count")
        if abs(math.fsum(self.b) - 1.0) > 1e-14:
            raise ValueError(f"{self.name}: propagating weights do not sum to 1")
        for i in range(s):
            if len(self.a[i]) != i:
                raise ValueError(f"{self.name}: coupling row {i} must have {i} entries")
            if abs(math.fsum(self.a[i]) - self.c[i]) > 1e-14:
                raise ValueError(f"{self.name}: c[{i}] != sum of coupling row")
        if self.b_hat is not None:
            if len(self.b_hat) != s:
                raise ValueError(f"{self.name}: embedded weights have wrong length")
            if abs(math.fsum(self.b_hat) - 1.0) > 1e-14:
                raise ValueError(f"{self.name}: embedded weights do not sum to 1")
            object.__setattr__(self, "d", self.b - self.b_hat)

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def adaptive(self) -> bool:
        return self.b_hat is not None


def _arr(*vals):
    return np.array(vals, dtype=np.float64)


RK4 = ButcherTableau(
    name="rk4",
    order=4,
    c=_arr(0.0, 0.5, 0.5, 1.0),
    a=(
        _arr(),
        _arr(0.5),
        _arr(0.0, 0.5),
        _arr(0.0, 0.0, 1.0),
    ),
    b=_arr(1 / 6, 1 / 3, 1 / 3, 1 / 6),
)

CASH_KARP = ButcherTableau(
    name="ck",
    order=5,
    c=_arr(0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8),
    a=(
        _arr(),
        _arr(1 / 5),
        _arr(3 / 40, 9 / 40),
        _arr(3 / 10, -9 / 10, 6 / 5),
        _arr(-11 / 54, 5 / 2, -70 / 27, 35 / 27),
        _arr(1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
    ),
    b=_arr(37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771),
    b_hat=_arr(2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4),
)

DORMAND_PRINCE = ButcherTableau(
    name="dp",
    order=5,
    c=_arr(0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0),
    a=(
        _arr(),
        _arr(1 / 5),
        _arr(3 / 40, 9 / 40),
        _arr(44 / 45, -56 / 15, 32 / 9),
        _arr(19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
        _arr(9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
        _arr(35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
    ),
    b=_arr(35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0),
    # The last stage is evaluated every attempt; no first-same-as-last reuse,
    # so the work count is always 7 evaluations per attempted step.
    b_hat=_arr(5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40),
)

TABLEAUS = {t.name: t for t in (RK4, CASH_KARP, DORMAND_PRINCE)}

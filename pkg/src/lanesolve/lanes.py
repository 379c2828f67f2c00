"""Lane-packed ensemble layout.

A *lane pack* is a contiguous ``float64`` array of shape ``(W,)`` holding one
value per SIMD-style lane; ``W`` is the batch width (a power of two, at most
8).  Everything downstream (steppers, step-size control, event handling)
operates on packs so that ``W`` instances of an ODE system advance through
one instruction stream.  Elementwise numpy arithmetic on packs is exactly
scalar IEEE-754 arithmetic applied per lane, which is what the equivalence
tests pin down.

A :class:`LaneState` bundles the per-lane integration state of one pack
(time, step size, state vector, parameters, activity mask, work counters)
and a :class:`BatchGroup` bundles ``m`` packs that are advanced together
with their Runge-Kutta stages interleaved (the unroll factor).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SUPPORTED_WIDTHS",
    "STATUS_OK",
    "STATUS_NONFINITE",
    "STATUS_DT_UNDERFLOW",
    "STATUS_STEP_BUDGET",
    "STATUS_COLLAPSE",
    "STATUS_NEGATIVE_PRESSURE",
    "STATUS_CHATTER",
    "STATUS_NAMES",
    "LaneState",
    "BatchGroup",
    "select",
    "fma",
    "sincos",
    "linspace",
    "logspace",
    "pack_parameters",
]

SUPPORTED_WIDTHS = (1, 2, 4, 8)

# Per-lane status flags.  OK lanes are the only ones contributing observables.
STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_DT_UNDERFLOW = 2
STATUS_STEP_BUDGET = 3
STATUS_COLLAPSE = 4
STATUS_NEGATIVE_PRESSURE = 5
STATUS_CHATTER = 6

STATUS_NAMES = {
    STATUS_OK: "ok",
    STATUS_NONFINITE: "non-finite state",
    STATUS_DT_UNDERFLOW: "step-size underflow",
    STATUS_STEP_BUDGET: "step budget exhausted",
    STATUS_COLLAPSE: "collapse singularity",
    STATUS_NEGATIVE_PRESSURE: "negative chamber pressure",
    STATUS_CHATTER: "possible chatter",
}


def _check_width(width: int) -> int:
    if width not in SUPPORTED_WIDTHS:
        raise ValueError(f"unsupported lane width {width}; choose one of {SUPPORTED_WIDTHS}")
    return int(width)


def select(mask: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-lane predication: lane i of the result is ``a_i`` where
    ``mask_i`` is true and ``b_i`` otherwise."""
    return np.where(mask, a, b)


def fma(a, b, c):
    """Fused multiply-add surrogate ``a*b + c``.

    numpy has no packed FMA primitive, so the two roundings of the plain
    expression are the contract here; per lane this is bit-identical to the
    same scalar expression.
    """
    return a * b + c


def sincos(x):
    """Sine and cosine of one phase argument as a single paired call site."""
    return np.sin(x), np.cos(x)


def linspace(a: float, b: float, n: int) -> np.ndarray:
    """``n`` uniformly spaced values from ``a`` to ``b`` inclusive.

    Requires ``n >= 2`` and ``b > a``; spacing is ``(b - a) / (n - 1)`` and
    both endpoints are exact.
    """
    if n < 2:
        raise ValueError(f"linspace needs n >= 2, got {n}")
    if not b > a:
        raise ValueError(f"linspace needs b > a, got a={a}, b={b}")
    return np.linspace(float(a), float(b), int(n))


def logspace(a: float, b: float, n: int) -> np.ndarray:
    """``n`` geometrically spaced values from ``a`` to ``b`` inclusive.

    Requires ``0 < a < b`` and ``n >= 2``; the ratio between neighbours is
    ``(b/a)**(1/(n-1))``.
    """
    if a <= 0:
        raise ValueError(f"logspace needs a > 0, got a={a}")
    if not b > a:
        raise ValueError(f"logspace needs b > a, got a={a}, b={b}")
    if n < 2:
        raise ValueError(f"logspace needs n >= 2, got {n}")
    return np.geomspace(float(a), float(b), int(n))


def pack_parameters(values, width: int = 4):
    """Pack a flat list of per-instance values into ``(K, W)`` lane packs.

    Lane ``i`` of pack ``k`` holds ``values[k*W + i]``.  When the input
    length is not a multiple of ``W`` the tail pack is padded by duplicating
    the last value; padded lanes are reported inactive in the returned mask
    and must never contribute to results or counters.

    Returns
    -------
    packs : (K, W) float64 array
    active : (K, W) bool array
    """
    width = _check_width(width)
    vals = np.asarray(values, dtype=np.float64).ravel()
    n = vals.size
    if n == 0:
        raise ValueError("empty ensemble")
    n_packs = -(-n // width)
    packs = np.full((n_packs, width), vals[-1], dtype=np.float64)
    packs.ravel()[:n] = vals
    active = np.zeros((n_packs, width), dtype=bool)
    active.ravel()[:n] = True
    return packs, active


@dataclass
class LaneState:
    """Integration state of one lane pack (``W`` instances).

    ``y`` has shape ``(D, W)`` and ``params`` shape ``(P, W)``; everything
    else is per-lane ``(W,)``.  ``dt`` must stay positive on active lanes and
    the counters are monotone non-decreasing.
    """

    t: np.ndarray
    dt: np.ndarray
    y: np.ndarray
    params: np.ndarray
    active: np.ndarray
    present: np.ndarray = field(default=None)
    status: np.ndarray = field(default=None)
    n_rhs_evals: np.ndarray = field(default=None)
    n_accepted: np.ndarray = field(default=None)
    n_rejected: np.ndarray = field(default=None)
    n_events: np.ndarray = field(default=None)

    def __post_init__(self):
        w = self.width
        if self.y.ndim != 2 or self.y.shape[1] != w:
            raise ValueError(f"state block must have shape (D, {w})")
        if self.params.ndim != 2 or self.params.shape[1] != w:
            raise ValueError(f"parameter block must have shape (P, {w})")
        if self.present is None:
            # real instances vs padding; padding never becomes active again
            self.present = self.active.copy()
        if self.status is None:
            self.status = np.zeros(w, dtype=np.int8)
        for name in ("n_rhs_evals", "n_accepted", "n_rejected", "n_events"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(w, dtype=np.int64))

    @property
    def width(self) -> int:
        return self.t.shape[0]

    @property
    def dim(self) -> int:
        return self.y.shape[0]

    @classmethod
    def from_initial(cls, t0: float, dt0: float, y0, params, active=None) -> "LaneState":
        """Build a lane state from one shared initial condition.

        ``params`` is a ``(P, W)`` block; ``y0`` is broadcast across lanes.
        """
        params = np.ascontiguousarray(np.atleast_2d(np.asarray(params, dtype=np.float64)))
        w = params.shape[1]
        _check_width(w)
        y0 = np.asarray(y0, dtype=np.float64).reshape(-1, 1)
        y = np.ascontiguousarray(np.broadcast_to(y0, (y0.shape[0], w)).copy())
        if active is None:
            active = np.ones(w, dtype=bool)
        return cls(
            t=np.full(w, float(t0)),
            dt=np.full(w, float(dt0)),
            y=y,
            params=params,
            active=np.asarray(active, dtype=bool).copy(),
        )

    def flag(self, mask: np.ndarray, code: int) -> None:
        """Flag lanes in ``mask`` with ``code`` and deactivate them.

        An already-set flag is never overwritten, so the first failure cause
        per lane is the one reported.
        """
        fresh = mask & (self.status == STATUS_OK)
        self.status[fresh] = code
        self.active &= ~mask

    def rearm(self) -> None:
        """Reactivate healthy lanes for the next integration phase."""
        self.active = self.present & (self.status == STATUS_OK)


@dataclass
class BatchGroup:
    """``m`` lane states advanced together, stages interleaved.

    All member states must belong to the same model and integrator
    configuration; ``m`` is the unroll factor and may be at most 16.
    """

    states: list

    def __post_init__(self):
        if not 1 <= len(self.states) <= 16:
            raise ValueError(f"unroll factor must be in [1, 16], got {len(self.states)}")
        dims = {s.dim for s in self.states}
        if len(dims) != 1:
            raise ValueError("all lane states in a group must share the model dimension")

    @property
    def m(self) -> int:
        return len(self.states)

    def any_active(self) -> bool:
        return any(np.any(s.active) for s in self.states)

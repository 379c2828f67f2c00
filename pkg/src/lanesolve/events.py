"""Zero-crossing detection, bisection refinement and the impact map.

Events are directed sign changes of a scalar function of the state between
two committed step endpoints.  Detection is per lane and purely sign-based;
the event time is then refined by re-integrating trial fractions of the
detected step from its start with the same stepper, halving the bracket
until it is narrower than the event tolerance.

A lane whose event function is exactly zero at the step start is refractory:
it cannot re-trigger until the function first leaves zero.  This is what
makes the impact map (which parks the displacement at exactly zero) safe
against infinite re-triggering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "DIRECTION_POS_TO_NEG",
    "DIRECTION_NEG_TO_POS",
    "DIRECTION_ANY",
    "ACTION_TERMINATE",
    "ACTION_APPLY_MAP",
    "ACTION_RECORD",
    "EventSpec",
    "ImpactLaw",
    "Observer",
    "detect_crossing",
    "refine_bisection",
    "apply_impact",
]

DIRECTION_POS_TO_NEG = -1
DIRECTION_NEG_TO_POS = +1
DIRECTION_ANY = 0

ACTION_TERMINATE = "terminate"
ACTION_APPLY_MAP = "apply_map"
ACTION_RECORD = "record"


@dataclass(frozen=True)
class EventSpec:
    """A directed zero crossing and what to do when it fires.

    ``g(t, y, params)`` maps pack blocks (``t`` is ``(W,)``, ``y`` is
    ``(D, W)``) to per-lane scalars ``(W,)``.  ``tolerance`` bounds the width
    of the refined time bracket.  ``state_map(y) -> y`` is required for the
    ``apply_map`` action.  When several events fire inside one step the
    earliest refined time wins; ties within the bracket tolerance go to the
    event with the lower ``priority``.
    """

    name: str
    g: Callable
    direction: int = DIRECTION_ANY
    tolerance: float = 1e-6
    action: str = ACTION_RECORD
    state_map: Callable = None
    priority: int = 0

    def __post_init__(self):
        if self.tolerance <= 0.0:
            raise ValueError("event tolerance must be positive")
        if self.action == ACTION_APPLY_MAP and self.state_map is None:
            raise ValueError("apply_map events need a state_map")


@dataclass(frozen=True)
class ImpactLaw:
    """Newtonian restitution: contact velocity reversed and scaled by ``r``."""

    restitution: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.restitution <= 1.0:
            raise ValueError("restitution must be in (0, 1]")


def detect_crossing(g_old, g_new, direction: int) -> np.ndarray:
    """Per-lane mask of directed sign changes between two step endpoints.

    A lane starting exactly at zero never triggers (refractory rule); a lane
    landing exactly on zero does.
    """
    g_old = np.asarray(g_old)
    g_new = np.asarray(g_new)
    down = (g_old > 0.0) & (g_new <= 0.0)
    up = (g_old < 0.0) & (g_new >= 0.0)
    if direction == DIRECTION_POS_TO_NEG:
        return down
    if direction == DIRECTION_NEG_TO_POS:
        return up
    return down | up


def refine_bisection(step_fn, t_lo: float, y_lo: np.ndarray, dt: float,
                     g_fn, tol_abs: float, y_hi: np.ndarray = None,
                     max_iter: int = 200):
    """Locate a directed zero crossing inside one committed step.

    ``step_fn(t0, y0, h)`` integrates a single trial step and ``g_fn(t, y)``
    evaluates the event function on a single lane.  The search halves the
    interval, always re-integrating from ``(t_lo, y_lo)`` with the trial step
    size, and keeps the invariant that ``g`` has crossed at the upper bracket
    end.  It runs until the time bracket is narrower than ``tol_abs`` and the
    event function magnitude at the returned end is itself below ``tol_abs``,
    so the returned state sits on the crossing to within the tolerance in
    both time and event value.

    Returns ``(t_star, y_star, width, n_trials)`` where ``t_star`` is the
    upper (crossed) bracket end and ``n_trials`` counts the trial
    integrations spent.
    """
    g_lo = g_fn(t_lo, y_lo)
    if y_hi is None:
        y_hi = step_fn(t_lo, y_lo, dt)
    g_hi = g_fn(t_lo + dt, y_hi)
    crossed = (g_hi == 0.0) or (np.sign(g_hi) != np.sign(g_lo))
    if g_lo == 0.0 or not crossed:
        raise ValueError("invalid bracket: event function does not change sign")

    lo, hi = 0.0, dt
    n_trials = 0
    for _ in range(max_iter):
        if hi - lo <= tol_abs and abs(g_hi) <= tol_abs:
            break
        if hi - lo <= np.finfo(float).eps * max(abs(t_lo), 1.0):
            break
        mid = 0.5 * (lo + hi)
        y_mid = step_fn(t_lo, y_lo, mid)
        n_trials += 1
        g_mid = g_fn(t_lo + mid, y_mid)
        if (g_mid == 0.0) or (np.sign(g_mid) != np.sign(g_lo)):
            hi = mid
            y_hi = y_mid
            g_hi = g_mid
        else:
            lo = mid
    return t_lo + hi, y_hi, hi - lo, n_trials


def apply_impact(y: np.ndarray, law: ImpactLaw) -> np.ndarray:
    """Seat impact map: displacement parked at zero, velocity reversed.

    Requires an approaching contact (``y[1] < 0``); the chamber pressure
    component is untouched.
    """
    if y[1] >= 0.0:
        raise ValueError("impact law on separating contact")
    out = y.copy()
    out[0] = 0.0
    out[1] = -law.restitution * y[1]
    return out


class Observer:
    """Per-step hook: called once per committed step and once per lane at
    phase end.  Observers read solver state; they must not modify it.

    ``state_index`` identifies the lane pack within its batch group, so one
    observer instance can keep per-pack accumulators.
    """

    def on_commit(self, state_index, t, y, dt, mask, truncated):
        """``mask`` marks lanes committed this iteration; ``dt`` is the
        per-lane committed step size and ``truncated`` flags steps shortened
        to hit a phase end or an event time."""

    def on_phase_end(self, state_index, t, y, mask):
        """``mask`` marks lanes whose phase just finished."""

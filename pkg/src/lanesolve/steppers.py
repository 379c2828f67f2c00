"""Explicit Runge-Kutta stage computations on lane packs.

A step *attempt* evaluates every tableau stage for every pack of a
:class:`~lanesolve.lanes.BatchGroup` with the stages interleaved: stage ``k``
of all ``m`` packs is computed before stage ``k+1`` of any pack.  Packs never
mix data, so results are independent of the unroll factor; the interleaving
only widens the window of independent work in flight.

Every attempt costs exactly ``tableau.stages`` right-hand-side evaluations
per lane -- there is no first-same-as-last shortcut -- which keeps the work
counter directly comparable across steppers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lanes import BatchGroup
from .tableaus import CASH_KARP, DORMAND_PRINCE, RK4, ButcherTableau

__all__ = ["StepResult", "attempt_step", "rk4_step", "cash_karp_step", "dormand_prince_step"]


@dataclass
class StepResult:
    """Proposed update of one lane pack.

    ``err`` is the per-component magnitude of the embedded error estimate
    (zero for the fixed-step tableau); ``rhs_evals`` the stage count spent on
    the attempt, identical for accepted and rejected steps.
    """

    y_new: np.ndarray
    err: np.ndarray
    rhs_evals: int


def attempt_step(group: BatchGroup, system, dt_trial, tableau: ButcherTableau):
    """Attempt one step on every pack of ``group`` with per-lane step sizes.

    ``dt_trial`` is a sequence of ``(W,)`` arrays, one per pack.  State is
    not modified; accept/reject logic lives in the driver.  Returns one
    :class:`StepResult` per pack.
    """
    s = tableau.stages
    m = group.m
    ks = [[None] * s for _ in range(m)]
    stage_y = [None] * m

    with np.errstate(all="ignore"):
        for i in range(s):
            for j, st in enumerate(group.states):
                dt = dt_trial[j]
                if i == 0:
                    ys = st.y
                else:
                    ys = st.y.copy()
                    row = tableau.a[i]
                    for q in range(i):
                        if row[q] != 0.0:
                            ys += (dt * row[q]) * ks[j][q]
                stage_y[j] = ys
            for j, st in enumerate(group.states):
                dt = dt_trial[j]
                ts = st.t + tableau.c[i] * dt
                k = np.empty_like(st.y)
                system.rhs(np.ascontiguousarray(ts), np.ascontiguousarray(stage_y[j]), st.params, k)
                ks[j][i] = k

        results = []
        for j, st in enumerate(group.states):
            dt = dt_trial[j]
            acc = np.zeros_like(st.y)
            for i in range(s):
                if tableau.b[i] != 0.0:
                    acc += tableau.b[i] * ks[j][i]
            y_new = st.y + dt * acc
            if tableau.adaptive:
                eacc = np.zeros_like(st.y)
                for i in range(s):
                    if tableau.d[i] != 0.0:
                        eacc += tableau.d[i] * ks[j][i]
                err = np.abs(dt * eacc)
            else:
                err = np.zeros_like(st.y)
            results.append(StepResult(y_new=y_new, err=err, rhs_evals=s))
    return results


def single_step(system, tableau: ButcherTableau, t0: float, y0: np.ndarray, params: np.ndarray, dt: float) -> np.ndarray:
    """One width-1 step from ``(t0, y0)``; returns the new state ``(D,)``.

    Lean path for divergent per-lane work (event-time refinement), where one
    lane re-steps repeatedly from the same committed state.
    """
    d = y0.shape[0]
    y = np.ascontiguousarray(y0.reshape(d, 1))
    p = np.ascontiguousarray(params.reshape(-1, 1))
    s = tableau.stages
    ks = np.empty((s, d, 1))
    tt = np.empty(1)
    with np.errstate(all="ignore"):
        for i in range(s):
            if i == 0:
                ys = y
            else:
                ys = y.copy()
                row = tableau.a[i]
                for q in range(i):
                    if row[q] != 0.0:
                        ys += (dt * row[q]) * ks[q]
            tt[0] = t0 + tableau.c[i] * dt
            system.rhs(tt, np.ascontiguousarray(ys), p, ks[i])
        acc = np.zeros((d, 1))
        for i in range(s):
            if tableau.b[i] != 0.0:
                acc += tableau.b[i] * ks[i]
    return (y + dt * acc)[:, 0]


def rk4_step(group: BatchGroup, system, dt_trial):
    """Classic fixed-step fourth-order attempt (no error estimate)."""
    return attempt_step(group, system, dt_trial, RK4)


def cash_karp_step(group: BatchGroup, system, dt_trial):
    """Six-stage 5(4) attempt with embedded error estimate."""
    return attempt_step(group, system, dt_trial, CASH_KARP)


def dormand_prince_step(group: BatchGroup, system, dt_trial):
    """Seven-stage 5(4) attempt with embedded error estimate."""
    return attempt_step(group, system, dt_trial, DORMAND_PRINCE)

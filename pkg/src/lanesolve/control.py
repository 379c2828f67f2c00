"""Per-lane asynchronous step-size control and the phase drivers.

Every lane keeps its own time and step size.  One driver iteration attempts
a step on all still-active lanes of a batch group (each lane with its own
trial step), then accepts or rejects per lane against the mixed
absolute/relative error norm.  Lanes never wait for each other: a lane's
committed ``(t, y, dt)`` sequence depends only on its own initial data, which
is what the packing-equivalence tests pin down.

A *phase* is one unit of the multi-phase protocols: either a fixed time span
(the driver truncates the last step to land on the end exactly) or an
event-terminated segment (the driver integrates until a terminal event
fires).  Observers are invoked once per committed step and once per lane at
phase end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import (
    ACTION_APPLY_MAP,
    ACTION_RECORD,
    ACTION_TERMINATE,
    detect_crossing,
    refine_bisection,
)
from .lanes import (
    STATUS_CHATTER,
    STATUS_DT_UNDERFLOW,
    STATUS_NONFINITE,
    STATUS_STEP_BUDGET,
    BatchGroup,
)
from .steppers import attempt_step, single_step
from .tableaus import RK4, ButcherTableau

__all__ = ["Tolerances", "StepControl", "error_norm", "adapt_dt", "advance_fixed", "advance_adaptive"]


@dataclass(frozen=True)
class Tolerances:
    """Mixed absolute/relative local error tolerances (not both zero)."""

    atol: float = 1e-10
    rtol: float = 1e-10

    def __post_init__(self):
        if self.atol < 0.0 or self.rtol < 0.0:
            raise ValueError("tolerances must be non-negative")
        if self.atol == 0.0 and self.rtol == 0.0:
            raise ValueError("at least one of atol/rtol must be positive")


@dataclass(frozen=True)
class StepControl:
    """Elementary integral controller configuration.

    ``chatter_limit`` guards event-heavy lanes: a lane collecting that many
    impacts inside a single phase is flagged and parked instead of grinding
    through a possible chattering sequence.
    """

    safety: float = 0.9
    shrink_min: float = 0.1
    grow_max: float = 5.0
    dt_min: float = 1e-12
    dt_max: float = math.inf
    max_steps: int = 10_000_000
    chatter_limit: int = 100_000

    def __post_init__(self):
        if not 0.0 < self.shrink_min < 1.0 < self.grow_max:
            raise ValueError("need 0 < shrink_min < 1 < grow_max")
        if not self.dt_min < self.dt_max:
            raise ValueError("need dt_min < dt_max")
        if self.safety <= 0.0:
            raise ValueError("safety factor must be positive")


def error_norm(err, y_old, y_new, tol: Tolerances) -> np.ndarray:
    """Max-over-components scaled error per lane; <= 1 means acceptable.

    Each component is scaled by ``atol + rtol*max(|y_old|, |y_new|)``; a
    non-finite error estimate maps to +inf and forces rejection.
    """
    err = np.atleast_2d(np.asarray(err, dtype=np.float64))
    y_old = np.atleast_2d(np.asarray(y_old, dtype=np.float64))
    y_new = np.atleast_2d(np.asarray(y_new, dtype=np.float64))
    with np.errstate(all="ignore"):
        scale = tol.atol + tol.rtol * np.maximum(np.abs(y_old), np.abs(y_new))
        norm = np.max(np.abs(err) / scale, axis=0)
    return np.where(np.isfinite(norm), norm, np.inf)


def adapt_dt(dt, norm, control: StepControl, order: int = 5) -> np.ndarray:
    """Next trial step from the elementary controller.

    ``dt * clamp(safety * norm**(-1/order), shrink_min, grow_max)``, then
    clamped into ``[dt_min, dt_max]``.  A zero norm takes the growth clamp.
    """
    dt = np.asarray(dt, dtype=np.float64)
    norm = np.asarray(norm, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore"):
        factor = control.safety * norm ** (-1.0 / order)
    factor = np.where(norm == 0.0, control.grow_max, factor)
    factor = np.clip(factor, control.shrink_min, control.grow_max)
    return np.clip(dt * factor, control.dt_min, control.dt_max)


def advance_fixed(group: BatchGroup, system, dt: float, n_steps: int,
                  tableau: ButcherTableau = RK4) -> None:
    """Exactly ``n_steps`` fixed-size commits per lane, no error control.

    Lanes that leave the finite range are flagged and stop counting, but the
    pack keeps stepping (the work of a fixed-step run is unconditional), so
    their final non-finite state is recorded honestly.
    """
    if dt <= 0.0:
        raise ValueError("fixed step size must be positive")
    if n_steps < 0:
        raise ValueError("step count must be non-negative")
    dt_packs = [np.full(st.width, float(dt)) for st in group.states]
    for _ in range(n_steps):
        results = attempt_step(group, system, dt_packs, tableau)
        for st, res in zip(group.states, results):
            act = st.active
            st.n_rhs_evals[act] += res.rhs_evals
            st.n_accepted[act] += 1
            st.y[...] = res.y_new
            st.t += dt
            bad = act & ~np.all(np.isfinite(res.y_new), axis=0)
            if np.any(bad):
                st.flag(bad, STATUS_NONFINITE)


def _lane_column(arr, lane):
    return np.ascontiguousarray(arr[:, lane])


def _refine_lane(system, tableau, st, lane, dt_lane, y_new, event):
    """Refine one firing event on one lane; returns (t*, y*, width, trials)."""
    params_col = _lane_column(st.params, lane)

    def step_fn(t0, y0, h):
        return single_step(system, tableau, t0, y0, params_col, h)

    def g_fn(t, y):
        return float(event.g(np.array([t]), y.reshape(-1, 1), params_col.reshape(-1, 1))[0])

    return refine_bisection(
        step_fn,
        float(st.t[lane]),
        _lane_column(st.y, lane),
        float(dt_lane),
        g_fn,
        event.tolerance,
        y_hi=_lane_column(y_new, lane),
    )


def advance_adaptive(group: BatchGroup, system, tableau: ButcherTableau,
                     tol: Tolerances, control: StepControl,
                     t_end=None, events=(), observer=None, dt0=None):
    """Advance all lanes of ``group`` through one integration phase.

    Per iteration: attempt a step on every active lane with its own trial
    step (truncated to land exactly on ``t_end`` where one is given), commit
    lanes whose error norm is acceptable, reject and shrink the others.
    Directed zero crossings of ``events`` are refined by bisection on the
    committed interval; the earliest event wins, ties resolve by event
    priority, and terminate-events end the lane's phase.  Lanes stop when
    they reach ``t_end`` or a terminal event; sick lanes are flagged
    (step-size underflow, step budget, chatter guard) and parked without
    disturbing their pack mates.

    Returns a list of ``(event_name, lane_global_index_free, t_star)``
    records from record-only events (empty in the bundled experiments).
    """
    if tableau.adaptive is False and tableau is not RK4:
        raise ValueError("adaptive driver needs an embedded tableau")
    inf = np.inf
    records = []

    per_state = []
    for st in group.states:
        if t_end is None:
            te = np.full(st.width, inf)
        else:
            te = np.broadcast_to(np.asarray(t_end, dtype=np.float64), (st.width,)).copy()
        if dt0 is not None:
            st.dt = np.where(st.active, np.clip(dt0, control.dt_min, control.dt_max), st.dt)
        st.dt = np.clip(st.dt, control.dt_min, control.dt_max)
        per_state.append({
            "t_end": te,
            "attempts": np.zeros(st.width, dtype=np.int64),
            "impacts": np.zeros(st.width, dtype=np.int64),
            "pending": np.zeros(st.width, dtype=np.int8),
        })

    terminal_events = [e for e in events if e.action == ACTION_TERMINATE]
    map_events = [e for e in events if e.action == ACTION_APPLY_MAP]
    record_events = [e for e in events if e.action == ACTION_RECORD]
    acting_events = map_events + terminal_events

    while True:
        live = [(i, st, ps) for i, (st, ps) in enumerate(zip(group.states, per_state))
                if np.any(st.active)]
        if not live:
            break
        live_group = BatchGroup([st for _, st, _ in live])
        dt_trials = []
        hit_masks = []
        for _, st, ps in live:
            act = st.active
            dt_try = st.dt.copy()
            hit = act & (st.t + dt_try >= ps["t_end"])
            dt_try[hit] = ps["t_end"][hit] - st.t[hit]
            dt_trials.append(dt_try)
            hit_masks.append(hit)

        results = attempt_step(live_group, system, dt_trials, tableau)

        for (idx, st, ps), dt_try, hit, res in zip(live, dt_trials, hit_masks, results):
            act = st.active
            st.n_rhs_evals[act] += res.rhs_evals
            ps["attempts"][act] += 1

            norm = error_norm(res.err, st.y, res.y_new, tol)
            finite_prop = np.all(np.isfinite(res.y_new), axis=0)
            norm = np.where(finite_prop, norm, np.inf)
            if system.guard is not None:
                bad, code = system.guard(res.y_new)
                bad = bad & act
                if np.any(bad):
                    norm = np.where(bad, np.inf, norm)
                    ps["pending"][bad] = code

            accept = act & (norm <= 1.0)
            reject = act & ~accept
            ps["pending"][accept] = 0

            committed_dt = np.where(accept, dt_try, 0.0)
            truncated = hit & accept
            finished = np.zeros(st.width, dtype=bool)
            event_handled = np.zeros(st.width, dtype=bool)

            if acting_events and np.any(accept):
                with np.errstate(all="ignore"):
                    g_olds = [e.g(st.t, st.y, st.params) for e in acting_events]
                    t_new = st.t + dt_try
                    g_news = [e.g(t_new, res.y_new, st.params) for e in acting_events]
                fire = [detect_crossing(go, gn, e.direction) & accept
                        for e, go, gn in zip(acting_events, g_olds, g_news)]
                any_fire = np.logical_or.reduce(fire) if fire else np.zeros(st.width, dtype=bool)
                for lane in np.nonzero(any_fire)[0]:
                    best = None
                    for e, f in zip(acting_events, fire):
                        if not f[lane]:
                            continue
                        t_star, y_star, _width, trials = _refine_lane(
                            system, tableau, st, lane, dt_try[lane], res.y_new, e)
                        st.n_rhs_evals[lane] += trials * res.rhs_evals
                        if best is None:
                            best = (t_star, e, y_star)
                        else:
                            # earliest wins; ties inside the bracket tolerance
                            # go to the lower-priority-number event
                            t_best, e_best, _ = best
                            if (t_star < t_best - e.tolerance) or (
                                abs(t_star - t_best) <= e.tolerance
                                and e.priority < e_best.priority
                            ):
                                best = (t_star, e, y_star)
                    t_star, e_win, y_star = best
                    if e_win.action == ACTION_APPLY_MAP:
                        y_star = e_win.state_map(y_star)
                        st.n_events[lane] += 1
                        ps["impacts"][lane] += 1
                        if ps["impacts"][lane] >= control.chatter_limit:
                            mark = np.zeros(st.width, dtype=bool)
                            mark[lane] = True
                            st.flag(mark, STATUS_CHATTER)
                    else:
                        finished[lane] = True
                    st.y[:, lane] = y_star
                    committed_dt[lane] = t_star - st.t[lane]
                    st.t[lane] = t_star
                    truncated[lane] = True
                    event_handled[lane] = True

            if record_events and np.any(accept):
                with np.errstate(all="ignore"):
                    for e in record_events:
                        go = e.g(st.t, st.y, st.params)
                        gn = e.g(st.t + dt_try, res.y_new, st.params)
                        for lane in np.nonzero(detect_crossing(go, gn, e.direction) & accept
                                               & ~event_handled)[0]:
                            t_star, _, _w, trials = _refine_lane(
                                system, tableau, st, lane, dt_try[lane], res.y_new, e)
                            st.n_rhs_evals[lane] += trials * res.rhs_evals
                            records.append((e.name, t_star))

            plain = accept & ~event_handled
            st.y[:, plain] = res.y_new[:, plain]
            end_hit = plain & hit
            st.t[plain & ~hit] += dt_try[plain & ~hit]
            st.t[end_hit] = ps["t_end"][end_hit]
            finished |= end_hit
            st.n_accepted[accept] += 1
            st.n_rejected[reject] += 1

            if observer is not None and np.any(accept):
                observer.on_commit(idx, st.t, st.y, committed_dt, accept, truncated)

            # step-size update; lanes that just landed on the phase end keep
            # their untruncated dt for the next phase
            new_dt = adapt_dt(dt_try, norm, control)
            upd = act & ~end_hit
            st.dt[upd] = new_dt[upd]

            underflow = reject & (dt_try <= control.dt_min)
            if np.any(underflow):
                for lane in np.nonzero(underflow)[0]:
                    mark = np.zeros(st.width, dtype=bool)
                    mark[lane] = True
                    st.flag(mark, ps["pending"][lane] or STATUS_DT_UNDERFLOW)

            over = st.active & (ps["attempts"] >= control.max_steps)
            if np.any(over):
                st.flag(over, STATUS_STEP_BUDGET)

            if observer is not None and np.any(finished):
                observer.on_phase_end(idx, st.t, st.y, finished)
            st.active &= ~finished

    return records

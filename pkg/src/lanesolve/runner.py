"""Experiment orchestration: sweeps, batch groups, workers, protocols.

A sweep of ``N`` parameter values is packed into width-``W`` lane packs,
packs are bundled into batch groups of ``m`` (the unroll factor), and groups
are distributed to worker threads in contiguous chunks.  Lanes are fully
independent, so any partition yields the same per-instance results; the
merge step only reassembles sweep order, which makes the output bitwise
reproducible for any worker count.

Two execution paths share the model definitions: the structured stepper
stack drives the adaptive multi-phase protocols (bubble response sweep,
work/precision study, valve bifurcation), and the compiled fixed-step
kernels drive the runtime benchmarks (three-component chaotic system and the
one-dimensional micro models).
"""

from __future__ import annotations

import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .control import StepControl, Tolerances, advance_adaptive
from .events import (
    ACTION_APPLY_MAP,
    ACTION_TERMINATE,
    DIRECTION_POS_TO_NEG,
    EventSpec,
    ImpactLaw,
    Observer,
    apply_impact,
)
from .lanes import STATUS_NONFINITE, STATUS_OK, BatchGroup, LaneState, linspace, logspace
from .models import SYSTEMS, KMPhysical, VALVE_RESTITUTION, km_coefficients
from .tableaus import TABLEAUS

__all__ = [
    "EnsembleResult",
    "ChunkResult",
    "merge_results",
    "run_lorenz_benchmark",
    "run_micro_benchmark",
    "run_km_frequency_response",
    "run_km_work_precision",
    "run_valve_bifurcation",
    "WORK_PRECISION_TOLERANCES",
    "WORK_PRECISION_FREQUENCIES",
    "KM_PHASE_SPAN",
]

WORK_PRECISION_TOLERANCES = tuple(10.0 ** -k for k in range(4, 16))
WORK_PRECISION_FREQUENCIES = (20.0e3, 100.0e3, 500.0e3)

# one driving period in rescaled time
KM_PHASE_SPAN = 1.0

KM_INITIAL_STATE = (1.0, 0.0)
LORENZ_INITIAL_STATE = (10.0, 10.0, 10.0)
VALVE_INITIAL_STATE = (0.2, 0.0, 10.2)
MICRO_INITIAL_STATE = -0.5


@dataclass
class EnsembleResult:
    """Per-instance outputs of a run, in sweep order."""

    sweep: np.ndarray
    final_state: np.ndarray            # (D, N)
    final_t: np.ndarray                # (N,)
    n_rhs_evals: np.ndarray            # (N,)
    n_accepted: np.ndarray
    n_rejected: np.ndarray
    n_events: np.ndarray
    status: np.ndarray
    observables: dict                  # name -> (N, n_record)
    runtime: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.sweep.size

    def failed_lanes(self) -> np.ndarray:
        return np.nonzero(self.status != STATUS_OK)[0]


@dataclass
class ChunkResult:
    """One worker's slice of the ensemble (instances [start, start+n))."""

    start: int
    sweep: np.ndarray
    final_state: np.ndarray
    final_t: np.ndarray
    n_rhs_evals: np.ndarray
    n_accepted: np.ndarray
    n_rejected: np.ndarray
    n_events: np.ndarray
    status: np.ndarray
    observables: dict


def merge_results(chunks, runtime: float = 0.0, meta: dict = None) -> EnsembleResult:
    """Reassemble worker chunks into sweep order.

    The chunks must partition the instance range without gaps or overlaps;
    arrival order is irrelevant.  The merged arrays are bitwise independent
    of how the work was partitioned because every lane is computed by pure
    per-lane arithmetic.
    """
    if not chunks:
        raise ValueError("empty partition list")
    ordered = sorted(chunks, key=lambda c: c.start)
    pos = 0
    for c in ordered:
        if c.start < pos:
            raise ValueError("overlapping partitions")
        if c.start > pos:
            raise ValueError("partition gap")
        pos = c.start + c.sweep.size
    parts = {
        "sweep": np.concatenate([c.sweep for c in ordered]),
        "final_state": np.concatenate([c.final_state for c in ordered], axis=1),
        "final_t": np.concatenate([c.final_t for c in ordered]),
        "n_rhs_evals": np.concatenate([c.n_rhs_evals for c in ordered]),
        "n_accepted": np.concatenate([c.n_accepted for c in ordered]),
        "n_rejected": np.concatenate([c.n_rejected for c in ordered]),
        "n_events": np.concatenate([c.n_events for c in ordered]),
        "status": np.concatenate([c.status for c in ordered]),
    }
    obs_names = ordered[0].observables.keys()
    observables = {
        name: np.concatenate([c.observables[name] for c in ordered], axis=0)
        for name in obs_names
    }
    return EnsembleResult(observables=observables, runtime=runtime, meta=meta or {}, **parts)


# ---------------------------------------------------------------------------
# group construction

def _pad_sweep(params: np.ndarray, width: int):
    """Pad a (P, N) sweep to a multiple of ``width`` (last column repeated)."""
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    p, n = params.shape
    n_packs = -(-n // width)
    padded = np.repeat(params[:, -1:], n_packs * width, axis=1)
    padded[:, :n] = params
    present = np.zeros(n_packs * width, dtype=bool)
    present[:n] = True
    return padded, present, n_packs


def _build_groups(params: np.ndarray, y0, t0: float, dt0: float, width: int, unroll: int):
    """Split a (P, N) sweep into batch groups of up to ``unroll`` lane packs.

    Returns ``(groups, group_instance_starts)``; instances stay in sweep
    order, pack-major then lane-minor, with padding confined to the tail.
    """
    padded, present, n_packs = _pad_sweep(params, width)
    groups, starts = [], []
    for g0 in range(0, n_packs, unroll):
        states = []
        for k in range(g0, min(g0 + unroll, n_packs)):
            cols = slice(k * width, (k + 1) * width)
            states.append(LaneState.from_initial(
                t0, dt0, y0,
                np.ascontiguousarray(padded[:, cols]),
                active=present[cols],
            ))
        groups.append(BatchGroup(states))
        starts.append(g0 * width)
    return groups, starts


def _chunk_evenly(items, n_chunks: int):
    n_chunks = max(1, min(n_chunks, len(items)))
    bounds = np.linspace(0, len(items), n_chunks + 1).astype(int)
    return [(bounds[i], bounds[i + 1]) for i in range(n_chunks) if bounds[i] < bounds[i + 1]]


def _collect_chunk(groups, starts, sweep_padded, group_observables) -> ChunkResult:
    """Flatten the real (non-padding) lanes of a chunk back to sweep order.

    ``group_observables[gi]`` maps a name to an ``(n_record, m, W)`` array.
    """
    sweeps, finals, ts = [], [], []
    nrhs, nacc, nrej, nev, stat = [], [], [], [], []
    names = list(group_observables[0].keys()) if group_observables else []
    obs_acc = {name: [] for name in names}
    for gi, group in enumerate(groups):
        for si, st in enumerate(group.states):
            keep = st.present
            lo = starts[gi] + si * st.width
            sweeps.append(sweep_padded[lo:lo + st.width][keep])
            finals.append(st.y[:, keep])
            ts.append(st.t[keep])
            nrhs.append(st.n_rhs_evals[keep])
            nacc.append(st.n_accepted[keep])
            nrej.append(st.n_rejected[keep])
            nev.append(st.n_events[keep])
            stat.append(st.status[keep])
            for name in names:
                obs_acc[name].append(group_observables[gi][name][:, si, :][:, keep].T)
    return ChunkResult(
        start=starts[0],
        sweep=np.concatenate(sweeps),
        final_state=np.concatenate(finals, axis=1),
        final_t=np.concatenate(ts),
        n_rhs_evals=np.concatenate(nrhs),
        n_accepted=np.concatenate(nacc),
        n_rejected=np.concatenate(nrej),
        n_events=np.concatenate(nev),
        status=np.concatenate(stat),
        observables={k: np.concatenate(v, axis=0) for k, v in obs_acc.items()},
    )


# ---------------------------------------------------------------------------
# observers

class PeakTracker(Observer):
    """Running max/min of the first state component over committed points."""

    def __init__(self, group: BatchGroup):
        self.widths = [st.width for st in group.states]
        self.reset()

    def reset(self):
        self.cur_max = [np.full(w, -np.inf) for w in self.widths]
        self.cur_min = [np.full(w, np.inf) for w in self.widths]

    def on_commit(self, state_index, t, y, dt, mask, truncated):
        np.maximum(self.cur_max[state_index],
                   np.where(mask, y[0], -np.inf), out=self.cur_max[state_index])
        np.minimum(self.cur_min[state_index],
                   np.where(mask, y[0], np.inf), out=self.cur_min[state_index])

    def on_phase_end(self, state_index, t, y, mask):
        self.on_commit(state_index, t, y, None, mask, None)


class DtExtremesTracker(Observer):
    """Smallest/largest committed controller-chosen step per lane.

    Steps truncated to land on a phase end or an event time are excluded:
    their size is set by geometry, not by error control.
    """

    def __init__(self, group: BatchGroup):
        self.dt_min = [np.full(st.width, np.inf) for st in group.states]
        self.dt_max = [np.full(st.width, -np.inf) for st in group.states]

    def on_commit(self, state_index, t, y, dt, mask, truncated):
        free = mask & ~truncated
        np.minimum(self.dt_min[state_index],
                   np.where(free, dt, np.inf), out=self.dt_min[state_index])
        np.maximum(self.dt_max[state_index],
                   np.where(free, dt, -np.inf), out=self.dt_max[state_index])


class _FanoutObserver(Observer):
    def __init__(self, *children):
        self.children = [c for c in children if c is not None]

    def on_commit(self, state_index, t, y, dt, mask, truncated):
        for c in self.children:
            c.on_commit(state_index, t, y, dt, mask, truncated)

    def on_phase_end(self, state_index, t, y, mask):
        for c in self.children:
            c.on_phase_end(state_index, t, y, mask)


# ---------------------------------------------------------------------------
# fixed-step benchmark path

def _run_kernel_groups(kernel, ys, ps, dt, n_steps, workers):
    def work(sl):
        for i in range(sl[0], sl[1]):
            kernel(ys[i], ps[i], dt, n_steps)

    chunks = _chunk_evenly(ys, workers)
    if len(chunks) == 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(work, chunks))


def _fixed_step_benchmark(model, sweep, y0, dt, n_steps, width, unroll, workers,
                          repetitions, meta):
    kernel = kernels.FIXED_RK4_KERNELS[model]
    system = SYSTEMS[model]
    padded, present, n_packs = _pad_sweep(sweep, width)
    dim = system.dim
    ps, y_templates, starts = [], [], []
    for g0 in range(0, n_packs, unroll):
        k1 = min(g0 + unroll, n_packs)
        m = k1 - g0
        block = padded[:, g0 * width:k1 * width]
        ps.append(np.ascontiguousarray(block.reshape(padded.shape[0], m, width).swapaxes(0, 1)))
        yt = np.empty((m, dim, width))
        yt[:] = np.asarray(y0, dtype=np.float64).reshape(1, dim, 1)
        y_templates.append(yt)
        starts.append(g0 * width)

    # warm-up run (also triggers compilation), then timed repetitions
    ys = [yt.copy() for yt in y_templates]
    _run_kernel_groups(kernel, ys, ps, dt, 0, workers)
    times = []
    for _ in range(max(1, repetitions)):
        ys = [yt.copy() for yt in y_templates]
        t0 = time.perf_counter()
        _run_kernel_groups(kernel, ys, ps, dt, n_steps, workers)
        times.append(time.perf_counter() - t0)
    runtime = statistics.median(times)

    n = sweep.size
    final = np.empty((dim, n))
    for gi, y in enumerate(ys):
        m = y.shape[0]
        flat = y.swapaxes(0, 1).reshape(dim, m * width)
        lo = starts[gi]
        take = min(n - lo, m * width)
        final[:, lo:lo + take] = flat[:, :take]
    finite = np.all(np.isfinite(final), axis=0)
    status = np.where(finite, STATUS_OK, STATUS_NONFINITE).astype(np.int8)
    evals = np.full(n, 4 * n_steps, dtype=np.int64)
    steps = np.full(n, n_steps, dtype=np.int64)
    zeros = np.zeros(n, dtype=np.int64)
    return EnsembleResult(
        sweep=sweep,
        final_state=final,
        final_t=np.full(n, dt * n_steps),
        n_rhs_evals=evals,
        n_accepted=steps,
        n_rejected=zeros,
        n_events=zeros.copy(),
        status=status,
        observables={},
        runtime=runtime,
        meta=dict(meta, times=times, width=width, unroll=unroll, workers=workers),
    )


def run_lorenz_benchmark(n, dt=0.01, n_steps=1000, width=4, unroll=8, workers=1,
                         repetitions=3) -> EnsembleResult:
    """Fixed-step runtime benchmark over a uniform control-parameter sweep.

    Every instance advances exactly ``n_steps`` classic fourth-order steps;
    the reported runtime is the median of ``repetitions`` timed runs after
    one warm-up.  Lanes that blow up are recorded as non-finite with a
    status flag; the run itself always completes since the work of a
    fixed-step sweep does not depend on the data.
    """
    sweep = linspace(0.0, 21.0, n) if n >= 2 else np.array([0.0])
    return _fixed_step_benchmark(
        "lorenz", sweep, LORENZ_INITIAL_STATE, dt, n_steps, width, unroll,
        workers, repetitions, meta={"model": "lorenz", "dt": dt, "n_steps": n_steps},
    )


def run_micro_benchmark(model, n, dt=0.01, n_steps=1000, width=4, unroll=8,
                        workers=1, repetitions=3) -> EnsembleResult:
    """Runtime benchmark of the one-dimensional micro models."""
    if model not in ("intro", "intro-div", "intro-sin"):
        raise ValueError(f"unknown micro model {model!r}")
    sweep = linspace(0.1, 1.0, n) if n >= 2 else np.array([0.1])
    return _fixed_step_benchmark(
        model, sweep, (MICRO_INITIAL_STATE,), dt, n_steps, width, unroll,
        workers, repetitions, meta={"model": model, "dt": dt, "n_steps": n_steps},
    )


# ---------------------------------------------------------------------------
# adaptive protocols

def _km_control(span: float, max_steps: int = 10_000_000) -> StepControl:
    return StepControl(dt_min=1e-12, dt_max=span, max_steps=max_steps)


def _run_km_chunk(groups, starts, sweep_padded, tableau, tol, n_transient, n_record,
                  extra_observer=None):
    group_obs = []
    span = KM_PHASE_SPAN
    control = _km_control(span)
    system = SYSTEMS["km"]
    dt0 = 1e-2 * span
    for group in groups:
        tracker = PeakTracker(group)
        obs = tracker if extra_observer is None else _FanoutObserver(tracker, extra_observer)
        n_phases = n_transient + n_record
        w = group.states[0].width
        y1_max = np.full((n_record, group.m, w), np.nan)
        y1_min = np.full((n_record, group.m, w), np.nan)
        for phase in range(n_phases):
            for st in group.states:
                st.rearm()
            if not group.any_active():
                break
            recording = phase >= n_transient
            if recording:
                tracker.reset()
            advance_adaptive(
                group, system, tableau, tol, control,
                t_end=(phase + 1) * span,
                observer=obs if recording else extra_observer,
                dt0=dt0,
            )
            if recording:
                r = phase - n_transient
                y1_max[r] = np.stack(tracker.cur_max)
                y1_min[r] = np.stack(tracker.cur_min)
        group_obs.append({"y1_max": y1_max, "y1_min": y1_min})
    return _collect_chunk(groups, starts, sweep_padded, group_obs)


def run_km_frequency_response(n, tol=1e-10, n_transient=1024, n_record=64,
                              stepper="ck", width=4, unroll=4, workers=1) -> EnsembleResult:
    """Amplitude response of the bubble model over a log-spaced frequency sweep.

    Each instance runs ``n_transient`` discarded unit-time phases followed by
    ``n_record`` recorded ones; the recorded observable is the per-phase
    maximum (and minimum) of the dimensionless radius over the committed step
    points, no dense output involved.  State and time carry over continuously
    between phases.
    """
    tableau = TABLEAUS[stepper]
    freqs = logspace(20.0e3, 1.0e6, n) if n >= 2 else np.array([20.0e3])
    coeffs = km_coefficients(KMPhysical(f1=freqs))
    tolerances = Tolerances(atol=tol, rtol=tol)
    groups, starts = _build_groups(coeffs, KM_INITIAL_STATE, 0.0, 1e-2, width, unroll)
    sweep_padded, _, _ = _pad_sweep(freqs, width)

    t0 = time.perf_counter()
    bounds = _chunk_evenly(groups, workers)
    tasks = [(groups[a:b], starts[a:b]) for a, b in bounds]

    def work(task):
        gs, ss = task
        return _run_km_chunk(gs, ss, sweep_padded[0], tableau, tolerances,
                             n_transient, n_record)

    if len(tasks) == 1:
        chunks = [work(tasks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(tasks)) as pool:
            chunks = list(pool.map(work, tasks))
    runtime = time.perf_counter() - t0
    return merge_results(chunks, runtime=runtime,
                         meta={"model": "km", "stepper": stepper, "tol": tol,
                               "n_transient": n_transient, "n_record": n_record})


def run_km_step_extremes(f1=20.0e3, tol=1e-10, stepper="dp", n_transient=8):
    """Committed step-size extremes over one converged unit-time phase.

    Runs ``n_transient`` settling phases from the rest state first so the
    measured phase sits on the attractor, then tracks the smallest and
    largest controller-chosen committed step (phase-end truncations
    excluded).  Returns ``(dt_min, dt_max, n_accepted_in_phase)``.
    """
    tableau = TABLEAUS[stepper]
    coeffs = km_coefficients(KMPhysical(f1=float(f1))).reshape(-1, 1)
    tolerances = Tolerances(atol=tol, rtol=tol)
    control = _km_control(KM_PHASE_SPAN)
    state = LaneState.from_initial(0.0, 1e-2, KM_INITIAL_STATE, coeffs)
    group = BatchGroup([state])
    system = SYSTEMS["km"]
    for phase in range(n_transient):
        state.rearm()
        advance_adaptive(group, system, tableau, tolerances, control,
                         t_end=(phase + 1) * KM_PHASE_SPAN, dt0=1e-2 * KM_PHASE_SPAN)
    tracker = DtExtremesTracker(group)
    accepted_before = int(state.n_accepted[0])
    state.rearm()
    advance_adaptive(group, system, tableau, tolerances, control,
                     t_end=(n_transient + 1) * KM_PHASE_SPAN,
                     observer=tracker, dt0=1e-2 * KM_PHASE_SPAN)
    return (float(tracker.dt_min[0][0]), float(tracker.dt_max[0][0]),
            int(state.n_accepted[0]) - accepted_before)


def run_km_work_precision(frequencies=WORK_PRECISION_FREQUENCIES,
                          tolerances=WORK_PRECISION_TOLERANCES,
                          steppers=("ck", "dp"), span=2.0):
    """Tolerance / global error / work study on a short two-period window.

    For every stepper and tolerance the sweep frequencies are integrated as
    one lane-packed group over ``[0, span]`` from the rest state.  The run
    with the most stringent tolerance in ``tolerances`` serves as the
    reference, so its error is zero by construction.  Returns a list of row
    dicts ``(f1_hz, tolerance, stepper, e_abs, n_f_total)`` ordered by
    stepper, then tolerance, then frequency.
    """
    freqs = np.asarray(frequencies, dtype=np.float64)
    tol_list = sorted(set(float(t) for t in tolerances), reverse=True)
    t_ref = tol_list[-1]
    coeffs = km_coefficients(KMPhysical(f1=freqs))
    system = SYSTEMS["km"]
    control = _km_control(span)

    rows = []
    for stepper in steppers:
        tableau = TABLEAUS[stepper]
        per_tol = {}
        for tol in tol_list:
            groups, _ = _build_groups(coeffs, KM_INITIAL_STATE, 0.0, 1e-2 * span, 4, 4)
            tolerance = Tolerances(atol=tol, rtol=tol)
            for group in groups:
                advance_adaptive(group, system, tableau, tolerance, control,
                                 t_end=span, dt0=1e-2 * span)
            y_end, n_f = [], []
            for group in groups:
                for st in group.states:
                    keep = st.present
                    y_end.append(st.y[0, keep])
                    n_f.append(st.n_rhs_evals[keep])
            per_tol[tol] = (np.concatenate(y_end), np.concatenate(n_f))
        y_ref = per_tol[t_ref][0]
        for tol in tol_list:
            y_end, n_f = per_tol[tol]
            err = np.abs(y_end - y_ref)
            for i, f in enumerate(freqs):
                rows.append({
                    "f1_hz": float(f),
                    "tolerance": tol,
                    "stepper": stepper,
                    "e_abs": float(err[i]),
                    "n_f_total": int(n_f[i]),
                })
    return rows


def _valve_events(impact_tol: float):
    law = ImpactLaw(restitution=VALVE_RESTITUTION)
    impact = EventSpec(
        name="impact",
        g=lambda t, y, p: y[0],
        direction=DIRECTION_POS_TO_NEG,
        tolerance=impact_tol,
        action=ACTION_APPLY_MAP,
        state_map=lambda y: apply_impact(y, law),
        priority=0,
    )
    local_max = EventSpec(
        name="displacement-maximum",
        g=lambda t, y, p: y[1],
        direction=DIRECTION_POS_TO_NEG,
        tolerance=impact_tol,
        action=ACTION_TERMINATE,
        priority=1,
    )
    return [impact, local_max]


def _run_valve_chunk(groups, starts, sweep_padded, tableau, tol, control,
                     impact_tol, n_transient, n_record):
    system = SYSTEMS["valve"]
    evs = _valve_events(impact_tol)
    group_obs = []
    for group in groups:
        tracker = PeakTracker(group)
        w = group.states[0].width
        y1_max = np.full((n_record, group.m, w), np.nan)
        y1_min = np.full((n_record, group.m, w), np.nan)
        impacts = np.zeros((n_record, group.m, w), dtype=np.int64)
        for phase in range(n_transient + n_record):
            for st in group.states:
                st.rearm()
            if not group.any_active():
                break
            recording = phase >= n_transient
            if recording:
                tracker.reset()
                ev_before = np.stack([st.n_events.copy() for st in group.states])
            advance_adaptive(group, system, tableau, tol, control,
                             t_end=None, events=evs,
                             observer=tracker if recording else None)
            if recording:
                r = phase - n_transient
                y1_max[r] = np.stack(tracker.cur_max)
                y1_min[r] = np.stack(tracker.cur_min)
                impacts[r] = np.stack([st.n_events for st in group.states]) - ev_before
        group_obs.append({"y1_max": y1_max, "y1_min": y1_min, "impacts": impacts})
    return _collect_chunk(groups, starts, sweep_padded, group_obs)


def run_valve_bifurcation(n, tol=1e-10, impact_tol=1e-6, n_transient=1024,
                          n_record=32, stepper="ck", width=4, unroll=4,
                          workers=1, max_steps=10_000_000, sweep=None) -> EnsembleResult:
    """Impacting-valve bifurcation sweep over the dimensionless flow rate.

    A phase runs from one local displacement maximum to the next (a directed
    zero crossing of the velocity), with seat impacts handled throughout by
    bisection refinement plus the restitution map.  Recorded per phase:
    ``y1_max`` (the sampled section point), ``y1_min`` (zero on impacting
    orbits) and the impact count.  Lanes that stop oscillating exhaust their
    step budget and are flagged rather than spinning forever.

    ``sweep`` overrides the default uniform flow-rate grid with explicit
    values (``n`` is ignored then).
    """
    tableau = TABLEAUS[stepper]
    if sweep is None:
        sweep = linspace(0.2, 10.0, n) if n >= 2 else np.array([0.2])
    else:
        sweep = np.asarray(sweep, dtype=np.float64)
    tolerances = Tolerances(atol=tol, rtol=tol)
    control = StepControl(dt_min=1e-12, dt_max=1.0, max_steps=max_steps)
    groups, starts = _build_groups(sweep, VALVE_INITIAL_STATE, 0.0, 1e-2, width, unroll)
    sweep_padded, _, _ = _pad_sweep(sweep, width)

    t0 = time.perf_counter()
    bounds = _chunk_evenly(groups, workers)
    tasks = [(groups[a:b], starts[a:b]) for a, b in bounds]

    def work(task):
        gs, ss = task
        return _run_valve_chunk(gs, ss, sweep_padded[0], tableau, tolerances,
                                control, impact_tol, n_transient, n_record)

    if len(tasks) == 1:
        chunks = [work(tasks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(tasks)) as pool:
            chunks = list(pool.map(work, tasks))
    runtime = time.perf_counter() - t0
    return merge_results(chunks, runtime=runtime,
                         meta={"model": "valve", "stepper": stepper, "tol": tol,
                               "impact_tol": impact_tol,
                               "n_transient": n_transient, "n_record": n_record})

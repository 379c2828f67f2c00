import numpy as np
import pytest

from lanesolve.control import StepControl, Tolerances, advance_adaptive
from lanesolve.lanes import STATUS_NONFINITE, STATUS_OK, STATUS_STEP_BUDGET, BatchGroup, LaneState
from lanesolve.models import SYSTEMS
from lanesolve.runner import (
    ChunkResult,
    merge_results,
    run_km_frequency_response,
    run_km_work_precision,
    run_lorenz_benchmark,
    run_micro_benchmark,
    run_valve_bifurcation,
)
from lanesolve.tableaus import TABLEAUS


def make_chunk(start, n, n_record=2, seed=0):
    rng = np.random.default_rng(seed + start)
    return ChunkResult(
        start=start,
        sweep=np.arange(start, start + n, dtype=float),
        final_state=rng.normal(size=(3, n)),
        final_t=np.full(n, 1.0),
        n_rhs_evals=np.arange(n, dtype=np.int64),
        n_accepted=np.ones(n, dtype=np.int64),
        n_rejected=np.zeros(n, dtype=np.int64),
        n_events=np.zeros(n, dtype=np.int64),
        status=np.zeros(n, dtype=np.int8),
        observables={"y1_max": rng.normal(size=(n, n_record))},
    )


def test_merge_results_orders_by_sweep_index():
    a, b, c = make_chunk(0, 3), make_chunk(3, 2), make_chunk(5, 4)
    merged = merge_results([c, a, b])     # shuffled arrival
    np.testing.assert_array_equal(merged.sweep, np.arange(9, dtype=float))
    merged2 = merge_results([a, b, c])
    np.testing.assert_array_equal(merged.final_state, merged2.final_state)
    np.testing.assert_array_equal(merged.observables["y1_max"],
                                  merged2.observables["y1_max"])


def test_merge_results_rejects_bad_partitions():
    with pytest.raises(ValueError, match="empty"):
        merge_results([])
    with pytest.raises(ValueError, match="overlap"):
        merge_results([make_chunk(0, 3), make_chunk(2, 3)])
    with pytest.raises(ValueError, match="gap"):
        merge_results([make_chunk(0, 3), make_chunk(4, 3)])


# --- fixed-step benchmarks ---------------------------------------------------

def test_lorenz_single_instance_matches_structured_reference():
    res = run_lorenz_benchmark(1, repetitions=1)
    assert res.status[0] == STATUS_OK
    state = LaneState.from_initial(0.0, 0.01, (10.0, 10.0, 10.0), np.array([[0.0]]))
    from lanesolve.control import advance_fixed
    advance_fixed(BatchGroup([state]), SYSTEMS["lorenz"], 0.01, 1000)
    np.testing.assert_allclose(res.final_state[:, 0], state.y[:, 0], rtol=1e-12)
    # p = 0 decays toward the origin
    assert np.all(np.abs(res.final_state[:, 0]) < 1.0)


def test_lorenz_width_lane_equivalence():
    res4 = run_lorenz_benchmark(16, width=4, unroll=2, repetitions=1)
    res1 = run_lorenz_benchmark(16, width=1, unroll=2, repetitions=1)
    np.testing.assert_array_equal(res4.final_state, res1.final_state)
    np.testing.assert_array_equal(res4.sweep, res1.sweep)


def test_lorenz_worker_count_neutral():
    res1 = run_lorenz_benchmark(64, workers=1, repetitions=1)
    res2 = run_lorenz_benchmark(64, workers=2, repetitions=1)
    np.testing.assert_array_equal(res1.final_state, res2.final_state)


def test_lorenz_counters_unconditional():
    res = run_lorenz_benchmark(8, repetitions=1)
    assert np.all(res.n_rhs_evals == 4000)
    assert np.all(res.n_accepted == 1000)


def test_micro_fixed_point_present_in_sweep():
    # linspace(0.1, 1.0, 7) contains p = 0.25 exactly at index 1
    res = run_micro_benchmark("intro", 7, repetitions=1)
    assert res.sweep[1] == 0.25
    assert res.final_state[0, 1] == -0.5
    assert res.status[1] == STATUS_OK


def test_micro_rejects_unknown_model():
    with pytest.raises(ValueError):
        run_micro_benchmark("lorenz", 8)


def test_micro_width_four_beats_width_one():
    t4 = run_micro_benchmark("intro", 1 << 15, width=4, unroll=8, repetitions=3).runtime
    t1 = run_micro_benchmark("intro", 1 << 15, width=1, unroll=8, repetitions=3).runtime
    assert t4 < t1   # soft expectation is >= 1.5x; packed lanes deliver ~4x here


# --- bubble protocols --------------------------------------------------------

def test_km_response_desk_probe_shapes_and_sanity():
    res = run_km_frequency_response(6, tol=1e-8, n_transient=2, n_record=3)
    assert res.n == 6
    y1_max = res.observables["y1_max"]
    assert y1_max.shape == (6, 3)
    assert np.all(np.isfinite(y1_max))
    assert np.all(y1_max > 0.0)
    assert np.all(res.status == STATUS_OK)
    # the driving makes the bubble grow beyond its equilibrium radius
    assert np.all(np.max(y1_max, axis=1) > 1.0)
    np.testing.assert_allclose(res.final_t, 5.0, rtol=0, atol=0)


def test_km_response_worker_and_unroll_neutrality():
    base = run_km_frequency_response(10, tol=1e-8, n_transient=1, n_record=2,
                                     unroll=2, workers=1)
    for unroll, workers in ((1, 1), (2, 2), (4, 1)):
        other = run_km_frequency_response(10, tol=1e-8, n_transient=1, n_record=2,
                                          unroll=unroll, workers=workers)
        np.testing.assert_array_equal(base.observables["y1_max"],
                                      other.observables["y1_max"])
        np.testing.assert_array_equal(base.final_state, other.final_state)
        np.testing.assert_array_equal(base.n_rhs_evals, other.n_rhs_evals)


def test_km_response_constant_sanity_model():
    # substituting a constant-solution model: every recorded maximum equals
    # the constant
    from lanesolve.models import SystemSpec
    import lanesolve.runner as runner_mod

    def rhs(t, y, p, out):
        out[...] = 0.0

    const = SystemSpec("const", 2, 13, rhs)
    orig = runner_mod.SYSTEMS
    runner_mod.SYSTEMS = dict(orig, km=const)
    try:
        res = run_km_frequency_response(5, tol=1e-8, n_transient=1, n_record=2)
    finally:
        runner_mod.SYSTEMS = orig
    np.testing.assert_array_equal(res.observables["y1_max"], 1.0)
    np.testing.assert_array_equal(res.observables["y1_min"], 1.0)


def test_km_work_precision_reference_row_is_exact():
    rows = run_km_work_precision(frequencies=(500e3,), tolerances=(1e-6, 1e-8),
                                 steppers=("ck",))
    assert len(rows) == 2
    ref = [r for r in rows if r["tolerance"] == 1e-8][0]
    assert ref["e_abs"] == 0.0
    loose = [r for r in rows if r["tolerance"] == 1e-6][0]
    assert loose["e_abs"] > 0.0
    assert loose["n_f_total"] < ref["n_f_total"]
    assert ref["n_f_total"] % 6 == 0   # six evaluations per attempt


# --- valve protocol ----------------------------------------------------------

def test_valve_bifurcation_desk_probe():
    res = run_valve_bifurcation(4, tol=1e-8, n_transient=6, n_record=3)
    assert res.n == 4
    y1_min = res.observables["y1_min"]
    y1_max = res.observables["y1_max"]
    impacts = res.observables["impacts"]
    assert y1_min.shape == (4, 3) and impacts.dtype == np.int64
    assert np.all(y1_max >= y1_min)
    # low flow rates impact (seat touched => recorded minimum is zero)
    assert np.min(y1_min[0]) <= 1e-6
    assert res.n_events[0] > 0


def test_valve_non_oscillatory_lane_flagged_not_hung():
    # a lane pinned at its stable equilibrium never produces another
    # displacement maximum; the step budget parks it with a flag
    from lanesolve.models import SystemSpec
    import lanesolve.runner as runner_mod

    def rhs(t, y, p, out):
        out[...] = 0.0   # frozen dynamics: no events can ever fire

    frozen = SystemSpec("frozen", 3, 1, rhs)
    orig = runner_mod.SYSTEMS
    runner_mod.SYSTEMS = dict(orig, valve=frozen)
    try:
        res = run_valve_bifurcation(2, tol=1e-8, n_transient=0, n_record=1,
                                    max_steps=50)
    finally:
        runner_mod.SYSTEMS = orig
    assert np.all(res.status == STATUS_STEP_BUDGET)


def test_valve_worker_neutrality():
    a = run_valve_bifurcation(5, tol=1e-8, n_transient=3, n_record=2, workers=1)
    b = run_valve_bifurcation(5, tol=1e-8, n_transient=3, n_record=2, workers=2)
    np.testing.assert_array_equal(a.observables["y1_max"], b.observables["y1_max"])
    np.testing.assert_array_equal(a.n_rhs_evals, b.n_rhs_evals)


# --- work accounting ---------------------------------------------------------

def test_work_accounting_via_independent_counter():
    # wrap the model right-hand side and count calls independently; stage
    # count x attempts + bisection re-integrations must equal the lane counter
    from lanesolve.models import SystemSpec
    from lanesolve.events import (
        ACTION_APPLY_MAP, ACTION_TERMINATE, DIRECTION_POS_TO_NEG, EventSpec,
        ImpactLaw, apply_impact,
    )

    calls = {"n": 0}
    base = SYSTEMS["valve"]

    def counting_rhs(t, y, p, out):
        calls["n"] += 1
        base.rhs(t, y, p, out)

    counted = SystemSpec("valve-counted", 3, 1, counting_rhs, guard=base.guard)
    state = LaneState.from_initial(0.0, 1e-2, (0.2, 0.0, 10.2), np.array([[0.5]]))
    group = BatchGroup([state])
    law = ImpactLaw(0.8)
    events = [
        EventSpec("impact", lambda t, y, p: y[0], direction=DIRECTION_POS_TO_NEG,
                  tolerance=1e-6, action=ACTION_APPLY_MAP,
                  state_map=lambda y: apply_impact(y, law), priority=0),
        EventSpec("max", lambda t, y, p: y[1], direction=DIRECTION_POS_TO_NEG,
                  tolerance=1e-6, action=ACTION_TERMINATE, priority=1),
    ]
    tableau = TABLEAUS["ck"]
    for _ in range(8):
        state.rearm()
        advance_adaptive(group, counted, tableau, Tolerances(1e-8, 1e-8),
                         StepControl(dt_min=1e-12, dt_max=1.0),
                         t_end=None, events=events)
    stages = tableau.stages
    attempts = int(state.n_accepted[0] + state.n_rejected[0])
    # the wrapper sees one call per stage, for attempts and for bisection
    # re-integrations alike, so the lane counter equals the call count and
    # decomposes into stage_count * attempts plus the bisection share
    assert int(state.n_rhs_evals[0]) == calls["n"]
    assert calls["n"] % stages == 0
    n_trials = calls["n"] // stages - attempts
    assert n_trials > 0   # events actually fired and were refined
    assert int(state.n_rhs_evals[0]) == stages * attempts + stages * n_trials


def test_lorenz_divergent_lane_recorded_honestly():
    # force divergence through the structured path with an oversized step
    state = LaneState.from_initial(0.0, 1.0, (10.0, 10.0, 10.0), np.array([[21.0]]))
    group = BatchGroup([state])
    from lanesolve.control import advance_fixed
    advance_fixed(group, SYSTEMS["lorenz"], 1.0, 50)
    assert state.status[0] == STATUS_NONFINITE
    assert not np.all(np.isfinite(state.y))

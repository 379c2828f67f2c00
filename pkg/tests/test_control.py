import numpy as np
import pytest

from lanesolve.control import (
    StepControl,
    Tolerances,
    adapt_dt,
    advance_adaptive,
    advance_fixed,
    error_norm,
)
from lanesolve.events import Observer
from lanesolve.lanes import (
    STATUS_DT_UNDERFLOW,
    STATUS_STEP_BUDGET,
    BatchGroup,
    LaneState,
)
from lanesolve.models import SYSTEMS, SystemSpec
from lanesolve.tableaus import CASH_KARP, DORMAND_PRINCE
from test_steppers import LINEAR, ZERO, pysys


def test_tolerances_validation():
    with pytest.raises(ValueError):
        Tolerances(0.0, 0.0)
    with pytest.raises(ValueError):
        Tolerances(-1.0, 1e-10)
    Tolerances(1e-10, 0.0)


def test_step_control_validation():
    with pytest.raises(ValueError):
        StepControl(shrink_min=1.5)
    with pytest.raises(ValueError):
        StepControl(dt_min=1.0, dt_max=0.5)


def test_error_norm_examples():
    tol = Tolerances(atol=1e-10, rtol=1e-10)
    zero = error_norm(np.zeros((2, 1)), np.ones((2, 1)), np.ones((2, 1)), tol)
    assert zero[0] == 0.0

    t2 = Tolerances(atol=1e-8, rtol=0.123)
    boundary = error_norm(np.array([[1e-8]]), np.array([[0.0]]), np.array([[0.0]]), t2)
    assert boundary[0] == pytest.approx(1.0, rel=1e-15)

    val = error_norm(np.array([[1e-12], [2e-12]]),
                     np.ones((2, 1)), np.ones((2, 1)), tol)
    assert val[0] == pytest.approx(0.01, rel=1e-12)


def test_error_norm_nonfinite_forces_rejection():
    tol = Tolerances(1e-10, 1e-10)
    bad = error_norm(np.array([[np.nan]]), np.ones((1, 1)), np.ones((1, 1)), tol)
    assert bad[0] == np.inf


def test_adapt_dt_examples():
    ctl = StepControl(dt_min=1e-12, dt_max=100.0)
    assert adapt_dt(np.array([1.0]), np.array([1.0]), ctl)[0] == pytest.approx(0.9)
    assert adapt_dt(np.array([1.0]), np.array([0.0]), ctl)[0] == pytest.approx(5.0)
    # 0.9 * (1e-5)^(-1/5) = 9 -> growth clamp
    assert adapt_dt(np.array([1.0]), np.array([1e-5]), ctl)[0] == pytest.approx(5.0)
    # dt_min/dt_max clamps
    assert adapt_dt(np.array([1e-12]), np.array([1e6]), ctl)[0] == 1e-12
    assert adapt_dt(np.array([50.0]), np.array([0.0]), ctl)[0] == 100.0


def one_lane_group(y0, dt=0.25, params=None):
    p = np.zeros((1, 1)) if params is None else np.asarray(params, float).reshape(1, -1)
    state = LaneState.from_initial(0.0, dt, y0, np.ascontiguousarray(p))
    return BatchGroup([state]), state


def test_advance_adaptive_zero_rhs_hits_end_exactly():
    group, state = one_lane_group((3.0,))
    ctl = StepControl(dt_min=1e-12, dt_max=1.0)
    advance_adaptive(group, ZERO, CASH_KARP, Tolerances(1e-10, 1e-10), ctl,
                     t_end=1.0, dt0=0.25)
    assert state.t[0] == 1.0            # exact landing, not within eps
    assert state.y[0, 0] == 3.0
    assert state.n_rejected[0] == 0
    assert state.dt[0] == 1.0           # grew to dt_max, kept through the end hit
    assert not state.active[0]


GROWTH = pysys("growth", 1, lambda t, y, p: p * y)   # y' = p*y per lane


def test_lane_asynchrony_matches_solo_runs():
    # two very different lanes packed together keep their solo step sequences
    tol = Tolerances(1e-8, 1e-8)
    ctl = StepControl(dt_min=1e-12, dt_max=1.0)

    def solo(p):
        group, state = one_lane_group((1.0,), params=[p])
        advance_adaptive(group, GROWTH, DORMAND_PRINCE, tol, ctl, t_end=1.0, dt0=1e-2)
        return state

    packed = LaneState.from_initial(0.0, 1e-2, (1.0,), np.array([[0.0, 100.0]]))
    group = BatchGroup([packed])
    advance_adaptive(group, GROWTH, DORMAND_PRINCE, tol, ctl, t_end=1.0, dt0=1e-2)

    for lane, p in enumerate((0.0, 100.0)):
        ref = solo(p)
        assert packed.n_accepted[lane] == ref.n_accepted[0]
        assert packed.n_rejected[lane] == ref.n_rejected[0]
        assert packed.n_rhs_evals[lane] == ref.n_rhs_evals[0]
        np.testing.assert_allclose(packed.y[0, lane], ref.y[0, 0], rtol=1e-12)
    assert packed.n_accepted[1] > packed.n_accepted[0]


def test_advance_fixed_zero_steps_is_noop():
    group, state = one_lane_group((1.5,), dt=0.01)
    advance_fixed(group, SYSTEMS["intro"], 0.01, 0)
    assert state.t[0] == 0.0 and state.y[0, 0] == 1.5
    assert state.n_accepted[0] == 0


def test_advance_fixed_intro_fixed_point_exact():
    state = LaneState.from_initial(0.0, 0.01, (-0.5,), np.array([[0.25]]))
    advance_fixed(BatchGroup([state]), SYSTEMS["intro"], 0.01, 1000)
    assert state.y[0, 0] == -0.5            # all stage slopes are exactly zero
    assert state.n_accepted[0] == 1000
    assert state.n_rhs_evals[0] == 4000


def test_advance_fixed_intro_attractor():
    # p = 1: stable equilibrium at -sqrt(p) = -1
    state = LaneState.from_initial(0.0, 0.01, (-0.5,), np.array([[1.0]]))
    advance_fixed(BatchGroup([state]), SYSTEMS["intro"], 0.01, 1000)
    assert state.y[0, 0] == pytest.approx(-1.0, abs=1e-6)
    assert state.t[0] == pytest.approx(10.0, rel=1e-12)


def test_step_budget_flag():
    group, state = one_lane_group((1.0,), params=[100.0])
    ctl = StepControl(dt_min=1e-12, dt_max=1.0, max_steps=5)
    advance_adaptive(group, GROWTH, DORMAND_PRINCE, Tolerances(1e-10, 1e-10), ctl,
                     t_end=1.0, dt0=1e-3)
    assert state.status[0] == STATUS_STEP_BUDGET
    assert not state.active[0]


NAN_SYS = pysys("nan", 1, lambda t, y, p: np.full_like(y, np.nan))


def test_step_size_underflow_flag():
    group, state = one_lane_group((1.0,))
    ctl = StepControl(dt_min=1e-10, dt_max=1.0)
    advance_adaptive(group, NAN_SYS, CASH_KARP, Tolerances(1e-10, 1e-10), ctl,
                     t_end=1.0, dt0=1e-2)
    assert state.status[0] == STATUS_DT_UNDERFLOW
    assert state.n_accepted[0] == 0
    assert state.n_rejected[0] > 5


def test_padding_lane_untouched():
    state = LaneState.from_initial(0.0, 1e-2, (1.0,), np.array([[1.0, 1.0]]),
                                   active=np.array([True, False]))
    group = BatchGroup([state])
    advance_adaptive(group, GROWTH, CASH_KARP, Tolerances(1e-8, 1e-8),
                     StepControl(dt_min=1e-12, dt_max=1.0), t_end=1.0, dt0=1e-2)
    assert state.n_rhs_evals[1] == 0
    assert state.n_accepted[1] == 0
    assert state.t[1] == 0.0 and state.y[0, 1] == 1.0
    assert state.t[0] == 1.0


class CountingObserver(Observer):
    def __init__(self):
        self.commits = 0
        self.ends = 0
        self.peak = -np.inf

    def on_commit(self, state_index, t, y, dt, mask, truncated):
        self.commits += int(np.count_nonzero(mask))
        self.peak = max(self.peak, float(np.max(np.where(mask, y[0], -np.inf))))

    def on_phase_end(self, state_index, t, y, mask):
        self.ends += int(np.count_nonzero(mask))


def test_observer_called_once_per_commit_plus_phase_end():
    group, state = one_lane_group((1.0,), params=[1.0])
    obs = CountingObserver()
    advance_adaptive(group, GROWTH, DORMAND_PRINCE, Tolerances(1e-8, 1e-8),
                     StepControl(dt_min=1e-12, dt_max=1.0), t_end=1.0,
                     observer=obs, dt0=1e-2)
    assert obs.commits == state.n_accepted[0]
    assert obs.ends == 1


def test_observer_max_of_constant_solution():
    group, state = one_lane_group((1.0,))
    obs = CountingObserver()
    advance_adaptive(group, ZERO, CASH_KARP, Tolerances(1e-10, 1e-10),
                     StepControl(dt_min=1e-12, dt_max=1.0), t_end=1.0,
                     observer=obs, dt0=0.25)
    assert obs.peak == 1.0


def test_every_committed_step_passed_error_control():
    # replay the committed step sequence bit-exactly and re-check acceptance
    seq = []

    class Recorder(Observer):
        def on_commit(self, state_index, t, y, dt, mask, truncated):
            if mask[0]:
                seq.append((float(t[0]), float(dt[0]), float(y[0, 0])))

    tol = Tolerances(1e-8, 1e-8)
    group, state = one_lane_group((1.0,), params=[3.0])
    advance_adaptive(group, GROWTH, DORMAND_PRINCE, tol,
                     StepControl(dt_min=1e-12, dt_max=1.0), t_end=1.0,
                     observer=Recorder(), dt0=1e-2)
    from lanesolve.steppers import attempt_step

    assert len(seq) == state.n_accepted[0] > 10
    y_start = 1.0
    for t_after, dt, y_after in seq:
        st = LaneState.from_initial(t_after - dt, dt, (y_start,), np.array([[3.0]]))
        res = attempt_step(BatchGroup([st]), GROWTH, [st.dt], DORMAND_PRINCE)[0]
        norm = error_norm(res.err, st.y, res.y_new, tol)
        assert norm[0] <= 1.0
        y_start = y_after

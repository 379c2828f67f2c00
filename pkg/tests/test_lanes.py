import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanesolve.lanes import (
    BatchGroup,
    LaneState,
    fma,
    linspace,
    logspace,
    pack_parameters,
    select,
    sincos,
)

finite_floats = st.floats(allow_nan=False, allow_infinity=False, width=64,
                          min_value=-1e12, max_value=1e12)


def test_pack_parameters_exact_fit():
    packs, active = pack_parameters([0.1, 0.2, 0.3, 0.4], width=4)
    assert packs.shape == (1, 4)
    np.testing.assert_array_equal(packs[0], [0.1, 0.2, 0.3, 0.4])
    assert active.all()


def test_pack_parameters_padding():
    packs, active = pack_parameters([0.1, 0.2, 0.3], width=4)
    np.testing.assert_array_equal(packs[0], [0.1, 0.2, 0.3, 0.3])
    np.testing.assert_array_equal(active[0], [True, True, True, False])


def test_pack_parameters_large_sweep_layout():
    values = linspace(0.1, 1.0, 65536)
    packs, active = pack_parameters(values, width=4)
    assert packs.shape == (16384, 4)
    assert packs[0, 0] == 0.1
    assert packs[-1, 3] == 1.0
    assert active.all()


def test_pack_parameters_empty_rejected():
    with pytest.raises(ValueError, match="empty ensemble"):
        pack_parameters([], width=4)


def test_pack_parameters_bad_width():
    with pytest.raises(ValueError, match="width"):
        pack_parameters([1.0], width=3)


def test_linspace_endpoints_and_midpoint():
    np.testing.assert_array_equal(linspace(0, 21, 2), [0.0, 21.0])
    np.testing.assert_array_equal(linspace(0, 21, 3), [0.0, 10.5, 21.0])


def test_linspace_spacing_closed_form():
    grid = linspace(0.1, 1.0, 65536)
    assert grid[0] == 0.1 and grid[-1] == 1.0
    spacing = np.diff(grid)
    # differences of ~1.0-sized values round to ~1 ulp of the value, which
    # is ~1.6e-11 relative to the 1.4e-5 step
    assert np.allclose(spacing, 0.9 / 65535, rtol=0, atol=4 * np.finfo(float).eps)


def test_linspace_rejects_degenerate():
    with pytest.raises(ValueError):
        linspace(0, 1, 1)
    with pytest.raises(ValueError):
        linspace(1, 1, 4)


def test_logspace_endpoints():
    grid = logspace(20e3, 1e6, 2)
    np.testing.assert_allclose(grid, [20e3, 1e6], rtol=0, atol=0)
    np.testing.assert_allclose(logspace(1, 100, 3), [1.0, 10.0, 100.0], rtol=1e-13)


def test_logspace_ratio_closed_form():
    grid = logspace(20e3, 1e6, 46080)
    ratios = grid[1:] / grid[:-1]
    assert np.allclose(ratios, (1e6 / 2e4) ** (1.0 / 46079), rtol=1e-12)
    assert grid[0] == 20e3 and grid[-1] == 1e6


def test_logspace_rejects_nonpositive():
    with pytest.raises(ValueError):
        logspace(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        logspace(-1.0, 1.0, 4)


def test_select_lane_exact():
    mask = np.array([True, False, True, False])
    a = np.array([1.0, 2.0, 3.0, 4.0])
    b = np.array([-1.0, -2.0, -3.0, -4.0])
    np.testing.assert_array_equal(select(mask, a, b), [1.0, -2.0, 3.0, -4.0])


@given(st.lists(finite_floats, min_size=4, max_size=4),
       st.lists(finite_floats, min_size=4, max_size=4))
@settings(max_examples=200, deadline=None)
def test_pack_arithmetic_matches_scalar(xs, ys):
    # pack ops are numpy elementwise ops: bit-identical to scalar arithmetic
    a = np.array(xs)
    b = np.array(ys)
    for pack_val, scalar in (
        ((a + b), [x + y for x, y in zip(xs, ys)]),
        ((a - b), [x - y for x, y in zip(xs, ys)]),
        ((a * b), [x * y for x, y in zip(xs, ys)]),
        (fma(a, b, a), [x * y + x for x, y in zip(xs, ys)]),
    ):
        np.testing.assert_array_equal(pack_val, scalar)


@given(st.lists(st.floats(min_value=-50.0, max_value=50.0), min_size=4, max_size=4))
@settings(max_examples=100, deadline=None)
def test_pack_sincos_close_to_libm(xs):
    a = np.array(xs)
    s, c = sincos(a)
    for i, x in enumerate(xs):
        # a couple of ulp of slack for vectorized transcendentals
        assert s[i] == pytest.approx(math.sin(x), abs=1e-15, rel=1e-15)
        assert c[i] == pytest.approx(math.cos(x), abs=1e-15, rel=1e-15)


def test_width_one_pack_is_scalar():
    a = np.array([0.1])
    b = np.array([0.3])
    assert (a / b)[0] == 0.1 / 0.3
    assert np.sqrt(a)[0] == math.sqrt(0.1)


def test_lane_state_construction_and_flags():
    st_ = LaneState.from_initial(0.0, 0.1, (1.0, 2.0), np.zeros((1, 4)))
    assert st_.width == 4 and st_.dim == 2
    assert st_.active.all() and st_.present.all()
    mask = np.array([True, False, False, False])
    st_.flag(mask, 3)
    assert not st_.active[0] and st_.active[1:].all()
    assert st_.status[0] == 3
    st_.flag(mask, 5)  # first cause wins
    assert st_.status[0] == 3
    st_.rearm()
    assert not st_.active[0] and st_.active[1:].all()


def test_batch_group_limits():
    mk = lambda: LaneState.from_initial(0.0, 0.1, (1.0,), np.zeros((1, 4)))
    with pytest.raises(ValueError):
        BatchGroup([mk() for _ in range(17)])
    grp = BatchGroup([mk() for _ in range(16)])
    assert grp.m == 16 and grp.any_active()

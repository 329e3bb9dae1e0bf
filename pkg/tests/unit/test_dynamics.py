"""
Dynamics Tests
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quicklap.dynamics import (
    DEFAULT_DT,
    Control,
    State,
    VehicleLimits,
    rollout,
    rollout_batch,
    step,
    wrap_angle,
)


class TestStep:
    def test_straight_line(self):
        s = step(State(0.0, 0.0, 0.0, 1.0), Control(0.0, 0.0), 0.1)
        assert s.x == pytest.approx(0.1)
        assert s.y == pytest.approx(0.0)
        assert s.heading == pytest.approx(0.0)
        assert s.speed == pytest.approx(1.0)

    def test_zero_speed_keeps_heading(self):
        s = step(State(0.0, 0.0, 0.3, 0.0), Control(1.5, 0.0), 0.2)
        assert s.heading == pytest.approx(0.3)

    def test_lateral_motion(self):
        s = step(State(0.0, 0.0, math.pi / 2, 2.0), Control(0.0, 0.0), 0.5)
        assert s.x == pytest.approx(0.0, abs=1e-12)
        assert s.y == pytest.approx(1.0)
        assert s.heading == pytest.approx(math.pi / 2)
        assert s.speed == pytest.approx(2.0)

    def test_speed_is_clamped(self):
        limits = VehicleLimits(speed_max=2.0)
        assert step(State(0, 0, 0, 2.0), Control(0, 4.0), 0.1, limits).speed == 2.0
        assert step(State(0, 0, 0, 0.1), Control(0, -4.0), 0.1, limits).speed == 0.0

    def test_friction_slows_down(self):
        limits = VehicleLimits(friction=0.5)
        s = step(State(0, 0, 0, 1.0), Control(0, 0), 0.1, limits)
        assert s.speed == pytest.approx(0.95)

    def test_rejects_non_positive_dt(self):
        with pytest.raises(ValueError):
            step(State(0, 0, 0, 1), Control(), 0.0)


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


class TestRollout:
    def test_zero_controls(self):
        traj = rollout(State(0, 0, 0, 1), [Control()] * 5, DEFAULT_DT)
        assert traj.horizon == 5
        assert traj.states[-1, 0] == pytest.approx(5 / 30)
        assert np.allclose(traj.states[:, 2], 0.0)
        assert np.allclose(traj.states[:, 3], 1.0)

    def test_single_control(self):
        traj = rollout(State(0, 0, 0, 1), [Control(0.1, 0.2)])
        assert traj.states.shape == (2, 4)
        assert traj.state(0) == State(0, 0, 0, 1)

    def test_empty_controls(self):
        with pytest.raises(ValueError, match="empty"):
            rollout(State(0, 0, 0, 1), [])

    def test_consistent_with_step(self):
        controls = [Control(0.5, 1.0), Control(-0.3, -2.0), Control(0.0, 0.5)]
        traj = rollout(State(0, 0.1, 0.2, 0.8), controls)
        s = traj.state(0)
        for i, u in enumerate(controls):
            s = step(s, u)
            assert np.allclose(traj.states[i + 1], s.as_array(), rtol=0, atol=1e-15)
        assert traj.is_consistent()

    def test_controls_are_clipped(self):
        traj = rollout(State(0, 0, 0, 1), np.array([[10.0, -10.0]]))
        assert traj.controls[0].tolist() == [2.0, -4.0]

    def test_times_follow_t0(self):
        traj = rollout(State(0, 0, 0, 1), [Control()] * 3, dt=0.5, t0=2.0)
        assert traj.times().tolist() == [2.0, 2.5, 3.0, 3.5]

    def test_batch_matches_single(self):
        rng = np.random.default_rng(0)
        controls = rng.uniform(-1, 1, (3, 6, 2))
        s0 = State(0.0, 0.1, 0.0, 1.0)
        batch = rollout_batch(s0.as_array(), controls, DEFAULT_DT)
        for i in range(3):
            assert np.array_equal(batch[i], rollout(s0, controls[i]).states)


controls_strategy = st.lists(
    st.tuples(st.floats(-2.0, 2.0), st.floats(-4.0, 4.0)), min_size=1, max_size=12,
)


@settings(max_examples=50, deadline=None)
@given(controls=controls_strategy, speed=st.floats(0.0, 2.0))
def test_rollout_is_deterministic(controls, speed):
    s0 = State(0.0, 0.05, 0.0, speed)
    first = rollout(s0, [Control(*c) for c in controls])
    second = rollout(s0, [Control(*c) for c in controls])
    assert first.same_as(second)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 20), speed=st.floats(0.0, 2.0))
def test_zero_control_keeps_heading_and_speed(n, speed):
    traj = rollout(State(0.0, 0.0, 0.4, speed), [Control()] * n)
    assert np.all(traj.states[:, 2] == 0.4)
    assert np.all(traj.states[:, 3] == speed)

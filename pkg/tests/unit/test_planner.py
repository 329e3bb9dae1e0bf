"""
Planner Tests
"""

import numpy as np
import pytest

from quicklap.dynamics import Control, State, rollout
from quicklap.errors import DimensionError
from quicklap.models import PlannerConfig
from quicklap.planner import (
    deform,
    human_correction,
    optimize_controls,
    plan,
    simulate_human_correction,
)
from quicklap.world import feature_delta, trajectory_features


def test_plan_shape_and_consistency(world_c, fast_planner):
    traj = plan(world_c, world_c.theta_star, world_c.initial_state, fast_planner)
    assert traj.horizon == fast_planner.horizon
    assert traj.state(0) == world_c.initial_state
    assert traj.is_consistent()


def test_plan_is_deterministic(world_c, fast_planner):
    first = plan(world_c, [1.0, 1.0, 1.0, 1.0], world_c.initial_state, fast_planner)
    second = plan(world_c, [1.0, 1.0, 1.0, 1.0], world_c.initial_state, fast_planner)
    assert first.same_as(second)


def test_history_is_non_decreasing(world_c, fast_planner):
    result = optimize_controls(world_c, world_c.theta_star, world_c.initial_state, fast_planner)
    assert len(result.history) == fast_planner.iterations + 2
    assert np.all(np.diff(result.history) >= 0)
    assert result.objective == result.history[-1]


def test_objective_matches_rollout(world_c, fast_planner):
    theta = np.array(world_c.theta_star)
    result = optimize_controls(world_c, theta, world_c.initial_state, fast_planner)
    traj = rollout(world_c.initial_state, result.controls, fast_planner.dt)
    assert result.objective == pytest.approx(float(theta @ trajectory_features(world_c, traj)))


def test_not_worse_than_zero_control(world_c, fast_planner):
    theta = np.array(world_c.theta_star)
    result = optimize_controls(world_c, theta, world_c.initial_state, fast_planner)
    zero = rollout(world_c.initial_state, np.zeros((fast_planner.horizon, 2)))
    assert result.objective >= float(theta @ trajectory_features(world_c, zero)) - 1e-12


def test_wrong_theta_length(world_c, fast_planner):
    with pytest.raises(DimensionError):
        plan(world_c, [1.0, 2.0], world_c.initial_state, fast_planner)


def test_human_correction_with_true_weights_matches_plan(world_c, fast_planner):
    xi_h = simulate_human_correction(world_c, world_c.theta_star, world_c.initial_state, fast_planner)
    xi_r = plan(world_c, world_c.theta_star, world_c.initial_state, fast_planner)
    assert xi_h.same_as(xi_r)


def min_cone_distance(world, traj) -> float:
    cones = np.array([[c.x, c.y] for c in world.cones])
    gaps = traj.states[:, np.newaxis, :2] - cones[np.newaxis]
    return float(np.min(np.linalg.norm(gaps, axis=2)))


class TestAroundCone:
    """最初のコーンの手前から計画（既定のプランナー設定）"""

    @pytest.fixture
    def approach(self, world_c):
        cone = world_c.cones[0]
        return State(cone.x - 0.25, cone.y, 0.0, 1.0)

    def test_speed_only_weights_accelerate_from_rest(self, world_c):
        s0 = State(0.0, world_c.lane_center(0), 0.0, 0.0)
        traj = plan(world_c, [1.0, 0.0, 0.0, 0.0], s0, PlannerConfig())
        assert traj.state(traj.horizon).speed > 0.0

    def test_true_weights_keep_clear_of_cone(self, world_c, approach):
        cfg = PlannerConfig()
        traj = plan(world_c, world_c.theta_star, approach, cfg)
        zero = rollout(approach, np.zeros((cfg.horizon, 2)), cfg.dt)
        assert min_cone_distance(world_c, traj) >= min_cone_distance(world_c, zero)

    def test_human_correction_gains_cone_distance(self, world_c, approach):
        cfg = PlannerConfig()
        xi_h = simulate_human_correction(world_c, world_c.theta_star, approach, cfg)
        xi_r = plan(world_c, [1.0, 1.0, 1.0, 1.0], approach, cfg)
        dphi = feature_delta(trajectory_features(world_c, xi_h), trajectory_features(world_c, xi_r))
        assert dphi[3] > 0.0


class TestDeform:
    def test_zero_correction_keeps_trajectory(self, world_c):
        xi_r = rollout(world_c.initial_state, [Control(0.1, 0.2)] * 4)
        assert deform(xi_r, Control(0.0, 0.0), 0.5).same_as(xi_r)

    def test_decaying_offsets(self, world_c):
        xi_r = rollout(world_c.initial_state, [Control(0.0, 0.0)] * 4)
        deformed = deform(xi_r, Control(0.4, 1.0), 0.5)
        assert deformed.controls[:, 0].tolist() == pytest.approx([0.4, 0.2, 0.1, 0.05])
        assert deformed.controls[:, 1].tolist() == pytest.approx([1.0, 0.5, 0.25, 0.125])
        assert deformed.is_consistent()

    @pytest.mark.parametrize('decay', [0.0, 1.0, -0.5, 1.5])
    def test_invalid_decay(self, world_c, decay):
        xi_r = rollout(world_c.initial_state, [Control()] * 2)
        with pytest.raises(ValueError):
            deform(xi_r, Control(0.1, 0.1), decay)

    def test_deform_mode_starts_with_human_plan(self, world_c, fast_planner):
        xi_r = plan(world_c, [1.0, 1.0, 1.0, 1.0], world_c.initial_state, fast_planner)
        xi_plan = simulate_human_correction(world_c, world_c.theta_star, world_c.initial_state, fast_planner)
        xi_h = human_correction('deform', world_c, world_c.theta_star, xi_r, fast_planner, 0.5, xi_plan=xi_plan)
        assert np.allclose(xi_h.controls[0], xi_plan.controls[0])
        assert xi_h.horizon == xi_r.horizon

    def test_unknown_mode(self, world_c, fast_planner):
        xi_r = rollout(world_c.initial_state, [Control()] * fast_planner.horizon)
        with pytest.raises(ValueError, match="Unknown human correction mode"):
            human_correction('teleport', world_c, world_c.theta_star, xi_r, fast_planner)

import dataclasses
from pathlib import Path

import numpy as np
import pytest
from oracles import relative_angle as oracle_angle
from oracles import solve_statics

from limbsafe.collision import interpolate
from limbsafe.errors import InvalidEndpoint, NoPathFound
from limbsafe.geometry import rotvec_to_matrix
from limbsafe.model import human_chain
from limbsafe.planner import (HumanPath, densify, edge_valid, invalid_reason, is_valid, path_cost, path_lengths, plan,
                              pose_path_cost, valid_mask)
from limbsafe.scenario import load_scenario_file

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture(scope="module")
def detour():
    return load_scenario_file(SCENARIOS / "lift_sphere_wrist.json")


@pytest.fixture(scope="module")
def detour_path(detour):
    return plan(detour)


def test_endpoints_valid(scenario):
    assert is_valid(scenario, scenario.theta_start)
    assert is_valid(scenario, scenario.theta_goal)
    assert invalid_reason(scenario, scenario.theta_start) is None


def test_outside_limits_invalid(scenario):
    th = scenario.theta_start.copy()
    th[3] = -0.5
    assert not is_valid(scenario, th)
    assert invalid_reason(scenario, th) == "outside joint limits"


def test_heavy_upper_arm_fails_safety(scenario):
    heavy = scenario.replace(human=dataclasses.replace(scenario.human, upper_arm_mass=200.0))
    th = heavy.theta_start
    x = solve_statics(heavy.human, th, heavy.gravity, "balanced")
    assert np.linalg.norm(x[0:3]) > 150.0 or np.linalg.norm(x[3:6]) > 400.0 or abs(x[6]) > 10.0
    assert not is_valid(heavy, th)
    assert invalid_reason(heavy, th) == "reaction forces exceed the safety limits"


def test_singular_state_invalid(scenario):
    th = np.array([0.0, 0.0, 0.6, 0.0, 0.0])   # straight elbow
    assert not is_valid(scenario, th)
    assert invalid_reason(scenario, th).startswith("statics singular")


def test_valid_mask_batches(scenario):
    th = np.array([scenario.theta_start, [0, 0, 0.6, 0.0, 0], scenario.theta_goal])
    assert valid_mask(scenario, th).tolist() == [True, False, True]


def test_path_cost_constant_path_is_zero(human):
    assert path_cost(human, np.tile([0.1, 0.2, 0.3, 0.4, 0.5], (4, 1))) == 0.0


def test_pure_translation_cost():
    p = np.array([[0.0, 0.0, 0.0], [0.06, 0.08, 0.0]])
    R = np.repeat(rotvec_to_matrix([0.3, 0.1, 0.2])[None], 2, axis=0)
    assert pose_path_cost(p, R) == pytest.approx(0.1, abs=1e-15)


def test_pure_rotation_cost(human):
    # forearm rotation spins the grasp frame about the forearm axis, on which the grasp point lies
    a = np.array([0.1, -0.2, 0.5, 1.0, -0.2])
    b = a + np.array([0, 0, 0, 0, 0.5])
    ch = human_chain(human, np.array([a, b]))
    assert np.linalg.norm(ch.grasp[1] - ch.grasp[0]) < 1e-15
    assert oracle_angle(ch.R_grasp[1], ch.R_grasp[0]) == pytest.approx(0.5, abs=1e-12)
    assert path_cost(human, [a, b]) == pytest.approx(0.5, abs=1e-12)


def test_path_cost_weights_and_additivity(human, rng):
    lo, hi = human.joint_limits.T
    A = rng.uniform(lo, hi, (5, 5))
    B = np.vstack([A[-1], rng.uniform(lo, hi, (3, 5))])
    assert path_cost(human, np.vstack([A, B[1:]])) == pytest.approx(path_cost(human, A) + path_cost(human, B))
    p, o = path_lengths(human, A)
    assert path_cost(human, A, 2.0, 0.5) == pytest.approx(2 * p + 0.5 * o)
    with pytest.raises(ValueError):
        path_cost(human, A[:1])


def test_trivial_plan(scenario):
    sc = scenario.replace(theta_goal=scenario.theta_start)
    path = plan(sc)
    assert len(path.waypoints) == 2
    assert path.metadata["cost"] == 0.0


def test_invalid_endpoint_named(scenario):
    with pytest.raises(InvalidEndpoint, match="theta_goal"):
        plan(scenario.replace(theta_goal=[0, 0, 2.5, 0.25, 0]))
    with pytest.raises(InvalidEndpoint, match="theta_start.*collision") as err:
        plan(scenario.replace(ground_height=0.5))
    assert err.value.which == "theta_start"


def test_no_path_without_samples(detour):
    assert not edge_valid(detour, detour.theta_start, detour.theta_goal)
    with pytest.raises(NoPathFound):
        plan(detour, batches=0)


def test_default_lift_close_to_straight_line(scenario):
    assert edge_valid(scenario, scenario.theta_start, scenario.theta_goal)
    straight = path_cost(scenario.human, interpolate(scenario.theta_start, scenario.theta_goal, 0.05))
    path = plan(scenario)
    assert path.metadata["cost"] <= 3 * straight


def test_path_endpoints_and_validity(detour, detour_path):
    w = detour_path.waypoints
    assert np.abs(w[0] - detour.theta_start).max() <= 1e-9
    assert np.abs(w[-1] - detour.theta_goal).max() <= 1e-9
    assert np.max(np.abs(np.diff(w, axis=0))) <= detour.edge_resolution + 1e-12
    assert valid_mask(detour, w).all()
    assert valid_mask(detour, densify(w, detour.edge_resolution)).all()


def test_cost_reported_and_anytime(detour, detour_path):
    meta = detour_path.metadata
    assert meta["cost"] == pytest.approx(path_cost(detour.human, detour_path.waypoints), rel=1e-12)
    costs = np.array(meta["batch_costs"])
    finite = costs[np.isfinite(costs)]
    assert np.all(np.diff(finite) <= 0)


def test_deterministic_under_seed(detour, detour_path):
    again = plan(detour)
    assert again.waypoints.tobytes() == detour_path.waypoints.tobytes()


def test_human_path_len(detour_path):
    assert isinstance(detour_path, HumanPath)
    assert len(detour_path) == len(detour_path.waypoints)

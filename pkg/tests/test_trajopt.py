import numpy as np
import pytest

from limbsafe.planner import path_cost, path_lengths
from limbsafe.trajopt import (RefinedTrajectory, finite_diff_gradient, finite_diff_gradients, path_valid, refine,
                              resample, smooth_direction)


def straight(scenario, n=None):
    n = scenario.n_waypoints if n is None else n
    return np.linspace(scenario.theta_start, scenario.theta_goal, n)


def zigzag(scenario):
    a, b = scenario.theta_start, scenario.theta_goal
    mid = 0.5 * (a + b) + np.array([0.25, 0.0, 0.0, 0.0, 0.3])
    return np.array([a, mid, b])


def test_resample_keeps_corners_and_endpoints():
    w = np.array([[0, 0, 0, 0, 0], [1, 0, 0, 0, 0], [1, 1, 0, 0, 0.0]])
    r = resample(w, 11)
    assert len(r) == 11
    assert np.array_equal(r[0], w[0]) and np.array_equal(r[-1], w[-1])
    assert np.any(np.all(np.abs(r - w[1]) < 1e-15, axis=1))
    step = np.linalg.norm(np.diff(r, axis=0), axis=1)
    assert np.allclose(step, 0.2)


def test_resample_merges_collinear_points():
    w = np.linspace([0, 0, 0, 0, 0.0], [1, 2, 3, 4, 5], 7)
    r = resample(w, 5)
    assert np.allclose(r, np.linspace(w[0], w[-1], 5), atol=1e-15)


def test_resample_degenerate_path():
    w = np.tile([0.1, 0.2, 0.3, 0.4, 0.5], (3, 1))
    assert np.array_equal(resample(w, 4), np.tile(w[0], (4, 1)))


def test_gradient_zero_on_constant_path(human):
    w = np.tile([0.1, 0.2, 0.3, 0.4, 0.5], (6, 1))
    gp, go = finite_diff_gradients(human, w, 1e-6)
    # lengths have a kink at zero: the two central differences are symmetric and cancel
    assert np.abs(gp).max() < 1e-8 and np.abs(go).max() < 1e-8


def test_gradient_step_independent(scenario):
    w = resample(zigzag(scenario), 12)
    g1 = finite_diff_gradient(scenario.human, w, h=1e-5)
    g2 = finite_diff_gradient(scenario.human, w, h=1e-6)
    assert np.abs(g1 - g2).max() <= 1e-4 * np.abs(g1).max()
    assert np.all(g1[0] == 0) and np.all(g1[-1] == 0)


def test_gradient_matches_full_cost_difference(scenario):
    w = resample(zigzag(scenario), 8)
    g = finite_diff_gradient(scenario.human, w, 2.0, 0.5, h=1e-6)
    i, j, h = 3, 1, 1e-6
    wp, wm = w.copy(), w.copy()
    wp[i, j] += h
    wm[i, j] -= h
    fd = (path_cost(scenario.human, wp, 2.0, 0.5) - path_cost(scenario.human, wm, 2.0, 0.5)) / (2 * h)
    assert g[i, j] == pytest.approx(fd, rel=1e-6)


def test_gradient_step_must_be_positive(human):
    with pytest.raises(ValueError):
        finite_diff_gradients(human, np.zeros((3, 5)), 0.0)


def test_descent_step_reduces_cost(scenario):
    w = resample(zigzag(scenario), 12)
    g = finite_diff_gradient(scenario.human, w)
    c0 = path_cost(scenario.human, w)
    assert path_cost(scenario.human, w - 1e-3 * g / np.abs(g).max()) < c0


def test_straight_path_nearly_fixed(scenario):
    w = straight(scenario)
    out = refine(scenario, w)
    assert out.cost <= path_cost(scenario.human, w) + 1e-12
    assert out.cost >= path_cost(scenario.human, w) - 0.05 * path_cost(scenario.human, w)


def test_refine_shortens_zigzag(scenario):
    w = zigzag(scenario)
    assert path_valid(scenario, w)
    out = refine(scenario, w)
    assert isinstance(out, RefinedTrajectory)
    assert out.cost < 0.9 * out.coarse_cost
    assert out.position_length <= out.coarse_position_length
    assert out.orientation_length <= out.coarse_orientation_length
    assert np.abs(out.waypoints[0] - scenario.theta_start).max() <= 1e-12
    assert np.abs(out.waypoints[-1] - scenario.theta_goal).max() <= 1e-12
    assert path_valid(scenario, out.waypoints)
    p, o = path_lengths(scenario.human, out.waypoints)
    assert out.cost == pytest.approx(scenario.c_p * p + scenario.c_o * o, rel=1e-12)
    assert len(out.reactions) == scenario.n_waypoints
    hist = np.array(out.metadata["cost_history"])
    assert np.all(np.diff(hist) <= 0)


def test_refine_respects_iteration_budget(scenario):
    out = refine(scenario, zigzag(scenario), max_iterations=3)
    assert out.metadata["iterations"] <= 3
    assert out.metadata["stop"] in {"max_iterations", "no_descent", "stalled"}


def test_refine_time_budget(scenario):
    out = refine(scenario, zigzag(scenario), time_budget_s=0.0)
    assert out.metadata["stop"] == "time_budget"
    assert out.cost == pytest.approx(out.coarse_cost)


def test_smooth_direction_inverts_second_difference():
    g = np.random.default_rng(3).normal(size=(7, 5))
    d = smooth_direction(g)
    assert np.all(d[0] == 0) and np.all(d[-1] == 0)
    lap = 2 * d[1:-1] - d[:-2] - d[2:]
    assert np.allclose(lap, g[1:-1], atol=1e-12)

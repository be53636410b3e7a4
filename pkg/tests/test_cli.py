import io
import json
from pathlib import Path

import numpy as np
import pytest

from limbsafe.cli import (CSV_FORMAT, EXIT_INVALID_ENDPOINT, EXIT_IO, EXIT_NO_BASE, EXIT_OK, EXIT_VALIDATION,
                          cmd_forces, main, read_trajectory_csv, write_trajectory_csv)
from limbsafe.planner import invalid_reason, path_cost, path_lengths
from limbsafe.scenario import load_scenario_file
from limbsafe.statics import solve_reactions

LIFT = Path(__file__).resolve().parents[1] / "scenarios" / "lift.json"


def variant(tmp_path, name="variant", **changes):
    doc = json.loads(LIFT.read_text())
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def lift_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("lift")
    assert main(["plan", "--scenario", str(LIFT), "--out", str(out)]) == EXIT_OK
    return out


def test_validate_ok(capsys):
    assert main(["validate", "--scenario", str(LIFT)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("ok")


def test_validate_missing_mass(tmp_path, capsys):
    doc = json.loads(LIFT.read_text())
    del doc["human"]["lower_arm_mass"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", "--scenario", str(path)]) == EXIT_VALIDATION
    assert "lower_arm_mass" in capsys.readouterr().err


def test_validate_negative_radius(tmp_path, capsys):
    path = variant(tmp_path, human={"upper_arm_radius": -0.1})
    assert main(["validate", "--scenario", str(path)]) == EXIT_VALIDATION
    assert "upper_arm_radius" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert main(["validate", "--scenario", str(tmp_path / "nope.json")]) == EXIT_IO


def test_usage_error_is_validation():
    assert main(["plan", "--scenario"]) == EXIT_VALIDATION


def test_plan_outputs(lift_run):
    report = json.loads((lift_run / "report.json").read_text())
    assert report["feasible"] is True
    assert report["scenario"] == "lift"
    assert report["csv_format"] == CSV_FORMAT
    assert report["refined_cost"] <= report["coarse_cost"]
    assert set(report["max_forces"]) == {"balanced", "shoulder_relief", "elbow_relief"}
    for name in ("trajectory.csv", "forces_balanced.csv", "forces_shoulder_relief.csv", "forces_elbow_relief.csv"):
        assert (lift_run / name).is_file()


def test_report_cost_recomputable(lift_run):
    sc = load_scenario_file(LIFT)
    report = json.loads((lift_run / "report.json").read_text())
    table = read_trajectory_csv(lift_run / "trajectory.csv")
    assert len(table.thetas) == sc.n_waypoints
    assert path_cost(sc.human, table.thetas, sc.c_p, sc.c_o) == pytest.approx(report["refined_cost"], abs=1e-9)
    p, o = path_lengths(sc.human, table.thetas)
    assert p == pytest.approx(report["refined_position_length_m"], abs=1e-9)
    assert o == pytest.approx(report["refined_orientation_length_rad"], abs=1e-9)


def test_forces_matches_statics(lift_run, tmp_path):
    out = tmp_path / "f.csv"
    code = cmd_forces(LIFT, lift_run / "trajectory.csv", "elbow_relief", out=out)
    assert code == EXIT_OK
    sc = load_scenario_file(LIFT)
    table = read_trajectory_csv(out)
    assert len(table.steps) == sc.n_waypoints
    for i in (0, len(table.steps) // 2, len(table.steps) - 1):
        sol = solve_reactions(sc.human, table.thetas[i], sc.gravity, "elbow_relief")
        assert np.array_equal(table.shoulder_force[i], sol.shoulder_force)
        assert np.array_equal(table.wrench[i], sol.wrench)
    assert out.read_text() == (lift_run / "forces_elbow_relief.csv").read_text()


def test_forces_to_stdout(lift_run, capsys):
    assert main(["forces", "--scenario", str(LIFT), "--trajectory", str(lift_run / "trajectory.csv"),
                 "--closure", "balanced"]) == EXIT_OK
    assert capsys.readouterr().out == (lift_run / "forces_balanced.csv").read_text()


def test_forces_zero_gravity(lift_run):
    path = lift_run / "zero.csv"
    assert cmd_forces(LIFT, lift_run / "trajectory.csv", "balanced", zero_gravity=True, out=path) == EXIT_OK
    table = read_trajectory_csv(path)
    loads = np.hstack([table.wrench, table.shoulder_force, table.elbow_force, table.elbow_torque[:, None]])
    assert np.abs(loads).max() == 0.0


def test_forces_bad_trajectory(tmp_path):
    bad = tmp_path / "t.csv"
    bad.write_text("a,b\n1,2\n")
    assert cmd_forces(LIFT, bad, "balanced") == EXIT_IO


def test_csv_round_trip(tmp_path):
    sc = load_scenario_file(LIFT)
    thetas = np.linspace(sc.theta_start, sc.theta_goal, 4)
    qs = np.random.default_rng(0).uniform(-1, 1, (4, sc.robot.n_joints))
    sols = [solve_reactions(sc.human, th, sc.gravity, "balanced") for th in thetas]
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, sc, thetas, qs, sols)
    table = read_trajectory_csv(path)
    assert np.array_equal(table.thetas, thetas)
    assert np.array_equal(table.qs, qs)
    assert np.array_equal(table.elbow_torque, [s.elbow_torque for s in sols])
    buf = io.StringIO()
    write_trajectory_csv(buf, sc, thetas, qs, sols)
    assert buf.getvalue() == path.read_text()


def test_plan_goal_outside_limits(tmp_path):
    path = variant(tmp_path, theta_goal=[0.0, 0.0, 3.0, 0.25, 0.0])
    assert main(["plan", "--scenario", str(path), "--out", str(tmp_path / "o")]) == EXIT_INVALID_ENDPOINT


def test_plan_goal_in_collision(tmp_path, capsys):
    path = variant(tmp_path, obstacles=[{"type": "sphere", "center": [0.0, 0.0, 0.58], "radius": 0.1}])
    sc = load_scenario_file(path)
    assert invalid_reason(sc, sc.theta_start) is None
    assert invalid_reason(sc, sc.theta_goal) is not None
    out = tmp_path / "o"
    assert main(["plan", "--scenario", str(path), "--out", str(out)]) == EXIT_INVALID_ENDPOINT
    assert "theta_goal" in capsys.readouterr().err
    assert json.loads((out / "report.json").read_text())["feasible"] is False


def test_plan_unreachable_base(tmp_path):
    path = variant(tmp_path, base_pose_mean=[50.0, 0, 0, 0, 0, 0], coupling={"max_samples": 10})
    out = tmp_path / "o"
    assert main(["plan", "--scenario", str(path), "--out", str(out)]) == EXIT_NO_BASE
    report = json.loads((out / "report.json").read_text())
    assert report["feasible"] is False
    assert report["refined_cost"] is not None

"""Command line entry point: plan, forces and validate.

``plan`` runs the whole pipeline (path planning, refinement, base-pose
sampling with per-step IK) and writes ``trajectory.csv``, one
``forces_<closure>.csv`` per closure model and ``report.json``.

Exit codes: 0 success, 1 invalid scenario, 2 unreadable/unwritable file,
3 invalid start or goal, 4 no path found, 5 no feasible robot base,
6 singular statics.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .coupling import CoupledTrajectory, grasp_residuals, replay_forces, sample_base_pose
from .errors import InvalidEndpoint, NoFeasibleBase, NoPathFound, ScenarioError, SingularConfiguration
from .geometry import matrix_to_rotvec
from .model import human_chain
from .planner import HumanPath, plan
from .scenario import Scenario, load_scenario_file
from .statics import ClosureModel, ReactionSolution, check_safety
from .trajopt import RefinedTrajectory, refine

log = logging.getLogger("limbsafe")

CSV_FORMAT = "trajectory/1"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INVALID_ENDPOINT = 3
EXIT_NO_PATH = 4
EXIT_NO_BASE = 5
EXIT_SINGULAR = 6


def csv_columns(n_robot_joints: int) -> list[str]:
    return (["step"] + [f"theta{i}" for i in range(1, 6)] + [f"q{i}" for i in range(1, n_robot_joints + 1)]
            + ["grasp_x", "grasp_y", "grasp_z", "grasp_ax", "grasp_ay", "grasp_az"]
            + ["fx", "fy", "fz", "tx", "ty", "tz"]
            + ["r1x", "r1y", "r1z", "r2x", "r2y", "r2z", "t2"])


def write_trajectory_csv(out, scenario: Scenario, thetas, qs, reactions) -> None:
    """Write one row per step; ``out`` is a path or a text stream.

    Floats are written with ``repr`` so reading them back is exact.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    qs = np.atleast_2d(np.asarray(qs, dtype=float))
    ch = human_chain(scenario.human, thetas)
    rotvecs = matrix_to_rotvec(ch.R_grasp)

    def emit(f):
        w = csv.writer(f, lineterminator="\n")
        w.writerow(csv_columns(qs.shape[1]))
        for i, sol in enumerate(reactions):
            vals = np.concatenate([thetas[i], qs[i], ch.grasp[i], rotvecs[i], sol.wrench,
                                   sol.shoulder_force, sol.elbow_force, [sol.elbow_torque]])
            w.writerow([i] + [repr(float(v)) for v in vals])

    if hasattr(out, "write"):
        emit(out)
    else:
        with open(out, "w", newline="") as f:
            emit(f)


@dataclass
class TrajectoryTable:
    steps: np.ndarray
    thetas: np.ndarray
    qs: np.ndarray
    grasp: np.ndarray          # (T, 6) position and rotation vector
    wrench: np.ndarray
    shoulder_force: np.ndarray
    elbow_force: np.ndarray
    elbow_torque: np.ndarray


def read_trajectory_csv(path) -> TrajectoryTable:
    """Parse a trajectory/forces CSV written by ``write_trajectory_csv``."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    n_q = sum(1 for h in header if h.startswith("q") and h[1:].isdigit())
    expected = csv_columns(n_q)
    if header != expected:
        raise ValueError(f"{path}: unexpected header; expected columns {expected}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(expected))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    j = 6 + n_q
    return TrajectoryTable(data[:, 0].astype(int), data[:, 1:6], data[:, 6:j], data[:, j:j + 6],
                           data[:, j + 6:j + 12], data[:, j + 12:j + 15], data[:, j + 15:j + 18], data[:, j + 18])


@dataclass
class RunReport:
    scenario: str
    seed: int
    feasible: bool
    stage_times_s: dict = field(default_factory=dict)
    coarse_position_length_m: float | None = None
    coarse_orientation_length_rad: float | None = None
    refined_position_length_m: float | None = None
    refined_orientation_length_rad: float | None = None
    coarse_cost: float | None = None
    refined_cost: float | None = None
    base_pose: list | None = None
    base_samples_tried: int = 0
    max_grasp_position_error_m: float | None = None
    max_grasp_angle_error_rad: float | None = None
    max_forces: dict = field(default_factory=dict)
    planner: dict = field(default_factory=dict)
    refinement: dict = field(default_factory=dict)
    error: str | None = None
    csv_format: str = CSV_FORMAT

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PipelineResult:
    report: RunReport
    path: HumanPath | None = None
    refined: RefinedTrajectory | None = None
    coupled: CoupledTrajectory | None = None
    forces: dict = field(default_factory=dict)


def _max_forces(reactions: list[ReactionSolution], scenario: Scenario) -> dict:
    x = np.array([r.as_vector() for r in reactions])
    return dict(
        shoulder_force_N=float(np.max(np.linalg.norm(x[:, 0:3], axis=1))),
        elbow_force_N=float(np.max(np.linalg.norm(x[:, 3:6], axis=1))),
        elbow_torque_Nm=float(np.max(np.abs(x[:, 6]))),
        within_limits=all(check_safety(r, scenario.safety).passed for r in reactions),
    )


def run_pipeline(scenario: Scenario) -> PipelineResult:
    """Plan, refine and couple; errors propagate after the report is filled in.

    The partially filled report is attached to the exception as ``report``.
    """
    report = RunReport(scenario="", seed=scenario.rng_seed, feasible=False)
    result = PipelineResult(report)
    rng = np.random.default_rng(scenario.rng_seed)
    stage = "plan"
    try:
        t = time.perf_counter()
        result.path = plan(scenario, rng=rng)
        report.stage_times_s["plan"] = time.perf_counter() - t
        meta = result.path.metadata
        report.planner = dict(batches=meta["iterations"], nodes=meta["nodes"], edge_checks=meta.get("edge_checks", 0),
                              cost=meta["cost"], batch_costs=meta["batch_costs"])

        stage = "refine"
        t = time.perf_counter()
        ref = result.refined = refine(scenario, result.path)
        report.stage_times_s["refine"] = time.perf_counter() - t
        report.coarse_position_length_m = ref.coarse_position_length
        report.coarse_orientation_length_rad = ref.coarse_orientation_length
        report.refined_position_length_m = ref.position_length
        report.refined_orientation_length_rad = ref.orientation_length
        report.coarse_cost, report.refined_cost = ref.coarse_cost, ref.cost
        report.refinement = dict(iterations=ref.metadata["iterations"], accepted=ref.metadata["accepted"],
                                 stop=ref.metadata["stop"])

        stage = "coupling"
        t = time.perf_counter()
        base, coupled = sample_base_pose(scenario, ref.waypoints, rng)
        result.coupled = coupled
        report.stage_times_s["coupling"] = time.perf_counter() - t
        report.base_pose = [float(v) for v in base]
        report.base_samples_tried = coupled.samples_tried
        pos_err, ang_err = grasp_residuals(scenario, coupled)
        report.max_grasp_position_error_m = float(pos_err.max())
        report.max_grasp_angle_error_rad = float(ang_err.max())

        stage = "forces"
        t = time.perf_counter()
        for closure in ClosureModel:
            result.forces[closure] = replay_forces(scenario, coupled, closure)
            report.max_forces[closure.value] = _max_forces(result.forces[closure], scenario)
        report.stage_times_s["forces"] = time.perf_counter() - t
        report.feasible = True
    except NoFeasibleBase as exc:
        report.base_samples_tried = exc.samples_tried
        report.error = f"{stage}: {exc}"
        exc.report = report
        raise
    except (InvalidEndpoint, NoPathFound, SingularConfiguration) as exc:
        report.error = f"{stage}: {exc}"
        exc.report = report
        raise
    return result


def _write_report(out_dir: Path, report: RunReport) -> None:
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")


def cmd_plan(scenario_path, out_dir, seed: int | None = None) -> int:
    try:
        scenario = load_scenario_file(scenario_path)
    except InvalidEndpoint as exc:
        print(f"error: plan: {exc}", file=sys.stderr)
        return EXIT_INVALID_ENDPOINT
    except ScenarioError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_IO
    if seed is not None:
        scenario = scenario.with_seed(seed)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO
    name = Path(scenario_path).stem
    codes = {InvalidEndpoint: EXIT_INVALID_ENDPOINT, NoPathFound: EXIT_NO_PATH,
             NoFeasibleBase: EXIT_NO_BASE, SingularConfiguration: EXIT_SINGULAR}
    try:
        res = run_pipeline(scenario)
    except tuple(codes) as exc:
        report = getattr(exc, "report", None) or RunReport(name, scenario.rng_seed, False, error=str(exc))
        report.scenario = name
        print(f"error: {report.error}", file=sys.stderr)
        try:
            _write_report(out, report)
        except OSError:
            pass
        return next(code for cls, code in codes.items() if isinstance(exc, cls))
    res.report.scenario = name
    coupled = res.coupled
    try:
        write_trajectory_csv(out / "trajectory.csv", scenario, coupled.thetas, coupled.qs,
                             [s.reactions for s in coupled.steps])
        for closure, sols in res.forces.items():
            write_trajectory_csv(out / f"forces_{closure.value}.csv", scenario, coupled.thetas, coupled.qs, sols)
        _write_report(out, res.report)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    r = res.report
    print(f"feasible: position length {r.coarse_position_length_m:.4f} -> {r.refined_position_length_m:.4f} m, "
          f"orientation length {r.coarse_orientation_length_rad:.4f} -> {r.refined_orientation_length_rad:.4f} rad, "
          f"{r.base_samples_tried} base sample(s)")
    return EXIT_OK


def cmd_forces(scenario_path, trajectory_csv, closure, zero_gravity: bool = False, out=None) -> int:
    try:
        scenario = load_scenario_file(scenario_path)
        closure = ClosureModel.parse(closure)
    except (ScenarioError, ValueError) as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        table = read_trajectory_csv(trajectory_csv)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read trajectory: {exc}", file=sys.stderr)
        return EXIT_IO
    if zero_gravity:
        scenario = scenario.replace(gravity=np.zeros(3))
    try:
        sols = replay_forces(scenario, table.thetas, closure)
    except SingularConfiguration as exc:
        print(f"error: forces: singular statics at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    try:
        if out is None:
            write_trajectory_csv(sys.stdout, scenario, table.thetas, table.qs, sols)
        else:
            write_trajectory_csv(out, scenario, table.thetas, table.qs, sols)
    except OSError as exc:
        print(f"error: cannot write forces: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_validate(scenario_path) -> int:
    try:
        scenario = load_scenario_file(scenario_path)
    except ScenarioError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"ok: {len(scenario.obstacles)} obstacle(s), robot with {scenario.robot.n_joints} joints")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="limbsafe", description="Plan safe repositioning motions of a passive arm.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="plan, refine and couple a trajectory")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, default=None, help="override the scenario seed")

    sf = sub.add_parser("forces", help="reaction forces along a trajectory CSV")
    sf.add_argument("--scenario", required=True)
    sf.add_argument("--trajectory", required=True)
    sf.add_argument("--closure", required=True, choices=[c.value for c in ClosureModel])
    sf.add_argument("--zero-gravity", action="store_true", help="solve with gravity switched off")
    sf.add_argument("--out", default=None, help="output CSV (default: stdout)")

    sv = sub.add_parser("validate", help="check a scenario file")
    sv.add_argument("--scenario", required=True)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which would read as an IO failure
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "plan":
        return cmd_plan(args.scenario, args.out, args.seed)
    if args.command == "forces":
        return cmd_forces(args.scenario, args.trajectory, args.closure, args.zero_gravity, args.out)
    return cmd_validate(args.scenario)


if __name__ == "__main__":
    sys.exit(main())

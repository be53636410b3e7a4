"""Scenario documents: JSON parsing, defaults and validation.

See ``docs/scenario_schema.md`` for the field reference.  Fields missing from
a document fall back to the values below; the robot description and the mean
base pose fall back to the packaged ``data/default_scenario.json``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .collision import Capsule, Sphere
from .errors import EndpointOutsideLimits, ScenarioError
from .geometry import Pose
from .model import DEFAULT_HUMAN_LIMITS, HumanArmModel, RobotArmModel
from .statics import ClosureModel, SafetyLimits

# variances of [x, y, z, rx, ry, rz] of the robot base
DEFAULT_BASE_COV = (0.01, 0.0025, 1e-6, 1e-6, 1e-6, 0.07)


@dataclass(frozen=True)
class PlannerSettings:
    batches: int = 20
    batch_size: int = 100
    goal_bias: float = 0.05
    goal_sigma: float = 0.1


@dataclass(frozen=True)
class RefineSettings:
    max_iterations: int = 300
    fd_step: float = 1e-6
    stall_iterations: int = 10
    stall_tolerance: float = 1e-6


@dataclass(frozen=True)
class CouplingSettings:
    max_samples: int = 1000
    max_joint_step: float = 0.2
    ik_max_iterations: int = 200
    first_step_restarts: int = 4
    check_robot_collision: bool = True


@dataclass(frozen=True)
class Scenario:
    human: HumanArmModel
    robot: RobotArmModel
    theta_start: np.ndarray
    theta_goal: np.ndarray
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    ground_height: float = 0.0
    obstacles: tuple = ()
    safety: SafetyLimits = field(default_factory=SafetyLimits)
    closure: ClosureModel = ClosureModel.BALANCED
    base_pose_mean: np.ndarray = field(default_factory=lambda: np.zeros(6))
    base_pose_cov_diag: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_BASE_COV))
    c_p: float = 1.0
    c_o: float = 1.0
    time_budget_s: float = 120.0
    rng_seed: int = 0
    n_waypoints: int = 50
    collision_margin: float = 0.005
    edge_resolution: float = 0.05
    planner: PlannerSettings = field(default_factory=PlannerSettings)
    refine: RefineSettings = field(default_factory=RefineSettings)
    coupling: CouplingSettings = field(default_factory=CouplingSettings)

    def __post_init__(self):
        for name in ("theta_start", "theta_goal"):
            th = np.array(getattr(self, name), dtype=float).reshape(-1)
            if th.shape != (5,) or not np.isfinite(th).all():
                raise ScenarioError(f"{name} must be 5 finite joint angles")
            lo, hi = self.human.joint_limits.T
            for i in range(5):
                if not lo[i] <= th[i] <= hi[i]:
                    raise EndpointOutsideLimits(
                        name, f"joint {i} value {th[i]} outside joint_limits [{lo[i]}, {hi[i]}]")
            object.__setattr__(self, name, th)
        object.__setattr__(self, "gravity", _vec(self.gravity, 3, "gravity"))
        object.__setattr__(self, "base_pose_mean", _vec(self.base_pose_mean, 6, "base_pose_mean"))
        cov = _vec(self.base_pose_cov_diag, 6, "base_pose_cov_diag")
        if np.any(cov < 0):
            raise ScenarioError("base_pose_cov_diag entries must be >= 0")
        object.__setattr__(self, "base_pose_cov_diag", cov)
        object.__setattr__(self, "closure", ClosureModel.parse(self.closure))
        if not self.time_budget_s > 0:
            raise ScenarioError("time_budget_s must be > 0")
        if int(self.n_waypoints) < 2:
            raise ScenarioError("n_waypoints must be >= 2")
        if not (self.c_p >= 0 and self.c_o >= 0):
            raise ScenarioError("cost_weights must be non-negative")
        if not self.collision_margin >= 0:
            raise ScenarioError("collision_margin must be >= 0")
        if not self.edge_resolution > 0:
            raise ScenarioError("edge_resolution must be > 0")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, rng_seed=int(seed))

    def replace(self, **changes) -> "Scenario":
        return replace(self, **changes)


def _vec(v, n, name):
    v = np.array(v, dtype=float).reshape(-1)
    if v.shape != (n,) or not np.isfinite(v).all():
        raise ScenarioError(f"{name} must be {n} finite numbers")
    return v


_HUMAN_REQUIRED = ("upper_arm_radius", "upper_arm_length", "upper_arm_mass",
                   "lower_arm_radius", "lower_arm_length", "lower_arm_mass")
_TOP_KEYS = {"human", "robot", "theta_start", "theta_goal", "gravity", "ground_height", "obstacles",
             "safety", "closure", "base_pose_mean", "base_pose_cov_diag", "cost_weights", "time_budget_s",
             "rng_seed", "n_waypoints", "collision_margin", "edge_resolution", "planner", "refine",
             "coupling", "name", "description"}


def _require(doc, key, where):
    if key not in doc:
        raise ScenarioError(f"missing required field {where}{key}")
    return doc[key]


def _pose(doc, where) -> Pose:
    if doc is None:
        return Pose()
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where} must be an object with position/orientation")
    try:
        return Pose(doc.get("position", [0, 0, 0]), doc.get("orientation", [0, 0, 0]))
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _number(doc, key, where, default=None):
    if key not in doc:
        if default is None:
            raise ScenarioError(f"missing required field {where}{key}")
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}{key} must be a number, got {v!r}")
    return float(v)


def _human(doc) -> HumanArmModel:
    if not isinstance(doc, dict):
        raise ScenarioError("human must be an object")
    kw = {k: _number(doc, k, "human.") for k in _HUMAN_REQUIRED}
    kw["shoulder_origin"] = _pose(doc.get("shoulder_origin"), "human.shoulder_origin")
    kw["joint_limits"] = doc.get("joint_limits", DEFAULT_HUMAN_LIMITS.tolist())
    if "grasp_offset" in doc:
        kw["grasp_offset"] = _number(doc, "grasp_offset", "human.")
    kw["grasp_rotation"] = doc.get("grasp_rotation", [0.0, 0.0, 0.0])
    return HumanArmModel(**kw)


def _robot(doc) -> RobotArmModel:
    if not isinstance(doc, dict):
        raise ScenarioError("robot must be an object")
    caps = []
    for i, c in enumerate(doc.get("collision_capsules", [])):
        try:
            caps.append(dict(joint=int(c["joint"]), a=c["a"], b=c["b"], radius=float(c["radius"])))
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"robot.collision_capsules[{i}]: missing or bad field {exc}") from None
    return RobotArmModel(
        link_frames=_require(doc, "link_frames", "robot."),
        joint_limits=_require(doc, "joint_limits", "robot."),
        tool_frame=doc.get("tool_frame", [0, 0, 0, 0]),
        collision_capsules=caps,
        q_home=doc.get("q_home"),
    )


def _obstacle(doc, i):
    kind = doc.get("type") if isinstance(doc, dict) else None
    try:
        if kind == "sphere":
            return Sphere(doc["center"], float(doc["radius"]))
        if kind == "capsule":
            return Capsule(doc["a"], doc["b"], float(doc["radius"]))
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"obstacles[{i}]: missing or bad field {exc}") from None
    except ValueError as exc:
        raise ScenarioError(f"obstacles[{i}]: {exc}") from None
    raise ScenarioError(f"obstacles[{i}]: type must be 'sphere' or 'capsule'")


def _settings(cls, doc, where):
    if doc is None:
        return cls()
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where} must be an object")
    known = cls.__dataclass_fields__
    unknown = set(doc) - set(known)
    if unknown:
        raise ScenarioError(f"{where}: unknown field(s) {sorted(unknown)}")
    kw = {k: type(known[k].default)(v) for k, v in doc.items()}
    return cls(**kw)


@lru_cache(maxsize=1)
def _packaged_default() -> dict:
    text = resources.files("limbsafe").joinpath("data/default_scenario.json").read_text()
    return json.loads(text)


def default_document() -> dict:
    return json.loads(json.dumps(_packaged_default()))


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown top-level field(s) {sorted(unknown)}")
    fallback = _packaged_default()
    human = _human(_require(doc, "human", ""))
    robot = _robot(doc.get("robot", fallback["robot"]))
    kw = dict(
        human=human,
        robot=robot,
        theta_start=_require(doc, "theta_start", ""),
        theta_goal=_require(doc, "theta_goal", ""),
        base_pose_mean=doc.get("base_pose_mean", fallback["base_pose_mean"]),
        obstacles=tuple(_obstacle(o, i) for i, o in enumerate(doc.get("obstacles", []))),
        planner=_settings(PlannerSettings, doc.get("planner"), "planner"),
        refine=_settings(RefineSettings, doc.get("refine"), "refine"),
        coupling=_settings(CouplingSettings, doc.get("coupling"), "coupling"),
    )
    for key in ("gravity", "base_pose_cov_diag"):
        if key in doc:
            kw[key] = doc[key]
    for key in ("ground_height", "time_budget_s", "collision_margin", "edge_resolution"):
        if key in doc:
            kw[key] = _number(doc, key, "")
    for key in ("rng_seed", "n_waypoints"):
        if key in doc:
            v = doc[key]
            if isinstance(v, bool) or not isinstance(v, int):
                raise ScenarioError(f"{key} must be an integer, got {v!r}")
            kw[key] = v
    if "safety" in doc:
        s = doc["safety"]
        if not isinstance(s, dict):
            raise ScenarioError("safety must be an object")
        try:
            kw["safety"] = SafetyLimits(**{k: float(v) for k, v in s.items()})
        except TypeError as exc:
            raise ScenarioError(f"safety: {exc}") from None
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
    if "closure" in doc:
        try:
            kw["closure"] = ClosureModel.parse(doc["closure"])
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
    if "cost_weights" in doc:
        w = doc["cost_weights"]
        kw["c_p"] = _number(w, "c_p", "cost_weights.", 1.0)
        kw["c_o"] = _number(w, "c_o", "cost_weights.", 1.0)
    return Scenario(**kw)


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario JSON document.

    Raises ScenarioError with the line/column for syntax errors and with the
    offending field for validation errors.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc)


def load_scenario_file(path) -> Scenario:
    return load_scenario(Path(path).read_text())


def default_scenario() -> Scenario:
    return scenario_from_dict(default_document())

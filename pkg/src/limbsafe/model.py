"""Kinematic models of the human arm and of the robot manipulator.

The human arm is a 5-joint serial chain: a spherical shoulder realised as
three intrinsic rotations (z, y, x) followed by elbow flexion (about the
upper-arm x axis) and forearm rotation (about the forearm long axis).  In the
zero configuration both bones point along the local -z axis of the shoulder
frame.  All outputs are expressed in the common scene frame (called ``rb``
throughout), in which the shoulder frame is given.

The robot is described with modified (Craig) Denavit-Hartenberg rows
``[a, alpha, d, theta_offset]``; joint ``i`` rotates about the z axis of
frame ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ScenarioError
from .geometry import Pose, rot_x, rot_y, rot_z, rotvec_to_matrix

N_HUMAN_JOINTS = 5

DEFAULT_HUMAN_LIMITS = np.array([
    [-np.pi / 2, np.pi / 2],
    [-np.pi / 2, np.pi / 2],
    [-np.pi / 2, np.pi / 2],
    [0.0, 2.6],
    [-np.pi / 2, np.pi / 2],
])


def _check_limits(limits, n, what):
    limits = np.asarray(limits, dtype=float)
    if limits.shape != (n, 2):
        raise ScenarioError(f"{what}: expected {n} [lower, upper] pairs, got shape {limits.shape}")
    for i, (lo, hi) in enumerate(limits):
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ScenarioError(f"{what}: joint {i} requires lower < upper, got [{lo}, {hi}]")
    return limits


@dataclass(frozen=True)
class HumanArmModel:
    upper_arm_radius: float
    upper_arm_length: float
    upper_arm_mass: float
    lower_arm_radius: float
    lower_arm_length: float
    lower_arm_mass: float
    shoulder_origin: Pose = field(default_factory=Pose)
    joint_limits: np.ndarray = field(default_factory=lambda: DEFAULT_HUMAN_LIMITS.copy())
    grasp_offset: float | None = None
    # fixed rotation from the forearm frame to the grasp frame (axis-angle)
    grasp_rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("upper_arm_radius", "upper_arm_length", "upper_arm_mass",
                     "lower_arm_radius", "lower_arm_length", "lower_arm_mass"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ScenarioError(f"human.{name} must be strictly positive, got {v}")
        limits = _check_limits(self.joint_limits, N_HUMAN_JOINTS, "human.joint_limits")
        object.__setattr__(self, "joint_limits", limits)
        offset = self.lower_arm_length if self.grasp_offset is None else float(self.grasp_offset)
        if not (0 < offset <= self.lower_arm_length):
            raise ScenarioError(
                f"human.grasp_offset must lie in (0, lower_arm_length={self.lower_arm_length}], got {offset}")
        object.__setattr__(self, "grasp_offset", offset)
        object.__setattr__(self, "grasp_rotation", np.array(self.grasp_rotation, dtype=float).reshape(3))

    def within_limits(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.joint_limits[:, 0], self.joint_limits[:, 1]
        return np.all((theta >= lo) & (theta <= hi), axis=-1)


@dataclass
class HumanChain:
    """Batched intermediate quantities of the human forward kinematics."""

    shoulder: np.ndarray   # (N, 3)
    elbow: np.ndarray      # (N, 3)
    wrist: np.ndarray      # (N, 3) distal end of the lower-arm cylinder
    grasp: np.ndarray      # (N, 3)
    R_upper: np.ndarray    # (N, 3, 3) upper-arm frame
    R_fore: np.ndarray     # (N, 3, 3) forearm frame
    R_grasp: np.ndarray    # (N, 3, 3)
    axes: np.ndarray       # (N, 5, 3) joint axes
    origins: np.ndarray    # (N, 5, 3) points on the joint axes


def human_chain(model: HumanArmModel, theta) -> HumanChain:
    th = np.atleast_2d(np.asarray(theta, dtype=float))
    n = th.shape[0]
    R_s = model.shoulder_origin.rotation
    p_s = model.shoulder_origin.position

    R_a = R_s @ rot_z(th[:, 0])
    R_b = R_a @ rot_y(th[:, 1])
    R_ua = R_b @ rot_x(th[:, 2])
    elbow = p_s + R_ua[:, :, 2] * -model.upper_arm_length
    R_c = R_ua @ rot_x(th[:, 3])
    R_fa = R_c @ rot_z(th[:, 4])
    forearm_dir = -R_fa[:, :, 2]
    grasp = elbow + model.grasp_offset * forearm_dir
    wrist = elbow + model.lower_arm_length * forearm_dir
    R_g = R_fa @ rotvec_to_matrix(model.grasp_rotation)

    axes = np.stack([
        np.broadcast_to(R_s[:, 2], (n, 3)),
        R_a[:, :, 1],
        R_ua[:, :, 0],
        R_ua[:, :, 0],
        R_c[:, :, 2],
    ], axis=1)
    shoulder = np.broadcast_to(p_s, (n, 3)).copy()
    origins = np.stack([shoulder, shoulder, shoulder, elbow, elbow], axis=1)
    return HumanChain(shoulder, elbow, wrist, grasp, R_ua, R_fa, R_g, axes, origins)


def human_fk(model: HumanArmModel, theta) -> tuple[Pose, Pose]:
    """Elbow and grasp poses for one configuration."""
    ch = human_chain(model, theta)
    return Pose.from_rt(ch.R_upper[0], ch.elbow[0]), Pose.from_rt(ch.R_grasp[0], ch.grasp[0])


def human_fk_batch(model: HumanArmModel, theta) -> tuple[np.ndarray, np.ndarray]:
    """Grasp positions (N, 3) and rotation matrices (N, 3, 3)."""
    ch = human_chain(model, theta)
    return ch.grasp, ch.R_grasp


def human_jacobian(model: HumanArmModel, theta) -> np.ndarray:
    """6x5 geometric Jacobian of the grasp frame: rows [linear velocity; angular velocity]."""
    ch = human_chain(model, theta)
    axes, origins, p = ch.axes[0], ch.origins[0], ch.grasp[0]
    lin = np.cross(axes, p - origins)
    return np.vstack([lin.T, axes.T])


def upper_arm_direction(model: HumanArmModel, theta) -> np.ndarray:
    """Unit vector along the humerus, shoulder to elbow."""
    ch = human_chain(model, theta)
    d = ch.elbow - ch.shoulder
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


@dataclass(frozen=True)
class RobotCapsule:
    """Capsule rigidly attached to robot frame ``joint`` (0 = base)."""

    joint: int
    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.array(self.a, dtype=float).reshape(3))
        object.__setattr__(self, "b", np.array(self.b, dtype=float).reshape(3))
        if not self.radius > 0:
            raise ScenarioError(f"robot capsule radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class RobotArmModel:
    link_frames: np.ndarray                 # (n, 4) rows [a, alpha, d, theta_offset]
    joint_limits: np.ndarray                # (n, 2)
    tool_frame: np.ndarray = field(default_factory=lambda: np.zeros(4))
    collision_capsules: tuple = ()
    q_home: np.ndarray | None = None

    def __post_init__(self):
        frames = np.asarray(self.link_frames, dtype=float)
        if frames.ndim != 2 or frames.shape[1] != 4:
            raise ScenarioError("robot.link_frames must be a list of [a, alpha, d, theta_offset] rows")
        n = frames.shape[0]
        if n < 6:
            raise ScenarioError(f"robot.link_frames: need at least 6 joints for a full grasp pose, got {n}")
        object.__setattr__(self, "link_frames", frames)
        object.__setattr__(self, "joint_limits", _check_limits(self.joint_limits, n, "robot.joint_limits"))
        object.__setattr__(self, "tool_frame", np.array(self.tool_frame, dtype=float).reshape(4))
        caps = tuple(c if isinstance(c, RobotCapsule) else RobotCapsule(**c) for c in self.collision_capsules)
        for c in caps:
            if not 0 <= c.joint <= n:
                raise ScenarioError(f"robot capsule attached to unknown frame {c.joint}")
        object.__setattr__(self, "collision_capsules", caps)
        home = np.mean(self.joint_limits, axis=1) if self.q_home is None else np.asarray(self.q_home, dtype=float)
        if home.shape != (n,):
            raise ScenarioError(f"robot.q_home must have {n} entries")
        object.__setattr__(self, "q_home", home)

    @property
    def n_joints(self) -> int:
        return self.link_frames.shape[0]

    def within_limits(self, q) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.joint_limits[:, 0]) and np.all(q <= self.joint_limits[:, 1]))


def mdh_transform(a, alpha, d, theta) -> np.ndarray:
    ca, sa = np.cos(alpha), np.sin(alpha)
    ct, st = np.cos(theta), np.sin(theta)
    return np.array([
        [ct, -st, 0.0, a],
        [st * ca, ct * ca, -sa, -sa * d],
        [st * sa, ct * sa, ca, ca * d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def base_matrix(base) -> np.ndarray:
    """4x4 transform of a 6-vector base pose [x y z rx ry rz] (axis-angle)."""
    if base is None:
        return np.eye(4)
    if isinstance(base, Pose):
        return base.matrix()
    base = np.asarray(base, dtype=float)
    T = np.eye(4)
    T[:3, :3] = rotvec_to_matrix(base[3:])
    T[:3, 3] = base[:3]
    return T


def robot_frames(model: RobotArmModel, q, base=None) -> list[np.ndarray]:
    """Frame transforms [base, frame 1, ..., frame n, tool] in the scene frame."""
    q = np.asarray(q, dtype=float)
    T = base_matrix(base)
    frames = [T]
    for (a, alpha, d, off), qi in zip(model.link_frames, q):
        T = T @ mdh_transform(a, alpha, d, qi + off)
        frames.append(T)
    a, alpha, d, off = model.tool_frame
    frames.append(T @ mdh_transform(a, alpha, d, off))
    return frames


def robot_fk(model: RobotArmModel, q, base=None) -> Pose:
    return Pose.from_matrix(robot_frames(model, q, base)[-1])


def robot_fk_matrix(model: RobotArmModel, q, base=None) -> np.ndarray:
    return robot_frames(model, q, base)[-1]


def robot_jacobian(model: RobotArmModel, q, base=None) -> np.ndarray:
    """6xn geometric Jacobian of the tool frame in the scene frame."""
    frames = robot_frames(model, q, base)
    p = frames[-1][:3, 3]
    cols = []
    for T in frames[1:-1]:
        z, o = T[:3, 2], T[:3, 3]
        cols.append(np.concatenate([np.cross(z, p - o), z]))
    return np.array(cols).T


def robot_reach(model: RobotArmModel) -> float:
    """Upper bound on the tool distance from the base origin."""
    rows = np.vstack([model.link_frames, model.tool_frame])
    return float(np.sum(np.abs(rows[:, 0]) + np.abs(rows[:, 2])))

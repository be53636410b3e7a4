"""Signed distances between spheres, capsules and half-spaces, and the
configuration-level clearance checks built on them.

Clearance checks are vectorised over a leading batch of arm configurations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import HumanArmModel, RobotArmModel, human_chain, robot_frames

_EPS = 1e-15


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.array(self.center, dtype=float).reshape(3))
        if not self.radius > 0:
            raise ValueError(f"sphere radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Capsule:
    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.array(self.a, dtype=float).reshape(3))
        object.__setattr__(self, "b", np.array(self.b, dtype=float).reshape(3))
        if not self.radius > 0:
            raise ValueError(f"capsule radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class HalfSpace:
    """Solid region ``{x : normal . x <= offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.array(self.normal, dtype=float).reshape(3)
        norm = np.linalg.norm(n)
        if not norm > 0:
            raise ValueError("half-space normal must be non-zero")
        object.__setattr__(self, "normal", n / norm)


Primitive = Sphere | Capsule | HalfSpace


def _dot(u, v):
    return np.sum(u * v, axis=-1)


def point_segment_distance(x, a, b):
    """Distance from points to segments; all arguments broadcast over (..., 3)."""
    ab = b - a
    denom = _dot(ab, ab)
    t = np.clip(_dot(x - a, ab) / np.maximum(denom, _EPS), 0.0, 1.0)
    t = np.where(denom > _EPS, t, 0.0)
    return np.linalg.norm(x - (a + t[..., None] * ab), axis=-1)


def segment_distance(p1, q1, p2, q2):
    """Minimum distance between segments [p1, q1] and [p2, q2] (broadcast over (..., 3))."""
    p1, q1, p2, q2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (p1, q1, p2, q2)))
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = _dot(d1, d1), _dot(d2, d2), _dot(d2, r)
    c, b = _dot(d1, r), _dot(d1, d2)
    denom = a * e - b * b
    safe = lambda v: np.where(v > _EPS, v, 1.0)  # noqa: E731

    s = np.where(denom > _EPS * np.maximum(a * e, 1.0), np.clip((b * f - c * e) / safe(denom), 0, 1), 0.0)
    t = (b * s + f) / safe(e)
    s = np.where(t < 0, np.clip(-c / safe(a), 0, 1), np.where(t > 1, np.clip((b - c) / safe(a), 0, 1), s))
    t = np.clip(t, 0, 1)
    # degenerate segments
    s = np.where(a <= _EPS, 0.0, s)
    t = np.where(a <= _EPS, np.clip(f / safe(e), 0, 1), t)
    s = np.where(e <= _EPS, np.where(a <= _EPS, 0.0, np.clip(-c / safe(a), 0, 1)), s)
    t = np.where(e <= _EPS, 0.0, t)
    return np.linalg.norm((p1 + s[..., None] * d1) - (p2 + t[..., None] * d2), axis=-1)


def _as_segment(p):
    if isinstance(p, Sphere):
        return p.center, p.center, p.radius
    return p.a, p.b, p.radius


def distance(a: Primitive, b: Primitive) -> float:
    """Signed clearance: positive when separated, <= 0 when touching or overlapping."""
    if isinstance(a, HalfSpace) and isinstance(b, HalfSpace):
        if np.allclose(a.normal, -b.normal):
            return float(-b.offset - a.offset)
        return -np.inf
    if isinstance(b, HalfSpace):
        a, b = b, a
    if isinstance(a, HalfSpace):
        p, q, r = _as_segment(b)
        return float(min(a.normal @ p, a.normal @ q) - a.offset - r)
    p1, q1, r1 = _as_segment(a)
    p2, q2, r2 = _as_segment(b)
    return float(segment_distance(p1, q1, p2, q2) - r1 - r2)


def interpolate(a, b, max_step: float) -> np.ndarray:
    """Straight joint-space segment from ``a`` to ``b`` with every joint step <= max_step."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    n = max(1, int(np.ceil(np.max(np.abs(b - a)) / max_step - 1e-12)))
    s = np.linspace(0.0, 1.0, n + 1)[:, None]
    out = a + s * (b - a)
    out[-1] = b
    return out


def _clearance_to(prims, p, q, r):
    """Min clearance of capsules [p, q] radius r (batched) to a list of primitives."""
    best = np.full(np.shape(p)[:-1], np.inf)
    for o in prims:
        if isinstance(o, HalfSpace):
            d = np.minimum(p @ o.normal, q @ o.normal) - o.offset - r
        else:
            op, oq, orad = _as_segment(o)
            d = segment_distance(p, q, op, oq) - r - orad
        best = np.minimum(best, d)
    return best


def ground(height: float) -> HalfSpace:
    return HalfSpace([0.0, 0.0, 1.0], height)


def human_capsules(model: HumanArmModel, chain) -> list[tuple]:
    return [
        (chain.shoulder, chain.elbow, model.upper_arm_radius),
        (chain.elbow, chain.wrist, model.lower_arm_radius),
    ]


def human_clearance(model: HumanArmModel, theta, environment) -> np.ndarray:
    """(N,) smallest clearance between the arm and the environment primitives.

    The two arm links share the elbow and are never checked against each other.
    """
    ch = human_chain(model, theta)
    best = np.full(ch.grasp.shape[0], np.inf)
    for p, q, r in human_capsules(model, ch):
        best = np.minimum(best, _clearance_to(environment, p, q, r))
    return best


def robot_capsules_world(robot: RobotArmModel, q, base) -> list[tuple[int, np.ndarray, np.ndarray, float]]:
    frames = robot_frames(robot, q, base)
    out = []
    for c in robot.collision_capsules:
        T = frames[c.joint]
        out.append((c.joint, T[:3, :3] @ c.a + T[:3, 3], T[:3, :3] @ c.b + T[:3, 3], c.radius))
    return out


def robot_clearance(robot: RobotArmModel, q, base, human: HumanArmModel, theta, environment,
                    ground_plane: HalfSpace | None = None) -> float:
    """Smallest clearance between robot capsules and the human arm / environment.

    Capsules on the last link grip the arm and are exempt from the human check;
    base capsules (frame 0) rest on the ground and are exempt from the ground check.
    """
    ch = human_chain(model=human, theta=theta)
    arm = [Capsule(p[0], q_[0], r) for p, q_, r in human_capsules(human, ch)]
    best = np.inf
    for joint, a, b, r in robot_capsules_world(robot, q, base):
        others = list(environment)
        if joint != robot.n_joints:
            others += arm
        if ground_plane is not None and joint != 0:
            others.append(ground_plane)
        if others:
            best = min(best, float(_clearance_to(others, a, b, r)))
    return best


def state_free_batch(scenario, theta, margin: float | None = None) -> np.ndarray:
    """(N,) arm-only collision check against ground and obstacles."""
    margin = scenario.collision_margin if margin is None else margin
    env = [ground(scenario.ground_height), *scenario.obstacles]
    return human_clearance(scenario.human, theta, env) > margin


def state_free(scenario, theta, q=None, base_pose=None, margin: float | None = None) -> bool:
    """True iff every checked pair is separated by more than ``margin``.

    With ``q`` given the robot (placed at ``base_pose``, default the scenario's
    mean base pose) is checked against the arm, ground and obstacles too.
    """
    margin = scenario.collision_margin if margin is None else margin
    if not state_free_batch(scenario, np.atleast_2d(theta), margin)[0]:
        return False
    if q is None:
        return True
    base = scenario.base_pose_mean if base_pose is None else base_pose
    clearance = robot_clearance(scenario.robot, q, base, scenario.human, theta,
                                scenario.obstacles, ground(scenario.ground_height))
    return clearance > margin

"""Quasi-static reaction forces of the passive two-link human arm.

Unknowns (13), all in the scene frame::

    r1  (3)  force on the upper arm from the torso at the shoulder
    r2  (3)  force on the upper arm from the forearm at the elbow
    t2  (1)  elbow reaction torque about ``flexion axis x forearm axis``
    f   (3)  force applied by the robot on the forearm at the grasp point
    t   (3)  torque applied by the robot at the grasp point

Both reaction forces are the loads that *support the upper arm*, which is the
reading under which the balanced closure distributes the upper-arm weight
between the two joints.  Equations: force and moment balance of the upper arm
(moments about the shoulder) and of the forearm (moments about the elbow),
twelve in total, plus one closure on the components along the vertical
(``-gravity``) axis.  Link centres of mass sit at mid-length.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import SingularConfiguration
from .geometry import skew
from .model import HumanArmModel, human_chain

SINGULAR_CONDITION = 1e12
STANDARD_GRAVITY = 9.81


class ClosureModel(str, enum.Enum):
    SHOULDER_RELIEF = "shoulder_relief"
    ELBOW_RELIEF = "elbow_relief"
    BALANCED = "balanced"

    @classmethod
    def parse(cls, value) -> "ClosureModel":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"shoulderrelief": "shoulder_relief", "elbowrelief": "elbow_relief"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown closure {value!r}; expected one of "
                             f"{', '.join(c.value for c in cls)}") from None


@dataclass(frozen=True)
class SafetyLimits:
    shoulder_force_max: float = 150.0
    elbow_force_max: float = 400.0
    elbow_torque_max: float = 10.0

    def __post_init__(self):
        for name in ("shoulder_force_max", "elbow_force_max", "elbow_torque_max"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"safety.{name} must be strictly positive, got {v}")


@dataclass(frozen=True)
class ReactionSolution:
    shoulder_force: np.ndarray
    elbow_force: np.ndarray
    elbow_torque: float
    wrench: np.ndarray          # [fx fy fz tx ty tz] applied on the arm at the grasp point

    @classmethod
    def from_vector(cls, x) -> "ReactionSolution":
        x = np.asarray(x, dtype=float)
        return cls(x[0:3].copy(), x[3:6].copy(), float(x[6]), x[7:13].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.shoulder_force, self.elbow_force, [self.elbow_torque], self.wrench])


@dataclass(frozen=True)
class SafetyReport:
    passed: bool
    margins: dict
    violations: tuple

    def __bool__(self):
        return self.passed


def vertical_axis(gravity) -> np.ndarray:
    """Unit vector opposite to gravity; +z when gravity vanishes."""
    g = np.asarray(gravity, dtype=float)
    n = np.linalg.norm(g)
    return np.array([0.0, 0.0, 1.0]) if n == 0 else -g / n


def _ratio_from_chain(ch, gravity) -> np.ndarray:
    bone = ch.elbow - ch.shoulder
    bone /= np.linalg.norm(bone, axis=-1, keepdims=True)
    c = np.clip(bone @ vertical_axis(gravity), -1.0, 1.0)
    return np.sin(0.5 * np.arccos(c))


def balanced_ratio_batch(model: HumanArmModel, theta, gravity) -> np.ndarray:
    return _ratio_from_chain(human_chain(model, theta), gravity)


def balanced_ratio(model: HumanArmModel, theta, gravity) -> float:
    """sin(angle/2), angle between the vertical axis and the humerus (shoulder to elbow).

    0 for an arm raised straight up, 1 for an arm hanging down.
    """
    return float(balanced_ratio_batch(model, theta, gravity)[0])


def elbow_torque_axis(chain) -> np.ndarray:
    a = np.cross(chain.axes[:, 3], chain.axes[:, 4])
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


def assemble(model: HumanArmModel, theta, gravity, closure) -> tuple[np.ndarray, np.ndarray]:
    """Batched linear system ``A x = b`` (shapes (N, 13, 13) and (N, 13))."""
    closure = ClosureModel.parse(closure)
    ch = human_chain(model, theta)
    n = ch.grasp.shape[0]
    g = np.asarray(gravity, dtype=float)
    w_ua, w_la = model.upper_arm_mass * g, model.lower_arm_mass * g
    s, e, p = ch.shoulder, ch.elbow, ch.grasp
    c_ua = 0.5 * (s + e)
    c_la = e + 0.5 * (ch.wrist - e)
    a_t = elbow_torque_axis(ch)
    eye = np.broadcast_to(np.eye(3), (n, 3, 3))

    A = np.zeros((n, 13, 13))
    b = np.zeros((n, 13))
    # upper arm: forces
    A[:, 0:3, 0:3] = eye
    A[:, 0:3, 3:6] = eye
    b[:, 0:3] = -w_ua
    # upper arm: moments about the shoulder
    A[:, 3:6, 3:6] = skew(e - s)
    A[:, 3:6, 6] = a_t
    b[:, 3:6] = -np.cross(c_ua - s, w_ua)
    # forearm: forces
    A[:, 6:9, 3:6] = -eye
    A[:, 6:9, 7:10] = eye
    b[:, 6:9] = -w_la
    # forearm: moments about the elbow
    A[:, 9:12, 6] = -a_t
    A[:, 9:12, 7:10] = skew(p - e)
    A[:, 9:12, 10:13] = eye
    b[:, 9:12] = -np.cross(c_la - e, w_la)
    # closure on vertical components
    up = vertical_axis(g)
    if closure is ClosureModel.SHOULDER_RELIEF:
        A[:, 12, 0:3] = up
    elif closure is ClosureModel.ELBOW_RELIEF:
        A[:, 12, 3:6] = up
    else:
        ratio = _ratio_from_chain(ch, g)
        A[:, 12, 0:3] = up
        A[:, 12, 3:6] = -ratio[:, None] * up
    return A, b


def solve_batch(model: HumanArmModel, theta, gravity, closure) -> tuple[np.ndarray, np.ndarray]:
    """Solutions (N, 13) and condition numbers (N,); rows above the singular threshold are NaN."""
    A, b = assemble(model, theta, gravity, closure)
    sv = np.linalg.svd(A, compute_uv=False)
    with np.errstate(divide="ignore"):
        cond = np.where(sv[:, -1] > 0, sv[:, 0] / sv[:, -1], np.inf)
    ok = cond <= SINGULAR_CONDITION
    A = np.where(ok[:, None, None], A, np.eye(13))
    x = np.linalg.solve(A, b[..., None])[..., 0]
    x[~ok] = np.nan
    return x, cond


def solve_reactions(model: HumanArmModel, theta, gravity, closure) -> ReactionSolution:
    x, cond = solve_batch(model, np.atleast_2d(theta), gravity, closure)
    if not np.isfinite(x[0]).all():
        raise SingularConfiguration(
            f"statics matrix condition number {cond[0]:.3g} exceeds {SINGULAR_CONDITION:.0e}", cond[0])
    return ReactionSolution.from_vector(x[0])


def safety_margins(x, limits: SafetyLimits) -> np.ndarray:
    """(N, 3) margins [shoulder force, elbow force, elbow torque]; positive means safe."""
    x = np.atleast_2d(x)
    return np.stack([
        limits.shoulder_force_max - np.linalg.norm(x[:, 0:3], axis=1),
        limits.elbow_force_max - np.linalg.norm(x[:, 3:6], axis=1),
        limits.elbow_torque_max - np.abs(x[:, 6]),
    ], axis=1)


def check_safety(sol: ReactionSolution, limits: SafetyLimits) -> SafetyReport:
    m = safety_margins(sol.as_vector(), limits)[0]
    names = ("shoulder_force", "elbow_force", "elbow_torque")
    margins = dict(zip(names, map(float, m)))
    violations = tuple(k for k, v in margins.items() if not v > 0)
    return SafetyReport(not violations, margins, violations)


def yield_force(sigma_yp: float, area: float) -> float:
    """Tendon yield load in N from yield stress (N/mm^2) and cross-section (mm^2)."""
    if not (sigma_yp > 0 and area > 0):
        raise ValueError("yield stress and area must be positive")
    return sigma_yp * area


def solve_planar_fbd(m_b, L_b, theta_A, theta_B, f_x, g=STANDARD_GRAVITY):
    """Single planar link on a pin joint, held at its tip by a wrench.

    The axial force ``f_x`` is a free input: the three balance equations leave
    it undetermined, and the pin reaction along the link absorbs whatever is
    applied.  The transverse reaction is closed with ``r_y = 0``.
    Returns ``(f_y, t_z, r_x, r_y)``.
    """
    phi = theta_A + theta_B
    r_y = 0.0
    r_x = m_b * g * np.sin(phi) - f_x
    f_y = -r_y - m_b * g * np.cos(phi)
    t_z = -L_b * f_y - 0.5 * L_b * m_b * g * np.cos(phi)
    return f_y, t_z, r_x, r_y

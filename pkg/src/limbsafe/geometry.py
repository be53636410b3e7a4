"""Rotation and rigid-transform helpers.

Most functions accept a leading batch axis so that kinematics, cost and
validity checks can be evaluated over many joint states in one numpy call.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation


def rot_x(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([
        np.stack([o, z, z], -1),
        np.stack([z, c, -s], -1),
        np.stack([z, s, c], -1),
    ], -2)


def rot_y(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([
        np.stack([c, z, s], -1),
        np.stack([z, o, z], -1),
        np.stack([-s, z, c], -1),
    ], -2)


def rot_z(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([
        np.stack([c, -s, z], -1),
        np.stack([s, c, z], -1),
        np.stack([z, z, o], -1),
    ], -2)


def skew(v):
    """Cross-product matrix; ``skew(a) @ b == cross(a, b)``. Batched over leading axes."""
    v = np.asarray(v, dtype=float)
    z = np.zeros(v.shape[:-1])
    x, y, w = v[..., 0], v[..., 1], v[..., 2]
    return np.stack([
        np.stack([z, -w, y], -1),
        np.stack([w, z, -x], -1),
        np.stack([-y, x, z], -1),
    ], -2)


def vee(m):
    """Inverse of ``skew`` applied to the antisymmetric part of ``m``."""
    return 0.5 * np.stack([
        m[..., 2, 1] - m[..., 1, 2],
        m[..., 0, 2] - m[..., 2, 0],
        m[..., 1, 0] - m[..., 0, 1],
    ], -1)


def rotation_angle(R):
    """Angle of rotation matrices in [0, pi]; accurate near 0 and near pi."""
    R = np.asarray(R, dtype=float)
    s = np.linalg.norm(vee(R), axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    return np.arctan2(s, c)


def relative_angle(Ra, Rb):
    """Angle of ``Ra @ Rb.T``, i.e. the rotation taking frame b to frame a."""
    return rotation_angle(np.einsum("...ij,...kj->...ik", Ra, Rb))


def rotvec_to_matrix(v):
    return Rotation.from_rotvec(np.asarray(v, dtype=float)).as_matrix()


def matrix_to_rotvec(R):
    return Rotation.from_matrix(np.asarray(R, dtype=float)).as_rotvec()


def orientation_error(R_target, R):
    """Rotation vector ``w`` such that ``exp(w) @ R == R_target`` (world frame)."""
    return matrix_to_rotvec(np.einsum("...ij,...kj->...ik", R_target, R))


def normalize_rotvec(v):
    """Re-express an axis-angle vector with its angle in [0, pi]."""
    return matrix_to_rotvec(rotvec_to_matrix(v))


@dataclass(frozen=True)
class Pose:
    """Frame pose: position in metres, orientation as an axis-angle vector.

    The orientation is normalised on construction so that its magnitude lies
    in [0, pi].
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        o = normalize_rotvec(np.array(self.orientation, dtype=float).reshape(3))
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", o)

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, 3], matrix_to_rotvec(T[:3, :3]))

    @classmethod
    def from_rt(cls, R, p) -> "Pose":
        return cls(p, matrix_to_rotvec(R))

    @property
    def rotation(self) -> np.ndarray:
        return rotvec_to_matrix(self.orientation)

    @property
    def angle(self) -> float:
        return float(np.linalg.norm(self.orientation))

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.position
        return T

    def compose(self, other: "Pose") -> "Pose":
        """``self * other``: ``other`` is expressed in this frame."""
        return Pose.from_matrix(self.matrix() @ other.matrix())

    def inverse(self) -> "Pose":
        R = self.rotation
        return Pose.from_rt(R.T, -R.T @ self.position)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.orientation])


def pose_distance(a: Pose, b: Pose) -> tuple[float, float]:
    """(translation distance, relative rotation angle) between two poses."""
    return (float(np.linalg.norm(a.position - b.position)),
            float(relative_angle(a.rotation, b.rotation)))

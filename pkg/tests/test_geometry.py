import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from limbsafe.geometry import (Pose, matrix_to_rotvec, orientation_error, pose_distance, relative_angle, rot_x,
                               rot_y, rot_z, rotation_angle, rotvec_to_matrix, skew, vee)

vec3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)


@pytest.mark.parametrize("fn,axis", [(rot_x, "x"), (rot_y, "y"), (rot_z, "z")])
def test_elementary_rotations_match_scipy(fn, axis):
    for a in (-2.0, -0.3, 0.0, 1.1, np.pi):
        assert np.allclose(fn(a), Rotation.from_euler(axis, a).as_matrix(), atol=1e-15)


def test_batched_rotations_have_leading_axis():
    R = rot_z(np.linspace(0, 1, 4))
    assert R.shape == (4, 3, 3)
    assert np.allclose(R[2], rot_z(2 / 3))


def test_skew_vee_round_trip():
    v = np.array([0.3, -1.2, 2.0])
    assert np.allclose(skew(v) @ np.array([1.0, 2.0, 3.0]), np.cross(v, [1.0, 2.0, 3.0]))
    assert np.allclose(vee(skew(v)), v)


def test_rotation_angle_near_zero_and_pi():
    assert rotation_angle(np.eye(3)) == 0.0
    assert rotation_angle(rotvec_to_matrix([1e-9, 0, 0])) == pytest.approx(1e-9, rel=1e-6)
    assert rotation_angle(rot_x(np.pi)) == pytest.approx(np.pi, abs=1e-12)
    assert rotation_angle(rot_y(np.pi - 1e-7)) == pytest.approx(np.pi - 1e-7, abs=1e-12)


def test_relative_angle_of_composed_rotation():
    R = rotvec_to_matrix([0.2, -0.4, 0.1])
    dR = rotvec_to_matrix(0.5 * np.array([0.0, 0.6, 0.8]))
    assert relative_angle(dR @ R, R) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(vec3)
def test_pose_orientation_normalised(v):
    p = Pose([0, 0, 0], v)
    assert np.linalg.norm(p.orientation) <= np.pi + 1e-12
    assert np.allclose(p.rotation, Rotation.from_rotvec(v).as_matrix(), atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(vec3, vec3, vec3, vec3)
def test_compose_inverse_is_identity(p1, o1, p2, o2):
    a, b = Pose(p1, o1), Pose(p2, o2)
    c = a.compose(b).compose(b.inverse())
    d_pos, d_ang = pose_distance(a, c)
    assert d_pos < 1e-9 and d_ang < 1e-9
    assert np.linalg.norm(a.compose(b).orientation) <= np.pi + 1e-12


def test_orientation_error_is_world_frame_rotvec():
    R = rotvec_to_matrix([0.1, 0.2, 0.3])
    w = np.array([0.05, -0.02, 0.01])
    target = rotvec_to_matrix(w) @ R
    assert np.allclose(orientation_error(target, R), w, atol=1e-12)


def test_matrix_rotvec_round_trip():
    v = np.array([0.4, -0.1, 1.3])
    assert np.allclose(matrix_to_rotvec(rotvec_to_matrix(v)), v)


def test_pose_from_matrix_round_trip():
    p = Pose([1.0, 2.0, 3.0], [0.0, 0.0, 4.0])
    q = Pose.from_matrix(p.matrix())
    assert np.allclose(q.as_vector(), p.as_vector())
    assert p.angle == pytest.approx(2 * np.pi - 4.0)

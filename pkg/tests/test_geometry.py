import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from webteleop.geometry import (Pose, normalize_angle, quat_angle, quat_conjugate,
                                quat_from_axis_angle, quat_from_matrix, quat_multiply,
                                quat_normalize, quat_rotate, quat_to_matrix,
                                rotvec_from_quat)

finite = st.floats(-1e3, 1e3, allow_nan=False)
quat_raw = st.tuples(*(st.floats(-1, 1) for _ in range(4))).filter(
    lambda q: sum(v * v for v in q) > 1e-6)


@given(st.floats(-50, 50))
def test_normalize_angle_range(theta):
    r = normalize_angle(theta)
    assert -math.pi < r <= math.pi
    assert math.isclose(math.sin(r), math.sin(theta), abs_tol=1e-9)
    assert math.isclose(math.cos(r), math.cos(theta), abs_tol=1e-9)


def test_normalize_angle_keeps_pi():
    assert normalize_angle(math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)


@given(quat_raw)
def test_quat_normalize_unit(q):
    assert np.linalg.norm(quat_normalize(q)) == pytest.approx(1.0, abs=1e-12)


@given(quat_raw, st.tuples(finite, finite, finite))
def test_quat_rotate_matches_matrix(q, v):
    q = quat_normalize(q)
    expected = quat_to_matrix(q) @ np.asarray(v)
    np.testing.assert_allclose(quat_rotate(q, v), expected, atol=1e-9)


@given(quat_raw)
def test_quat_matrix_round_trip(q):
    q = quat_normalize(q)
    q2 = quat_from_matrix(quat_to_matrix(q))
    assert quat_angle(q, q2) < 1e-7


@given(st.tuples(finite, finite, finite).filter(lambda a: sum(x * x for x in a) > 1e-3),
       st.floats(-3.0, 3.0))
def test_axis_angle_round_trip(axis, angle):
    q = quat_from_axis_angle(axis, angle)
    rv = rotvec_from_quat(q)
    axis = np.asarray(axis) / np.linalg.norm(axis)
    expected = axis * angle
    # log map returns the shortest equivalent rotation
    if abs(angle) <= math.pi:
        np.testing.assert_allclose(rv, expected, atol=1e-7)
    assert quat_angle(q, quat_from_axis_angle(rv, np.linalg.norm(rv)) if np.linalg.norm(rv) > 0
                      else np.array([0, 0, 0, 1.0])) < 1e-7


@given(quat_raw, quat_raw)
def test_quat_multiply_conjugate_inverse(a, b):
    a, b = quat_normalize(a), quat_normalize(b)
    ab = quat_multiply(a, b)
    back = quat_multiply(quat_conjugate(a), ab)
    assert quat_angle(back, b) < 1e-7


def test_pose_norm_invariant_enforced():
    with pytest.raises(ValueError):
        Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.1]))


@given(st.tuples(finite, finite, finite), quat_raw, st.tuples(finite, finite, finite))
def test_pose_compose_inverse(t, q, p):
    pose = Pose.make(t, q)
    round_tripped = pose.inverse_transform_point(pose.transform_point(p))
    np.testing.assert_allclose(round_tripped, p, atol=1e-6)
    ident = pose.compose(pose.inverse())
    np.testing.assert_allclose(ident.position, np.zeros(3), atol=1e-6)

"""Quaternion and rigid-transform helpers shared by every subsystem.

Conventions: quaternions are numpy arrays ``[x, y, z, w]``, frames are
right-handed with z up in the world and robot base frames, angles in
radians. Everything here is a pure function over value types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    r = theta % TWO_PI
    if r > math.pi:
        r -= TWO_PI
    return r


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0:
        raise ValueError("zero quaternion")
    return q / n


def quat_multiply(a, b) -> np.ndarray:
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array([
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ])


def quat_conjugate(q) -> np.ndarray:
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion."""
    qx, qy, qz, qw = float(q[0]), float(q[1]), float(q[2]), float(q[3])
    vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
    # t = 2 * q_vec x v, then v + qw * t + q_vec x t, expanded for speed
    tx = 2.0 * (qy * vz - qz * vy)
    ty = 2.0 * (qz * vx - qx * vz)
    tz = 2.0 * (qx * vy - qy * vx)
    return np.array([
        vx + qw * tx + qy * tz - qz * ty,
        vy + qw * ty + qz * tx - qx * tz,
        vz + qw * tz + qx * ty - qy * tx,
    ])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = math.sqrt(float(axis @ axis))
    if n == 0.0:
        raise ValueError("zero axis")
    half = 0.5 * angle
    s = math.sin(half) / n
    return np.array([axis[0] * s, axis[1] * s, axis[2] * s, math.cos(half)])


def quat_to_matrix(q) -> np.ndarray:
    x, y, z, w = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    t = np.trace(m)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        return quat_normalize([
            (m[2, 1] - m[1, 2]) / s,
            (m[0, 2] - m[2, 0]) / s,
            (m[1, 0] - m[0, 1]) / s,
            0.25 * s,
        ])
    i = int(np.argmax(np.diag(m)))
    j, k = (i + 1) % 3, (i + 2) % 3
    s = math.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2.0
    q = np.empty(4)
    q[i] = 0.25 * s
    q[j] = (m[j, i] + m[i, j]) / s
    q[k] = (m[k, i] + m[i, k]) / s
    q[3] = (m[k, j] - m[j, k]) / s
    return quat_normalize(q)


def rotvec_from_quat(q) -> np.ndarray:
    """Axis * angle (log map) of a unit quaternion, shortest rotation."""
    q = np.asarray(q, dtype=float)
    if q[3] < 0:
        q = -q
    sin_half = math.sqrt(float(q[0] ** 2 + q[1] ** 2 + q[2] ** 2))
    if sin_half < 1e-12:
        return 2.0 * q[:3]
    angle = 2.0 * math.atan2(sin_half, q[3])
    return q[:3] * (angle / sin_half)


def quat_angle(a, b) -> float:
    """Magnitude of the rotation taking orientation a to b."""
    d = abs(float(np.dot(a, b)))
    return 2.0 * math.acos(min(1.0, d))


@dataclass(frozen=True)
class Pose:
    """Rigid pose: position (m) and unit quaternion orientation.

    The constructor enforces the unit-norm invariant to 1e-9; use
    :meth:`make` to normalize unchecked inputs.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        q = np.asarray(self.orientation, dtype=float)
        if abs(math.sqrt(float(q @ q)) - 1.0) > 1e-9:
            raise ValueError("quaternion norm deviates from 1 by more than 1e-9")
        object.__setattr__(self, "orientation", q)

    @staticmethod
    def make(position, orientation) -> "Pose":
        return Pose(np.asarray(position, dtype=float), quat_normalize(orientation))

    @staticmethod
    def from_xyz(x: float, y: float, z: float) -> "Pose":
        return Pose(np.array([x, y, z]), IDENTITY_QUAT.copy())

    def compose(self, other: "Pose") -> "Pose":
        """self * other (apply other in self's frame)."""
        return Pose(
            self.position + quat_rotate(self.orientation, other.position),
            quat_normalize(quat_multiply(self.orientation, other.orientation)),
        )

    def inverse(self) -> "Pose":
        inv_q = quat_conjugate(self.orientation)
        return Pose(-quat_rotate(inv_q, self.position), inv_q)

    def transform_point(self, p) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, p)

    def inverse_transform_point(self, p) -> np.ndarray:
        return quat_rotate(quat_conjugate(self.orientation), np.asarray(p, dtype=float) - self.position)

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def to_dict(self) -> dict:
        return {"xyz": [float(v) for v in self.position],
                "quat": [float(v) for v in self.orientation]}

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose.make(d["xyz"], d["quat"])


def pose_close(a: Pose, b: Pose, tol_pos: float = 1e-9, tol_rot: float = 1e-9) -> bool:
    return (float(np.linalg.norm(a.position - b.position)) <= tol_pos
            and quat_angle(a.orientation, b.orientation) <= tol_rot)

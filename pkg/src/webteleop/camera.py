"""Pinhole camera math: projection, off-screen direction indicators, and
click-to-world ray casting against the ground plane.

``head_pose`` arguments are the tilt-frame pose (see
:func:`webteleop.kinematics.head_frame`); the camera's own mount transform is
applied here, so points and returned rays share whatever frame the head pose
was expressed in (base or world).
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .description import CameraModel
from .geometry import Pose


class NoGroundPoint(ValueError):
    """Back-projected ray does not meet the ground plane in front of the camera."""


class Offscreen(Enum):
    """8-way edge/corner indicator for out-of-view points."""

    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"
    TOP_LEFT = "top-left"
    TOP_RIGHT = "top-right"
    BOTTOM_LEFT = "bottom-left"
    BOTTOM_RIGHT = "bottom-right"


_SECTORS = [Offscreen.RIGHT, Offscreen.BOTTOM_RIGHT, Offscreen.BOTTOM,
            Offscreen.BOTTOM_LEFT, Offscreen.LEFT, Offscreen.TOP_LEFT,
            Offscreen.TOP, Offscreen.TOP_RIGHT]


def _direction_8way(dx: float, dy: float) -> Offscreen:
    # image-plane direction, x right, y down; 45-degree sectors
    ang = math.atan2(dy, dx)
    idx = int(math.floor((ang + math.pi / 8.0) / (math.pi / 4.0))) % 8
    return _SECTORS[idx]


def optical_pose(camera: CameraModel, head_pose: Pose) -> Pose:
    return head_pose.compose(camera.mount)


def project_to_pixel(camera: CameraModel, head_pose: Pose, point):
    """Project a 3D point; returns an (u, v) tuple inside the image or an
    :class:`Offscreen` direction. Off-screen is a valued outcome, not an error.
    """
    cam = optical_pose(camera, head_pose)
    p = cam.inverse_transform_point(point)
    x, y, z = float(p[0]), float(p[1]), float(p[2])
    if z <= 1e-9:
        return _direction_8way(x, y)
    u = camera.fx * x / z + camera.cx
    v = camera.fy * y / z + camera.cy
    if 0.0 <= u <= camera.width - 1 and 0.0 <= v <= camera.height - 1:
        return (u, v)
    return _direction_8way(u - camera.cx, v - camera.cy)


def pixel_ray(camera: CameraModel, head_pose: Pose, pixel):
    """World-space ray (origin, unit direction) through a pixel."""
    u, v = float(pixel[0]), float(pixel[1])
    cam = optical_pose(camera, head_pose)
    d_cam = np.array([(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0])
    d = cam.rotation_matrix() @ d_cam
    return cam.position, d / np.linalg.norm(d)


def pixel_to_ground(camera: CameraModel, head_pose: Pose, pixel) -> np.ndarray:
    """Intersection of the back-projected pixel ray with the z = 0 plane.

    The pixel must lie inside the image. Raises NoGroundPoint when the ray
    is parallel to the plane or points away from it.
    """
    u, v = float(pixel[0]), float(pixel[1])
    if not (0.0 <= u <= camera.width - 1 and 0.0 <= v <= camera.height - 1):
        raise ValueError(f"pixel ({u}, {v}) outside the {camera.width}x{camera.height} image")
    origin, d = pixel_ray(camera, head_pose, pixel)
    if abs(d[2]) < 1e-12:
        raise NoGroundPoint("ray parallel to the ground plane")
    s = -origin[2] / d[2]
    if s <= 0.0:
        raise NoGroundPoint("ray points away from the ground plane")
    hit = origin + s * d
    return np.array([hit[0], hit[1], 0.0])

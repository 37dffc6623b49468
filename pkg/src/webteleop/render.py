"""Offline rendering of logged frame records to 960x540 images.

Frames store the camera pose and object poses, not pixels; this module
re-renders them by ray casting the scene shapes (taken from the scene
config named in the log header) through the scaled head-camera model.
"""

from __future__ import annotations

import numpy as np

from .description import RobotDescription
from .geometry import Pose
from .raycast import RayScene, ScenePrim
from .scene import load_scene_config

RENDER_W, RENDER_H = 960, 540
_LIGHT = np.array([0.35, 0.25, 0.9])
_SKY = np.array([0.75, 0.82, 0.92])


def _scene_prims(scene_cfg, object_poses: dict) -> list:
    prims = []
    for obj in scene_cfg.objects.values():
        pose_d = object_poses.get(obj.obj_id)
        pose = Pose.from_dict(pose_d) if pose_d else obj.pose
        if obj.shape == "composite":
            for part in obj.parts:
                prims.append(ScenePrim(obj.obj_id, pose.compose(part.offset),
                                       part.shape, part.dims, obj.color))
        else:
            prims.append(ScenePrim(obj.obj_id, pose, obj.shape, obj.dims, obj.color))
    return prims


def render_frame(frame_record: dict, desc: RobotDescription, scene_name: str,
                 width: int = RENDER_W, height: int = RENDER_H) -> np.ndarray:
    """One frame record -> (height, width, 3) uint8 image."""
    cam = desc.cameras["rgb"]
    sx, sy = width / cam.width, height / cam.height
    fx, fy = cam.fx * sx, cam.fy * sy
    cx, cy = cam.cx * sx, cam.cy * sy
    pose = Pose.from_dict(frame_record["camera"])
    scene_cfg = load_scene_config(scene_name)
    scene = RayScene(_scene_prims(scene_cfg, frame_record.get("objects", {})))
    us, vs = np.meshgrid(np.arange(width, dtype=float) + 0.5,
                         np.arange(height, dtype=float) + 0.5)
    d_cam = np.stack([(us.ravel() - cx) / fx, (vs.ravel() - cy) / fy,
                      np.ones(us.size)], axis=1)
    r = pose.rotation_matrix()
    dirs = d_cam @ r.T
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.broadcast_to(pose.position, dirs.shape)
    t, idx, pts, normals, colors = scene.cast(origins, dirs)
    hit = np.isfinite(t)
    light = _LIGHT / np.linalg.norm(_LIGHT)
    lambert = 0.45 + 0.55 * np.clip(normals @ light, 0.0, 1.0)[:, None]
    shaded = np.where(hit[:, None], colors * lambert, _SKY)
    # simple distance haze keeps the floor from banding
    with np.errstate(invalid="ignore"):
        haze = np.clip(np.where(hit, t, 0.0) / 12.0, 0.0, 0.6)[:, None]
    shaded = shaded * (1 - haze) + _SKY * haze
    img = (np.clip(shaded, 0, 1) * 255).astype(np.uint8)
    return img.reshape(height, width, 3)


def save_png(img: np.ndarray, path) -> None:
    from PIL import Image
    Image.fromarray(img, mode="RGB").save(path)

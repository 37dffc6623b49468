"""Scene configuration: task objects, anchor points, and the robot start
pose, loaded from structured YAML files.

A scene lists quasi-static objects (boxes, cylinders, spheres, composites),
named anchor points (shelf top, mouth center, head-touch targets), and the
base start pose. The ARAT item objects are not part of the static scene;
the assessment harness spawns them one at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .geometry import Pose, quat_from_axis_angle
from .kinematics import BasePose


class SceneError(ValueError):
    """Malformed scene config; message carries the file/field location."""


@dataclass
class ObjectPart:
    shape: str
    dims: list
    offset: Pose


@dataclass
class WorldObject:
    obj_id: str
    shape: str                      # box | cylinder | sphere | composite
    dims: list
    pose: Pose
    mass: str = "fixed"             # liftable | fixed
    grasp_width: float | None = None
    attachment: np.ndarray | None = None   # local offset, e.g. a straw tip
    color: tuple = (0.6, 0.6, 0.6)
    parts: list = field(default_factory=list)

    def max_dim(self) -> float:
        if self.shape == "composite":
            return max(max(p.dims) + 2 * float(np.linalg.norm(p.offset.position))
                       for p in self.parts)
        return max(self.dims)

    def bound_radius(self) -> float:
        from .raycast import shape_bound_radius
        if self.shape == "composite":
            return max(float(np.linalg.norm(p.offset.position))
                       + shape_bound_radius(p.shape, p.dims) for p in self.parts)
        return shape_bound_radius(self.shape, self.dims)

    def min_dim(self) -> float:
        if self.shape == "composite":
            return min(min(p.dims) for p in self.parts)
        return min(self.dims)

    def bottom_offset(self) -> float:
        """Distance from the object origin down to its support plane (upright)."""
        if self.shape == "box":
            return self.dims[2] / 2.0
        if self.shape == "cylinder":
            return self.dims[1] / 2.0
        if self.shape == "sphere":
            return self.dims[0] / 2.0
        lows = []
        for p in self.parts:
            local_low = {"box": p.dims[2] / 2.0, "cylinder": p.dims[1] / 2.0,
                         "sphere": p.dims[0] / 2.0}[p.shape]
            lows.append(local_low - p.offset.position[2])
        return max(lows)

    def support_top(self, x: float, y: float) -> float | None:
        """Top-surface height under (x, y), or None when not underneath.

        Only box and cylinder tops can support other objects.
        """
        if self.shape not in ("box", "cylinder"):
            return None
        local = self.pose.inverse_transform_point([x, y, self.pose.position[2]])
        if self.shape == "box":
            if abs(local[0]) <= self.dims[0] / 2.0 and abs(local[1]) <= self.dims[1] / 2.0:
                return self.pose.position[2] + self.dims[2] / 2.0
            return None
        if math.hypot(local[0], local[1]) <= self.dims[0] / 2.0:
            return self.pose.position[2] + self.dims[1] / 2.0
        return None

    def attachment_point_world(self) -> np.ndarray | None:
        if self.attachment is None:
            return None
        return self.pose.transform_point(self.attachment)


@dataclass
class SceneConfig:
    name: str
    robot_start: BasePose
    objects: dict                    # id -> WorldObject
    anchors: dict                    # name -> np.ndarray


def _pose_from_cfg(cfg: dict, where: str) -> Pose:
    try:
        xyz = [float(v) for v in cfg["xyz"]]
    except (KeyError, TypeError, ValueError) as e:
        raise SceneError(f"{where}.pose: {e}") from e
    yaw = float(cfg.get("yaw", 0.0))
    return Pose(np.asarray(xyz), quat_from_axis_angle([0, 0, 1], yaw))


def object_from_cfg(cfg: dict, where: str) -> WorldObject:
    try:
        obj_id = cfg["id"]
        shape = cfg["shape"]
        mass = cfg.get("mass", "fixed")
    except KeyError as e:
        raise SceneError(f"{where}: missing {e}") from e
    if shape not in ("box", "cylinder", "sphere", "composite"):
        raise SceneError(f"{where}.shape: unknown shape {shape!r}")
    if mass not in ("liftable", "fixed"):
        raise SceneError(f"{where}.mass: must be liftable or fixed")
    parts = []
    if shape == "composite":
        for i, p in enumerate(cfg.get("parts", [])):
            offset = Pose.from_xyz(*[float(v) for v in p.get("offset", [0, 0, 0])])
            parts.append(ObjectPart(p["shape"], [float(v) for v in p["dims"]], offset))
        if not parts:
            raise SceneError(f"{where}.parts: composite needs at least one part")
        dims = [0.0]
    else:
        dims = [float(v) for v in cfg.get("dims", [])]
        expected = {"box": 3, "cylinder": 2, "sphere": 1}[shape]
        if len(dims) != expected:
            raise SceneError(f"{where}.dims: {shape} needs {expected} entries")
        if any(d <= 0 for d in dims):
            raise SceneError(f"{where}.dims: must be > 0")
    for i, p in enumerate(parts):
        if any(d <= 0 for d in p.dims):
            raise SceneError(f"{where}.parts[{i}].dims: must be > 0")
    obj = WorldObject(
        obj_id=obj_id,
        shape=shape,
        dims=dims,
        pose=_pose_from_cfg(cfg.get("pose", {"xyz": [0, 0, 0]}), where),
        mass=mass,
        grasp_width=float(cfg["grasp_width"]) if "grasp_width" in cfg else None,
        attachment=np.asarray(cfg["attachment"], dtype=float) if "attachment" in cfg else None,
        color=tuple(cfg.get("color", (0.6, 0.6, 0.6))),
        parts=parts,
    )
    if obj.grasp_width is not None and obj.grasp_width > obj.max_dim() + 1e-9:
        raise SceneError(f"{where}.grasp_width: exceeds the largest dimension")
    return obj


def scenes_dir() -> Path:
    return Path(resources.files("webteleop").joinpath("data/scenes"))  # type: ignore[arg-type]


def load_scene_config(name_or_path) -> SceneConfig:
    path = Path(name_or_path)
    if not path.suffix:
        path = scenes_dir() / f"{path.name}.yaml"
    if not path.exists():
        raise SceneError(f"scene config not found: {path}")
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        loc = f" (line {mark.line + 1})" if mark else ""
        raise SceneError(f"{path}{loc}: {e}") from e
    if not isinstance(cfg, dict):
        raise SceneError(f"{path}: top level must be a mapping")
    rs = cfg.get("robot_start", {})
    start = BasePose(float(rs.get("x", 0.0)), float(rs.get("y", 0.0)),
                     float(rs.get("theta", 0.0)))
    objects = {}
    for i, oc in enumerate(cfg.get("objects") or []):
        obj = object_from_cfg(oc, f"objects[{i}]")
        if obj.obj_id in objects:
            raise SceneError(f"objects[{i}].id: duplicate id {obj.obj_id!r}")
        objects[obj.obj_id] = obj
    anchors = {k: np.asarray(v, dtype=float)
               for k, v in (cfg.get("anchors") or {}).items()}
    return SceneConfig(name=str(cfg.get("name", path.stem)), robot_start=start,
                       objects=objects, anchors=anchors)

"""Robot description: typed view of robot.yaml.

The description file is the single source of truth for link geometry, joint
limits, camera intrinsics, skin patch placement, and speed caps. Both the
simulator and the browser client derive their constants from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .geometry import Pose

ARM_SIDES = ("left", "right")


class DescriptionError(ValueError):
    """Malformed robot description; message carries the offending field."""


@dataclass(frozen=True)
class ArmJoint:
    name: str
    origin: np.ndarray      # translation from previous joint frame
    axis: np.ndarray        # unit rotation axis in this joint's frame
    lo: float
    hi: float


@dataclass(frozen=True)
class ArmModel:
    """A 7-revolute-joint chain from shoulder mount to gripper frame."""

    side: str
    mount: Pose             # lift frame -> first joint frame
    joints: tuple           # 7 ArmJoint
    tool: Pose              # last joint frame -> gripper frame
    fingertip_offset: float # along gripper x, strictly positive
    nominal: np.ndarray     # preferred posture for the IK null space
    joint_speed: float
    cartesian_speed: float

    def __post_init__(self):
        if len(self.joints) != 7:
            raise DescriptionError(f"arms.joints: expected 7 joints, got {len(self.joints)}")
        if self.fingertip_offset <= 0:
            raise DescriptionError("arms.fingertip_offset: must be > 0")

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.lo for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.hi for j in self.joints])

    @property
    def reach(self) -> float:
        """Upper bound on gripper distance from the first joint."""
        r = sum(float(np.linalg.norm(j.origin)) for j in self.joints[1:])
        return r + float(np.linalg.norm(self.tool.position))


@dataclass(frozen=True)
class HeadModel:
    offset: np.ndarray      # pan joint origin on the lift frame
    pan_limits: tuple
    tilt_limits: tuple
    speed: float


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: z forward, x right, y down in the optical frame."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    mount: Pose             # head (tilt) frame -> optical frame

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise DescriptionError("camera: focal lengths must be > 0")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise DescriptionError("camera: principal point outside image")


@dataclass(frozen=True)
class GripperModel:
    aperture_max: float
    speed: float
    capture_radius: float
    contact_overlap: float


@dataclass(frozen=True)
class SkinPatchDef:
    """Capsule-shaped tactile patch: a segment with a radius in link frame.

    Arm patches run along the link x axis; the base patch is a vertical
    segment at the base center whose radius is the base footprint radius.
    """

    patch_id: str
    link: str               # forearm-L/R, upper-arm-L/R, base
    kind: str               # arm | base
    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        if (self.kind == "base") != (self.link == "base"):
            raise DescriptionError(f"skin.{self.patch_id}: base kind iff base link")


@dataclass(frozen=True)
class Speeds:
    drive_vmax: float
    turn_wmax: float
    drive_gain: float
    deadman_s: float


@dataclass(frozen=True)
class IkParams:
    damping: float
    max_iters: int
    tol_pos: float
    tol_rot: float          # radians
    nullspace_gain: float
    max_joint_step: float


@dataclass(frozen=True)
class RobotDescription:
    name: str
    base_radius: float
    base_height: float
    torso_base_height: float
    torso_travel: float
    torso_speed: float
    head: HeadModel
    cameras: dict           # {"rgb": CameraModel, "depth": CameraModel}
    arms: dict              # {"left": ArmModel, "right": ArmModel}
    gripper: GripperModel
    skin: tuple
    speeds: Speeds
    ik: IkParams
    floor_margin: float

    def arm(self, side: str) -> ArmModel:
        if side not in ARM_SIDES:
            raise KeyError(f"unknown arm side {side!r}")
        return self.arms[side]


# Optical convention: head x-forward maps to camera z-forward,
# head -y to camera x (right), head -z to camera y (down).
OPTICAL_ROTATION = np.array([0.5, -0.5, 0.5, -0.5])


def _camera_from_cfg(key: str, cfg: dict) -> CameraModel:
    try:
        w, h = int(cfg["width"]), int(cfg["height"])
        hfov = math.radians(float(cfg["hfov_deg"]))
        mount_x = float(cfg.get("mount_x", 0.0))
    except (KeyError, TypeError, ValueError) as e:
        raise DescriptionError(f"cameras.{key}: {e}") from e
    fx = (w / 2.0) / math.tan(hfov / 2.0)
    mount = Pose.make([mount_x, 0.0, 0.0], OPTICAL_ROTATION)
    return CameraModel(width=w, height=h, fx=fx, fy=fx, cx=w / 2.0, cy=h / 2.0, mount=mount)


def _arm_from_cfg(side: str, cfg: dict) -> ArmModel:
    sign = 1.0 if side == "left" else -1.0
    joints = []
    for i, j in enumerate(cfg["joints"]):
        try:
            axis = np.asarray(j["axis"], dtype=float)
            axis = axis / np.linalg.norm(axis)
            lo, hi = float(j["limits"][0]), float(j["limits"][1])
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise DescriptionError(f"arms.joints[{i}]: {e}") from e
        if lo >= hi:
            raise DescriptionError(f"arms.joints[{i}].limits: lo >= hi")
        joints.append(ArmJoint(j["name"], np.asarray(j["origin"], dtype=float), axis, lo, hi))
    mount = Pose.from_xyz(0.0, sign * float(cfg["shoulder_offset_y"]), 0.0)
    return ArmModel(
        side=side,
        mount=mount,
        joints=tuple(joints),
        tool=Pose.from_xyz(*[float(v) for v in cfg["tool"]]),
        fingertip_offset=float(cfg["fingertip_offset"]),
        nominal=np.asarray(cfg["nominal"], dtype=float),
        joint_speed=float(cfg["joint_speed"]),
        cartesian_speed=float(cfg["cartesian_speed"]),
    )


def default_description_path() -> Path:
    return Path(resources.files("webteleop").joinpath("data/robot.yaml"))  # type: ignore[arg-type]


def load_robot_description(path=None) -> RobotDescription:
    path = Path(path) if path is not None else default_description_path()
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise DescriptionError(f"{path}: {e}") from e
    if not isinstance(cfg, dict):
        raise DescriptionError(f"{path}: top level must be a mapping")

    def section(key) -> dict:
        if key not in cfg:
            raise DescriptionError(f"missing section {key!r}")
        return cfg[key]

    base, torso, head, ws = section("base"), section("torso"), section("head"), section("workspace")
    cameras = {k: _camera_from_cfg(k, v) for k, v in section("cameras").items()}
    if "rgb" not in cameras or "depth" not in cameras:
        raise DescriptionError("cameras: need both rgb and depth entries")
    arms = {side: _arm_from_cfg(side, section("arms")) for side in ARM_SIDES}

    grip = section("gripper")
    patches = []
    for p in cfg.get("skin", []):
        kind = p["kind"]
        if kind == "base":
            p0 = np.array([0.0, 0.0, float(p["z0"])])
            p1 = np.array([0.0, 0.0, float(p["z1"])])
            radius = float(base["radius"])
        else:
            p0 = np.asarray(p["p0"], dtype=float)
            p1 = np.asarray(p["p1"], dtype=float)
            radius = float(p["radius"])
        patches.append(SkinPatchDef(p["id"], p["link"], kind, p0, p1, radius))

    spd = section("speeds")
    ik = section("ik")
    return RobotDescription(
        name=str(cfg.get("name", "robot")),
        base_radius=float(base["radius"]),
        base_height=float(base["height"]),
        torso_base_height=float(torso["base_height"]),
        torso_travel=float(torso["travel"]),
        torso_speed=float(torso["speed"]),
        head=HeadModel(
            offset=np.asarray(head["offset"], dtype=float),
            pan_limits=(float(head["pan_limits"][0]), float(head["pan_limits"][1])),
            tilt_limits=(float(head["tilt_limits"][0]), float(head["tilt_limits"][1])),
            speed=float(head["speed"]),
        ),
        cameras=cameras,
        arms=arms,
        gripper=GripperModel(
            aperture_max=float(grip["aperture_max"]),
            speed=float(grip["speed"]),
            capture_radius=float(grip["capture_radius"]),
            contact_overlap=float(grip["contact_overlap"]),
        ),
        skin=tuple(patches),
        speeds=Speeds(
            drive_vmax=float(spd["drive_vmax"]),
            turn_wmax=float(spd["turn_wmax"]),
            drive_gain=float(spd["drive_gain"]),
            deadman_s=float(spd["deadman_s"]),
        ),
        ik=IkParams(
            damping=float(ik["damping"]),
            max_iters=int(ik["max_iters"]),
            tol_pos=float(ik["tol_pos"]),
            tol_rot=math.radians(float(ik["tol_rot_deg"])),
            nullspace_gain=float(ik["nullspace_gain"]),
            max_joint_step=float(ik["max_joint_step"]),
        ),
        floor_margin=float(ws["floor_margin"]),
    )

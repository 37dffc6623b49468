"""Quasi-static simulated world: robot state integration under velocity
caps, tactile contact generation on skin patches, grasp attachment,
vertical settling, depth sampling, diagnostics, and the run-stop.

The world is owned by a single simulation loop; everything here mutates
only inside :meth:`World.step` or the explicitly-named operations. Readers
get immutable snapshots via :meth:`public_state`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .description import RobotDescription, SkinPatchDef
from .geometry import Pose, quat_from_axis_angle
from .kinematics import BasePose, JointVector, forward_kinematics, home_joints, link_frame
from .raycast import RayScene, ScenePrim, closest_surface_points_batch
from .scene import SceneConfig, WorldObject

ARM_SUBSYS = {"left": "arm-L", "right": "arm-R"}
GRIP_SUBSYS = {"left": "gripper-L", "right": "gripper-R"}


@dataclass
class ContactEvent:
    patch_id: str
    object_id: str
    kind: str                  # arm | base
    location_link: np.ndarray
    location_world: np.ndarray
    timestamp: float
    phase: str                 # onset | ongoing | released

    def to_dict(self) -> dict:
        return {
            "patch": self.patch_id, "object": self.object_id, "kind": self.kind,
            "link_xyz": [float(v) for v in self.location_link],
            "world_xyz": [float(v) for v in self.location_world],
            "t": self.timestamp, "phase": self.phase,
        }


@dataclass
class DiagnosticsState:
    battery: float = 1.0
    charging: bool = False
    run_stop: bool = False
    calibration_ok: bool = True
    sim_time: float = 0.0

    def to_dict(self) -> dict:
        return {"battery": self.battery, "charging": self.charging,
                "run_stop": self.run_stop, "calibration_ok": self.calibration_ok,
                "sim_time": self.sim_time}


@dataclass
class Attachment:
    object_id: str
    grasp: Pose                # gripper frame -> object frame


@dataclass
class ArmPlan:
    q_start: np.ndarray
    q_target: np.ndarray
    t0: float
    duration: float


@dataclass
class BaseIntent:
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))  # world m/s
    yaw_rate: float = 0.0
    deadline: float = -1.0     # sim time after which the deadman zeroes motion


@dataclass
class Actuation:
    """Targets written by the controllers, integrated by the world."""

    arm_plans: dict = field(default_factory=dict)       # side -> ArmPlan
    torso_target: float | None = None
    head_target: tuple | None = None                    # (pan, tilt)
    grip_targets: dict = field(default_factory=dict)    # side -> float
    grasp_requests: set = field(default_factory=set)    # sides closing to grasp
    base: BaseIntent = field(default_factory=BaseIntent)

    def clear_motion(self):
        self.arm_plans.clear()
        self.torso_target = None
        self.head_target = None
        self.grip_targets.clear()
        self.grasp_requests.clear()
        self.base = BaseIntent()


@dataclass
class GraspResult:
    outcome: str               # grasped | no-object | too-wide
    object_id: str | None = None
    aperture: float = 0.0


@dataclass
class StepResult:
    arrivals: list = field(default_factory=list)        # subsystem keys
    grasp_results: dict = field(default_factory=dict)   # side -> GraspResult
    contact_events: list = field(default_factory=list)  # onset/released edges


def _surface_query_batch(obj: WorldObject, pts_world: np.ndarray):
    """Vectorized over query points: (closest world points Nx3, signed dists N)."""
    shapes = ([(part.shape, part.dims, obj.pose.compose(part.offset)) for part in obj.parts]
              if obj.shape == "composite" else [(obj.shape, obj.dims, obj.pose)])
    best_pts = None
    best_d = None
    for shape, dims, pose in shapes:
        r = pose.rotation_matrix()
        local = (pts_world - pose.position) @ r
        c_local, signed = closest_surface_points_batch(shape, dims, local)
        c_world = c_local @ r.T + pose.position
        if best_d is None:
            best_pts, best_d = c_world, signed
        else:
            closer = signed < best_d
            best_pts = np.where(closer[:, None], c_world, best_pts)
            best_d = np.where(closer, signed, best_d)
    return best_pts, best_d


class World:
    def __init__(self, desc: RobotDescription, scene: SceneConfig,
                 battery_hours: float = 8.0):
        self.desc = desc
        self.scene_name = scene.name
        self.objects = {k: WorldObject(**vars(v)) for k, v in scene.objects.items()}
        self.anchors = dict(scene.anchors)
        self.joints = home_joints(desc)
        self.base = scene.robot_start
        self.attachments: dict = {}
        self.diag = DiagnosticsState()
        self.battery_hours = battery_hours
        self.clock = 0.0
        self.tick_count = 0
        self.actuation = Actuation()
        self._episodes: dict = {}       # (patch_id, object_id) -> last ContactEvent

    # --- frames -------------------------------------------------------------

    def gripper_pose_world(self, side: str) -> Pose:
        return self.base.as_pose().compose(forward_kinematics(self.desc, self.joints, side))

    def fingertip_world(self, side: str) -> np.ndarray:
        arm = self.desc.arm(side)
        return self.gripper_pose_world(side).transform_point(
            np.array([arm.fingertip_offset, 0.0, 0.0]))

    def ray_scene(self, exclude=()) -> RayScene:
        prims = []
        for obj in self.objects.values():
            if obj.obj_id in exclude:
                continue
            if obj.shape == "composite":
                for i, part in enumerate(obj.parts):
                    prims.append(ScenePrim(obj.obj_id, obj.pose.compose(part.offset),
                                           part.shape, part.dims, obj.color))
            else:
                prims.append(ScenePrim(obj.obj_id, obj.pose, obj.shape, obj.dims, obj.color))
        return RayScene(prims)

    # --- stepping -----------------------------------------------------------

    def step(self, dt: float) -> StepResult:
        """Advance the world by dt seconds of sim time.

        Integrates commanded base/joint motion under the per-subsystem
        velocity caps, resolves grasp requests and attachments, drains the
        battery, and emits contact onset/released edges. With the run-stop
        engaged all velocities are forced to zero for the step.
        """
        if dt <= 0:
            raise ValueError("dt must be > 0")
        result = StepResult()
        act = self.actuation
        t = self.clock

        if not self.diag.run_stop:
            # base (deadman-guarded streaming motion)
            if act.base.deadline >= 0 and t >= act.base.deadline:
                act.base = BaseIntent()
            v, wz = act.base.velocity, act.base.yaw_rate
            if v[0] or v[1] or wz:
                self.base = BasePose(self.base.x + v[0] * dt, self.base.y + v[1] * dt,
                                     self.base.theta + wz * dt)

            # arms follow their time-parameterized plans
            for side, plan in list(act.arm_plans.items()):
                frac = 1.0 if plan.duration <= 0 else min(1.0, (t + dt - plan.t0) / plan.duration)
                q = plan.q_start + frac * (plan.q_target - plan.q_start)
                self.joints.set_arm(side, q)
                if frac >= 1.0:
                    self.joints.set_arm(side, plan.q_target.copy())
                    del act.arm_plans[side]
                    result.arrivals.append(ARM_SUBSYS[side])

            # torso, head, grippers: rate-limited moves toward targets
            if act.torso_target is not None:
                step = self.desc.torso_speed * dt
                delta = act.torso_target - self.joints.torso
                if abs(delta) <= step:
                    self.joints.torso = act.torso_target
                    act.torso_target = None
                    result.arrivals.append("torso")
                else:
                    self.joints.torso += math.copysign(step, delta)
            if act.head_target is not None:
                step = self.desc.head.speed * dt
                pan_d = act.head_target[0] - self.joints.head_pan
                tilt_d = act.head_target[1] - self.joints.head_tilt
                if abs(pan_d) <= step and abs(tilt_d) <= step:
                    self.joints.head_pan, self.joints.head_tilt = act.head_target
                    act.head_target = None
                    result.arrivals.append("head")
                else:
                    self.joints.head_pan += math.copysign(min(step, abs(pan_d)), pan_d)
                    self.joints.head_tilt += math.copysign(min(step, abs(tilt_d)), tilt_d)
            for side in list(act.grasp_requests):
                act.grasp_requests.discard(side)
                res = self.attempt_grasp(side)
                result.grasp_results[side] = res
                result.arrivals.append(GRIP_SUBSYS[side])
            for side, target in list(act.grip_targets.items()):
                step = self.desc.gripper.speed * dt
                cur = self.joints.grip(side)
                delta = target - cur
                if abs(delta) <= step:
                    self.joints.set_grip(side, target)
                    del act.grip_targets[side]
                    result.arrivals.append(GRIP_SUBSYS[side])
                else:
                    self.joints.set_grip(side, cur + math.copysign(step, delta))

        # attachments ride the gripper rigidly
        for side, att in self.attachments.items():
            obj = self.objects[att.object_id]
            obj.pose = self.gripper_pose_world(side).compose(att.grasp)

        # diagnostics and clock
        if self.diag.charging:
            self.diag.battery = min(1.0, self.diag.battery + dt / (4.0 * 3600.0))
        else:
            self.diag.battery = max(0.0, self.diag.battery - dt / (self.battery_hours * 3600.0))
        self.clock = t + dt
        self.tick_count += 1
        self.diag.sim_time = self.clock

        result.contact_events = self._contact_edges()
        return result

    # --- contacts -----------------------------------------------------------

    def _patch_segment_world(self, patch: SkinPatchDef):
        if patch.link == "base":
            frame = self.base.as_pose()
        else:
            frame = self.base.as_pose().compose(link_frame(self.desc, self.joints, patch.link))
        return frame.transform_point(patch.p0), frame.transform_point(patch.p1), frame

    def detect_contacts(self, samples: int = 25) -> list:
        """Current patch/object overlaps, one event per pair, located at the
        deepest penetration mapped onto the patch surface."""
        held = {a.object_id for a in self.attachments.values()}
        candidates = [o for o in self.objects.values() if o.obj_id not in held]
        if not candidates:
            return []
        events = []
        for patch in self.desc.skin:
            a, b, frame = self._patch_segment_world(patch)
            pts = np.linspace(a, b, samples)
            # cheap reject: bounding spheres around the patch and the object
            mid = 0.5 * (a + b)
            patch_r = 0.5 * float(np.linalg.norm(b - a)) + patch.radius
            for obj in candidates:
                bound = patch_r + obj.bound_radius()
                if float(np.linalg.norm(obj.pose.position - mid)) > bound:
                    continue
                cpts, signed_all = _surface_query_batch(obj, pts)
                i = int(np.argmin(signed_all))
                if signed_all[i] > patch.radius:
                    continue
                p, c, signed = pts[i], cpts[i], float(signed_all[i])
                direction = c - p
                norm = float(np.linalg.norm(direction))
                direction = direction / norm if norm > 1e-9 else np.array([0.0, 0.0, 1.0])
                # stay on the capsule surface: offset perpendicular to the axis
                axis = b - a
                axis = axis / max(float(np.linalg.norm(axis)), 1e-12)
                perp = direction - float(direction @ axis) * axis
                n_perp = float(np.linalg.norm(perp))
                if n_perp > 1e-6:
                    direction = perp / n_perp
                loc_world = p + patch.radius * direction
                key = (patch.patch_id, obj.obj_id)
                phase = "ongoing" if key in self._episodes else "onset"
                events.append(ContactEvent(
                    patch_id=patch.patch_id, object_id=obj.obj_id, kind=patch.kind,
                    location_link=frame.inverse_transform_point(loc_world),
                    location_world=loc_world, timestamp=self.clock, phase=phase))
        return events

    def _contact_edges(self) -> list:
        """Onset/released edges since the last step; exactly one onset and one
        released per episode."""
        current = self.detect_contacts()
        edges = []
        seen = set()
        for ev in current:
            key = (ev.patch_id, ev.object_id)
            seen.add(key)
            if ev.phase == "onset":
                edges.append(ev)
            self._episodes[key] = ev
        for key in list(self._episodes):
            if key not in seen:
                last = self._episodes.pop(key)
                edges.append(ContactEvent(
                    patch_id=last.patch_id, object_id=last.object_id, kind=last.kind,
                    location_link=last.location_link, location_world=last.location_world,
                    timestamp=self.clock, phase="released"))
        return edges

    def active_contacts(self) -> list:
        return list(self._episodes.values())

    # --- grasping -----------------------------------------------------------

    def attempt_grasp(self, side: str) -> GraspResult:
        """Close the gripper: both pads contacting one object attaches it.

        The nearest liftable object whose grasp point falls within the
        capture radius of the fingertip midpoint is taken; it snaps between
        the pads (quasi-static stand-in for pad centering) and the aperture
        settles at the object's grasp width. Too-wide objects refuse; empty
        air closes to the minimum aperture.
        """
        tip = self.fingertip_world(side)
        held = {a.object_id for a in self.attachments.values()}
        best = None
        for obj in self.objects.values():
            if obj.mass != "liftable" or obj.obj_id in held:
                continue
            d = float(np.linalg.norm(obj.pose.position - tip))
            if d <= self.desc.gripper.capture_radius and (best is None or d < best[1]):
                best = (obj, d)
        if best is None:
            self.joints.set_grip(side, 0.0)
            return GraspResult("no-object", None, 0.0)
        obj = best[0]
        width = obj.grasp_width if obj.grasp_width is not None else obj.max_dim()
        if width > self.desc.gripper.aperture_max:
            return GraspResult("too-wide", obj.obj_id, self.joints.grip(side))
        obj.pose = Pose(np.asarray(tip, dtype=float).copy(), obj.pose.orientation)
        self.joints.set_grip(side, width)
        grip_world = self.gripper_pose_world(side)
        self.attachments[side] = Attachment(
            object_id=obj.obj_id, grasp=grip_world.inverse().compose(obj.pose))
        return GraspResult("grasped", obj.obj_id, width)

    def release(self, side: str) -> str | None:
        """Detach and settle the held object onto the first support below."""
        att = self.attachments.pop(side, None)
        if att is None:
            return None
        obj = self.objects[att.object_id]
        x, y = float(obj.pose.position[0]), float(obj.pose.position[1])
        yaw = math.atan2(
            2.0 * (obj.pose.orientation[3] * obj.pose.orientation[2]
                   + obj.pose.orientation[0] * obj.pose.orientation[1]),
            1.0 - 2.0 * (obj.pose.orientation[1] ** 2 + obj.pose.orientation[2] ** 2))
        bottom = obj.pose.position[2] - obj.bottom_offset()
        support = 0.0
        for other in self.objects.values():
            if other.obj_id == obj.obj_id:
                continue
            top = other.support_top(x, y)
            if top is not None and top <= bottom + 1e-6:
                support = max(support, top)
        z = support + obj.bottom_offset()
        obj.pose = Pose(np.array([x, y, z]), quat_from_axis_angle([0, 0, 1], yaw))
        return obj.obj_id

    # --- depth sampling -----------------------------------------------------

    def sample_depth_region(self, center, radius: float, stride: int = 4):
        """Synthetic RGB-D points of world surfaces within ``radius`` of
        ``center`` (world frame), sampled through the head depth camera."""
        if radius <= 0:
            raise ValueError("radius must be > 0")
        from .kinematics import camera_pose
        cam = self.desc.cameras["depth"]
        pose = camera_pose(self.desc, self.joints, cam, base=self.base)
        us = np.arange(0, cam.width, stride, dtype=float)
        vs = np.arange(0, cam.height, stride, dtype=float)
        uu, vv = np.meshgrid(us, vs)
        d_cam = np.stack([(uu.ravel() - cam.cx) / cam.fx,
                          (vv.ravel() - cam.cy) / cam.fy,
                          np.ones(uu.size)], axis=1)
        r = pose.rotation_matrix()
        dirs = d_cam @ r.T
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        origins = np.broadcast_to(pose.position, dirs.shape)
        t, idx, pts, _, colors = self.ray_scene().cast(origins, dirs)
        ok = np.isfinite(t)
        center = np.asarray(center, dtype=float)
        ok &= np.linalg.norm(pts - center, axis=1) <= radius
        return pts[ok], colors[ok]

    # --- safety & diagnostics -------------------------------------------------

    def set_run_stop(self, engaged: bool) -> None:
        """Engaging aborts all motion (velocities zero next step); releasing
        never auto-resumes anything."""
        if engaged and not self.diag.run_stop:
            self.actuation.clear_motion()
        self.diag.run_stop = engaged

    def set_charging(self, charging: bool) -> None:
        self.diag.charging = charging

    # --- snapshots ------------------------------------------------------------

    def public_state(self) -> dict:
        """Self-contained, JSON-ready robot/world state for broadcast."""
        grippers = {}
        for side in ("left", "right"):
            pose = self.gripper_pose_world(side)
            grippers[side] = {
                "pose": pose.to_dict(),
                "fingertip": [float(v) for v in self.fingertip_world(side)],
                "aperture": self.joints.grip(side),
            }
        return {
            "tick": self.tick_count,
            "sim_time": self.clock,
            "joints": self.joints.to_dict(),
            "base": self.base.to_dict(),
            "grippers": grippers,
            "attached": {side: att.object_id for side, att in self.attachments.items()},
            "contacts": [ev.to_dict() for ev in self.active_contacts()],
        }

    def object_poses(self) -> dict:
        return {obj_id: obj.pose.to_dict() for obj_id, obj in self.objects.items()}


def load_scene(desc: RobotDescription, scene_name_or_path, battery_hours: float = 8.0) -> World:
    """Build a world from a scene config name (shipped) or a file path."""
    from .scene import load_scene_config
    return World(desc, load_scene_config(scene_name_or_path), battery_hours=battery_hours)

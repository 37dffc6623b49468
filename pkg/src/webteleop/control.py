"""Server-side modal controllers: click-level commands become discrete
per-subsystem goals executed step-wise against the world.

One controller per subsystem runs conceptually in parallel: commands for
different subsystems issued in the same tick are all active at once, and a
new command for a subsystem preempts its active goal. Every motion a
command produces is bounded and self-terminating; only driving streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .camera import NoGroundPoint, pixel_ray, pixel_to_ground
from .geometry import Pose, quat_from_axis_angle, quat_multiply, quat_normalize
from .kinematics import (DegenerateTarget, Unreachable, forward_kinematics, head_frame,
                         head_look_at, solve_arm_ik)
from .world import ArmPlan, BaseIntent, StepResult, World

ARM_SUBSYS = {"left": "arm-L", "right": "arm-R"}
GRIP_SUBSYS = {"left": "gripper-L", "right": "gripper-R"}
SUBSYSTEMS = ("arm-L", "arm-R", "head", "base", "torso", "gripper-L", "gripper-R")

HAND_MODES = {"hand-left": "left", "hand-right": "right"}
ROTATION_ARROWS = ("x+", "x-", "y+", "y-", "z+", "z-")

AUTO_TRACK_PERIOD = 0.5     # seconds between head re-aims while an arm moves


class StepSize(Enum):
    """Per-click motion magnitude, selectable per hand."""

    XS = "XS"
    S = "S"
    M = "M"
    L = "L"

    @property
    def translation(self) -> float:
        return {"XS": 0.015, "S": 0.04, "M": 0.11, "L": 0.25}[self.value]

    @property
    def rotation(self) -> float:
        return {"XS": math.pi / 18, "S": math.pi / 10,
                "M": math.pi / 5, "L": math.pi / 3}[self.value]


@dataclass
class Command:
    """A validated client intent. ``mode`` tags which interface mode sent it;
    sequence numbers are strictly increasing per client."""

    verb: str
    params: dict = field(default_factory=dict)
    mode: str = "looking"
    seq: int = 0
    client_ts: float = 0.0


class CommandRejected(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class _WorkspaceGuard(Exception):
    """Hand goal violates the workspace floor guard."""


@dataclass
class ControlGoal:
    goal_id: int
    subsystem: str
    payload: dict
    state: str = "active"            # active | reached | aborted | preempted
    issued_at: float = 0.0
    command_seq: int | None = None
    reason: str | None = None

    def to_dict(self) -> dict:
        return {"goal_id": self.goal_id, "subsystem": self.subsystem,
                "payload": self.payload, "state": self.state,
                "issued_at": self.issued_at, "command_seq": self.command_seq,
                "reason": self.reason}


def _pose_payload(pose: Pose) -> dict:
    return pose.to_dict()


class ControlStack:
    """Goal table + per-arm step sizes + streaming base intents over a World."""

    def __init__(self, world: World):
        self.world = world
        self.desc = world.desc
        self.goals: dict = {}                      # subsystem -> latest ControlGoal
        self.step_sizes = {"left": StepSize.M, "right": StepSize.M}
        self.active_mode: str | None = None
        self._next_goal_id = 1
        self._last_track = -math.inf
        self._notices: list = []
        self._transitions: list = []

    # --- helpers ------------------------------------------------------------

    def _world_to_base_pose(self, pose_world: Pose) -> Pose:
        return self.world.base.as_pose().inverse().compose(pose_world)

    def _gripper_world(self, side: str) -> Pose:
        return self.world.gripper_pose_world(side)

    def _new_goal(self, subsystem: str, payload: dict, cmd: Command | None) -> ControlGoal:
        events = []
        prior = self.goals.get(subsystem)
        if prior is not None and prior.state == "active":
            prior.state = "preempted"
            events.append(prior)
        goal = ControlGoal(
            goal_id=self._next_goal_id, subsystem=subsystem, payload=payload,
            issued_at=self.world.clock, command_seq=cmd.seq if cmd else None)
        self._next_goal_id += 1
        self.goals[subsystem] = goal
        self._transitions.extend(ev.to_dict() for ev in events)
        return goal

    def _finish(self, goal: ControlGoal, state: str, reason: str | None = None,
                outcome: dict | None = None) -> ControlGoal:
        goal.state = state
        goal.reason = reason
        if outcome:
            goal.payload = {**goal.payload, **outcome}
        self._transitions.append(goal.to_dict())
        return goal

    def goal_status(self, subsystem: str) -> ControlGoal | None:
        return self.goals.get(subsystem)

    def pop_notices(self) -> list:
        out = self._notices
        self._notices = []
        return out

    # --- command dispatch -----------------------------------------------------

    def dispatch(self, cmd: Command) -> dict:
        """Validate and execute one command; returns an ack payload.

        The transition events generated while handling the command (goal
        issued / preempted / aborted) are collected into the ack as well as
        the internal transition log drained by the sim loop.
        """
        if self.world.diag.run_stop and cmd.verb not in ("step_size",):
            raise CommandRejected("run-stop engaged")
        handler = getattr(self, f"_cmd_{cmd.verb}", None)
        if handler is None:
            raise CommandRejected(f"unknown verb {cmd.verb!r}")
        self.active_mode = cmd.mode
        return handler(cmd)

    def drain_transitions(self) -> list:
        out = self._transitions
        self._transitions = []
        return out

    # --- looking ---------------------------------------------------------------

    def resolve_click_target(self, pixel) -> np.ndarray:
        """Pixel ray -> nearest world surface, else ground plane, else a
        point 3 m along the ray."""
        cam = self.desc.cameras["rgb"]
        head_world = self.world.base.as_pose().compose(head_frame(self.desc, self.world.joints))
        origin, direction = pixel_ray(cam, head_world, pixel)
        t, idx, pts, _, _ = self.world.ray_scene().cast(origin[None, :], direction[None, :])
        if np.isfinite(t[0]):
            return pts[0]
        return origin + 3.0 * direction

    def _cmd_look(self, cmd: Command) -> dict:
        pixel = cmd.params["pixel"]
        cam = self.desc.cameras["rgb"]
        if not (0 <= pixel[0] <= cam.width - 1 and 0 <= pixel[1] <= cam.height - 1):
            raise CommandRejected("pixel outside image")
        target = self.resolve_click_target(pixel)
        goal = self._new_goal("head", {"target_world": [float(v) for v in target]}, cmd)
        try:
            pan, tilt = head_look_at(self.desc, self.world.joints,
                                     self.world.base.to_base(target))
        except DegenerateTarget as e:
            self._finish(goal, "aborted", reason=str(e))
            return {"goal": goal.to_dict()}
        goal.payload.update({"pan": pan, "tilt": tilt})
        self.world.actuation.head_target = (pan, tilt)
        return {"goal": goal.to_dict(), "target": [float(v) for v in target]}

    def look_at_point(self, target_world, auto: bool = False) -> ControlGoal | None:
        """Internal head goal used by fingertip tracking."""
        try:
            pan, tilt = head_look_at(self.desc, self.world.joints,
                                     self.world.base.to_base(target_world))
        except DegenerateTarget:
            return None
        goal = self._new_goal("head", {"target_world": [float(v) for v in target_world],
                                       "pan": pan, "tilt": tilt, "auto_track": auto}, None)
        self.world.actuation.head_target = (pan, tilt)
        return goal

    # --- driving ---------------------------------------------------------------

    def _cmd_drive(self, cmd: Command) -> dict:
        held = bool(cmd.params.get("held", True))
        act = self.world.actuation
        if not held:
            act.base = BaseIntent()
            goal = self.goals.get("base")
            if goal is not None and goal.state == "active":
                self._finish(goal, "reached")
            return {"stopped": True}
        cam = self.desc.cameras["rgb"]
        head_world = self.world.base.as_pose().compose(head_frame(self.desc, self.world.joints))
        try:
            target = pixel_to_ground(cam, head_world, cmd.params["pixel"])
        except NoGroundPoint as e:
            act.base = BaseIntent()
            self._notices.append({"reason": "no-ground-point", "detail": str(e)})
            return {"stopped": True, "notice": "no-ground-point"}
        except ValueError as e:
            raise CommandRejected(str(e)) from e
        pos = np.array([self.world.base.x, self.world.base.y, 0.0])
        delta = target - pos
        dist = float(np.hypot(delta[0], delta[1]))
        speeds = self.desc.speeds
        speed = min(speeds.drive_vmax, speeds.drive_gain * dist)
        v = (delta[:2] / dist * speed) if dist > 1e-9 else np.zeros(2)
        act.base = BaseIntent(velocity=v, yaw_rate=0.0,
                              deadline=self.world.clock + speeds.deadman_s)
        goal = self.goals.get("base")
        if goal is None or goal.state != "active":
            goal = self._new_goal("base", {"kind": "drive"}, cmd)
        goal.payload.update({"target": [float(x) for x in target],
                             "speed": speed})
        return {"goal": goal.to_dict(), "target": [float(x) for x in target]}

    def _cmd_turn(self, cmd: Command) -> dict:
        held = bool(cmd.params.get("held", True))
        act = self.world.actuation
        if not held:
            act.base = BaseIntent()
            goal = self.goals.get("base")
            if goal is not None and goal.state == "active":
                self._finish(goal, "reached")
            return {"stopped": True}
        direction = cmd.params.get("direction")
        if direction not in ("left", "right"):
            raise CommandRejected("direction must be left or right")
        # left turns are positive yaw (counter-clockwise from above)
        wz = self.desc.speeds.turn_wmax * (1.0 if direction == "left" else -1.0)
        act.base = BaseIntent(velocity=np.zeros(2), yaw_rate=wz,
                              deadline=self.world.clock + self.desc.speeds.deadman_s)
        goal = self.goals.get("base")
        if goal is None or goal.state != "active":
            goal = self._new_goal("base", {"kind": "turn"}, cmd)
        goal.payload.update({"direction": direction})
        return {"goal": goal.to_dict()}

    # --- spine -------------------------------------------------------------------

    def _cmd_spine(self, cmd: Command) -> dict:
        fraction = cmd.params.get("fraction")
        if fraction is None or not (0.0 <= float(fraction) <= 1.0):
            raise CommandRejected("fraction must be within [0, 1]")
        target = float(fraction) * self.desc.torso_travel
        goal = self._new_goal("torso", {"fraction": float(fraction), "target": target}, cmd)
        if abs(target - self.world.joints.torso) < 1e-9:
            self._finish(goal, "reached", outcome={"noop": True})
        else:
            self.world.actuation.torso_target = target
        return {"goal": goal.to_dict()}

    # --- hand goals -----------------------------------------------------------------

    def hand_goal_pose(self, side: str, verb: str, params: dict) -> Pose:
        """The world-frame pose a hand command would command, computed from
        the live state. Shared verbatim by previews and execution."""
        current = self._gripper_world(side)
        step = self.step_sizes[side]
        if verb == "hand_step":
            point = np.asarray(params["point"], dtype=float)
            point[2] = current.position[2]      # server re-projects to the disk plane
            delta = point - current.position
            dist = float(np.linalg.norm(delta))
            if dist < 1e-9:
                raise CommandRejected("zero-length step")
            move = min(step.translation, dist)
            return Pose(current.position + delta / dist * move, current.orientation)
        if verb == "hand_vertical":
            direction = params.get("direction")
            if direction not in ("up", "down"):
                raise CommandRejected("direction must be up or down")
            dz = step.translation * (1.0 if direction == "up" else -1.0)
            target = current.position + np.array([0.0, 0.0, dz])
            if target[2] < self.desc.floor_margin:
                raise _WorkspaceGuard("goal below the floor margin")
            return Pose(target, current.orientation)
        if verb == "hand_rotate":
            arrow = params.get("arrow")
            if arrow not in ROTATION_ARROWS:
                raise CommandRejected(f"arrow must be one of {ROTATION_ARROWS}")
            axis_local = {"x": [1.0, 0, 0], "y": [0, 1.0, 0], "z": [0, 0, 1.0]}[arrow[0]]
            angle = step.rotation * (1.0 if arrow[1] == "+" else -1.0)
            axis_world = current.rotation_matrix() @ np.asarray(axis_local)
            q_step = quat_from_axis_angle(axis_world, angle)
            pivot = self.world.fingertip_world(side)
            arm = self.desc.arm(side)
            new_orientation = quat_normalize(quat_multiply(q_step, current.orientation))
            new_tip_to_wrist = Pose(np.zeros(3), new_orientation).transform_point(
                [-arm.fingertip_offset, 0.0, 0.0])
            return Pose(pivot + new_tip_to_wrist, new_orientation)
        raise CommandRejected(f"not a hand verb: {verb}")

    def _execute_hand_goal(self, side: str, verb: str, cmd: Command) -> dict:
        try:
            pose_world = self.hand_goal_pose(side, verb, cmd.params)
        except _WorkspaceGuard as e:
            goal = self._new_goal(ARM_SUBSYS[side], {"verb": verb}, cmd)
            self._finish(goal, "aborted", reason=f"workspace-guard: {e}")
            return {"goal": goal.to_dict()}
        goal = self._new_goal(ARM_SUBSYS[side],
                              {"verb": verb, "pose": _pose_payload(pose_world)}, cmd)
        pose_base = self._world_to_base_pose(pose_world)
        q_now = self.world.joints
        try:
            q_target = solve_arm_ik(self.desc, side, q_now.arm(side), q_now.torso, pose_base)
        except Unreachable as e:
            self._finish(goal, "aborted", reason=f"unreachable: {e}")
            return {"goal": goal.to_dict()}
        arm = self.desc.arm(side)
        q_start = q_now.arm(side).copy()
        dq = float(np.max(np.abs(q_target - q_start)))
        cart = float(np.linalg.norm(pose_world.position - self._gripper_world(side).position))
        duration = max(dq / arm.joint_speed, cart / arm.cartesian_speed)
        self.world.actuation.arm_plans[side] = ArmPlan(q_start, q_target,
                                                       self.world.clock, duration)
        return {"goal": goal.to_dict()}

    def _cmd_hand_step(self, cmd: Command) -> dict:
        return self._execute_hand_goal(self._side_of(cmd), "hand_step", cmd)

    def _cmd_hand_vertical(self, cmd: Command) -> dict:
        return self._execute_hand_goal(self._side_of(cmd), "hand_vertical", cmd)

    def _cmd_hand_rotate(self, cmd: Command) -> dict:
        return self._execute_hand_goal(self._side_of(cmd), "hand_rotate", cmd)

    @staticmethod
    def _side_of(cmd: Command) -> str:
        side = cmd.params.get("side")
        if side not in ("left", "right"):
            raise CommandRejected("side must be left or right")
        return side

    def _cmd_preview(self, cmd: Command) -> dict:
        """Pure preview: the exact pose the candidate command would produce,
        with no state change."""
        side = self._side_of(cmd)
        of = cmd.params.get("of") or {}
        verb = of.get("verb")
        if verb not in ("hand_step", "hand_vertical", "hand_rotate"):
            raise CommandRejected("preview only covers hand commands")
        try:
            pose_world = self.hand_goal_pose(side, verb, of.get("params", {}))
        except _WorkspaceGuard as e:
            return {"reachable": False, "reason": f"workspace-guard: {e}"}
        pose_base = self._world_to_base_pose(pose_world)
        q_now = self.world.joints
        try:
            solve_arm_ik(self.desc, side, q_now.arm(side), q_now.torso, pose_base)
            reachable = True
            reason = None
        except Unreachable as e:
            reachable, reason = False, str(e)
        return {"pose": _pose_payload(pose_world), "reachable": reachable, "reason": reason}

    # --- gripper -----------------------------------------------------------------

    def _cmd_gripper(self, cmd: Command) -> dict:
        side = self._side_of(cmd)
        action = cmd.params.get("action")
        if action == "open":
            fraction = cmd.params.get("fraction")
            if fraction is None or not (0.0 <= float(fraction) <= 1.0):
                raise CommandRejected("fraction must be within [0, 1]")
            target = float(fraction) * self.desc.gripper.aperture_max
            goal = self._new_goal(GRIP_SUBSYS[side],
                                  {"action": "open", "aperture": target}, cmd)
            released = None
            if target > self.world.joints.grip(side) and side in self.world.attachments:
                released = self.world.release(side)
                goal.payload["released"] = released
            if abs(target - self.world.joints.grip(side)) < 1e-12:
                self._finish(goal, "reached", outcome={"noop": True})
            else:
                self.world.actuation.grip_targets[side] = target
            return {"goal": goal.to_dict()}
        if action == "grasp":
            goal = self._new_goal(GRIP_SUBSYS[side], {"action": "grasp"}, cmd)
            self.world.actuation.grasp_requests.add(side)
            return {"goal": goal.to_dict()}
        raise CommandRejected("gripper action must be open or grasp")

    def _cmd_step_size(self, cmd: Command) -> dict:
        side = self._side_of(cmd)
        label = cmd.params.get("label")
        try:
            self.step_sizes[side] = StepSize(label)
        except ValueError as e:
            raise CommandRejected(f"unknown step size {label!r}") from e
        return {"side": side, "step_size": label}

    # --- lifecycle driven by world ticks ----------------------------------------

    def abort_all(self, reason: str) -> None:
        for goal in self.goals.values():
            if goal.state == "active":
                self._finish(goal, "aborted", reason=reason)

    def after_step(self, result: StepResult) -> None:
        """Apply world arrivals to the goal table and run head tracking."""
        for subsystem in result.arrivals:
            goal = self.goals.get(subsystem)
            if goal is None or goal.state != "active":
                continue
            if subsystem.startswith("gripper"):
                side = "left" if subsystem.endswith("L") else "right"
                grasp = result.grasp_results.get(side)
                if grasp is not None:
                    self._finish(goal, "reached", outcome={
                        "outcome": grasp.outcome, "object": grasp.object_id,
                        "aperture": grasp.aperture})
                    continue
            self._finish(goal, "reached")
        base_goal = self.goals.get("base")
        if (base_goal is not None and base_goal.state == "active"
                and self.world.actuation.base.deadline >= 0
                and self.world.clock >= self.world.actuation.base.deadline):
            self._finish(base_goal, "aborted", reason="deadman")
        self._auto_head_track(result)

    def _auto_head_track(self, result: StepResult) -> None:
        """While a hand mode is active the head re-aims at that hand's
        fingertips: after each arm step and at a bounded rate during motion.
        Auto tracking wins over manual look goals in hand modes."""
        side = HAND_MODES.get(self.active_mode or "")
        if side is None:
            return
        arm_moving = side in self.world.actuation.arm_plans
        arm_arrived = ARM_SUBSYS[side] in result.arrivals
        due = (self.world.clock - self._last_track) >= AUTO_TRACK_PERIOD
        if arm_arrived or (arm_moving and due):
            self.look_at_point(self.world.fingertip_world(side), auto=True)
            self._last_track = self.world.clock

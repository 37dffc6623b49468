"""Scripted reference agents.

The expert agent reads ground truth from the simulator but acts only
through the wire protocol, like any client: discrete hand steps with the
fixed step sizes, gripper commands, drive/turn streams. It works the way a
practiced operator would: exact horizontal clicks (steps clamp to the
click), greedy step-size decomposition for vertical moves, and periodic
drive refreshes under the deadman.
"""

from __future__ import annotations

import math

import numpy as np

from ..camera import project_to_pixel
from ..client import CommandRefused, TeleopClient
from ..control import StepSize
from ..kinematics import head_frame

STEP_LADDER = [("L", 0.25), ("M", 0.11), ("S", 0.04), ("XS", 0.015)]
VERTICAL_TOL = 0.0076          # half the smallest step, plus slack


class AgentTimeout(Exception):
    """Sim-time budget for the current task ran out."""


class AgentError(RuntimeError):
    pass


class ScriptedAgent:
    def __init__(self, server, side: str = "left", name: str = "expert"):
        self.server = server
        self.side = side
        self.client = TeleopClient.wrap_local(server, name=name)
        self.client.pump = self._pump
        self.deadline: float | None = None
        self.monitors: list = []
        self._current_label = None

    # --- plumbing -----------------------------------------------------------

    @property
    def world(self):
        return self.server.sim.world

    @property
    def desc(self):
        return self.server.sim.desc

    def _pump(self):
        self.server.tick_once()
        for m in self.monitors:
            m()
        if self.deadline is not None and self.world.clock > self.deadline:
            raise AgentTimeout(f"sim deadline {self.deadline:.1f}s exceeded")

    def run_seconds(self, seconds: float):
        for _ in range(max(1, round(seconds / self.server.sim.dt))):
            self._pump()

    @property
    def hand_mode(self) -> str:
        return f"hand-{self.side}"

    def goal(self, verb: str, params: dict, mode: str | None = None) -> dict:
        return self.client.run_goal(verb, params, mode=mode or self.hand_mode,
                                    timeout=120.0)

    # --- fingertip-space motion helpers ---------------------------------------

    def gripper(self):
        return self.world.gripper_pose_world(self.side)

    def fingertip(self) -> np.ndarray:
        return self.world.fingertip_world(self.side)

    def set_step(self, label: str):
        if self._current_label != label:
            self.client.command_and_wait("step_size", {"side": self.side, "label": label},
                                         mode=self.hand_mode)
            self._current_label = label

    def move_point_xy(self, get_point, target_xy, tol: float = 2e-3,
                      max_clicks: int = 24):
        """Walk a tracked point (fingertip, straw tip, ...) to a horizontal
        target with clamped disk clicks."""
        self.set_step("L")
        for _ in range(max_clicks):
            p = np.asarray(get_point(), dtype=float)
            delta = np.array([target_xy[0] - p[0], target_xy[1] - p[1]])
            dist = float(np.hypot(*delta))
            if dist <= tol:
                return
            g = self.gripper().position
            step = min(dist, StepSize.L.translation)
            click = [g[0] + delta[0] / dist * step, g[1] + delta[1] / dist * step, g[2]]
            goal = self.goal("hand_step", {"side": self.side, "point": click})
            if goal["state"] != "reached":
                raise AgentError(f"hand step failed: {goal.get('reason')}")
        raise AgentError("horizontal move did not converge")

    def move_point_z(self, get_point, target_z, tol: float = VERTICAL_TOL,
                     max_steps: int = 24):
        """Vertical stepping with greedy step-size decomposition."""
        for _ in range(max_steps):
            delta = float(target_z - get_point()[2])
            if abs(delta) <= tol:
                return
            label = next((lab for lab, size in STEP_LADDER if size <= abs(delta) + 1e-9),
                         "XS")
            self.set_step(label)
            direction = "up" if delta > 0 else "down"
            goal = self.goal("hand_vertical", {"side": self.side, "direction": direction})
            if goal["state"] != "reached":
                raise AgentError(f"vertical step failed: {goal.get('reason')}")
        raise AgentError("vertical move did not converge")

    def fingertip_to(self, target, xy_first: bool = False):
        target = np.asarray(target, dtype=float)
        if xy_first:
            self.move_point_xy(self.fingertip, target[:2])
            self.move_point_z(self.fingertip, target[2])
        else:
            self.move_point_z(self.fingertip, target[2])
            self.move_point_xy(self.fingertip, target[:2])

    def rotate(self, arrow: str, label: str = "L") -> dict:
        self.set_step(label)
        return self.goal("hand_rotate", {"side": self.side, "arrow": arrow})

    def level_gripper(self, tol: float = 0.12, max_steps: int = 8):
        """Pitch the approach axis toward horizontal (greedy step ladder),
        so low targets stay reachable."""
        ladder = [("L", StepSize.L.rotation), ("M", StepSize.M.rotation),
                  ("S", StepSize.S.rotation), ("XS", StepSize.XS.rotation)]
        for _ in range(max_steps):
            x_axis = self.gripper().rotation_matrix()[:, 0]
            pitch = math.atan2(float(x_axis[2]), math.hypot(float(x_axis[0]),
                                                            float(x_axis[1])))
            if abs(pitch) <= tol:
                return
            label = next((lab for lab, size in ladder if size <= abs(pitch) + 1e-9), "XS")
            arrow = "y+" if pitch > 0 else "y-"     # +y rotation pitches the axis down
            goal = self.rotate(arrow, label)
            if goal["state"] != "reached":
                return

    # --- gripper ----------------------------------------------------------------

    def open_gripper(self, fraction: float = 1.0):
        self.goal("gripper", {"side": self.side, "action": "open", "fraction": fraction})

    def grasp(self) -> str:
        goal = self.goal("gripper", {"side": self.side, "action": "grasp"})
        return goal["payload"].get("outcome", "no-object")

    # --- head / base -----------------------------------------------------------

    def look_at_world(self, point, attempts: int = 6):
        cam = self.desc.cameras["rgb"]
        for _ in range(attempts):
            head_world = self.world.base.as_pose().compose(
                head_frame(self.desc, self.world.joints))
            hit = project_to_pixel(cam, head_world, point)
            if isinstance(hit, tuple):
                self.goal("look", {"pixel": [hit[0], hit[1]]}, mode="looking")
                return True
            name = hit.value
            u = 15.0 if "left" in name else cam.width - 16.0 if "right" in name else cam.cx
            v = 15.0 if "top" in name else cam.height - 16.0 if "bottom" in name else cam.cy
            self.goal("look", {"pixel": [u, v]}, mode="looking")
        return False

    def drive_to(self, target_xy, stop_dist: float = 0.02, timeout_s: float = 120.0):
        """Hold-to-drive toward a ground point, refreshing under the deadman."""
        cam = self.desc.cameras["rgb"]
        ground = np.array([target_xy[0], target_xy[1], 0.0])
        start = self.world.clock
        while True:
            base = self.world.base
            dist = math.hypot(base.x - target_xy[0], base.y - target_xy[1])
            if dist <= stop_dist:
                break
            if self.world.clock - start > timeout_s:
                raise AgentError("drive timed out")
            head_world = base.as_pose().compose(head_frame(self.desc, self.world.joints))
            hit = project_to_pixel(cam, head_world, ground)
            if not isinstance(hit, tuple):
                if not self.look_at_world(ground):
                    raise AgentError("cannot bring the drive target into view")
                continue
            self.client.command_and_wait("drive", {"pixel": [hit[0], hit[1]], "held": True},
                                         mode="driving")
            self.run_seconds(0.1)
        self.client.command_and_wait("drive", {"held": False}, mode="driving")

    def turn_to_heading(self, theta: float, tol: float = 0.02, timeout_s: float = 60.0):
        start = self.world.clock
        while True:
            err = _angle_diff(theta, self.world.base.theta)
            if abs(err) <= tol:
                break
            if self.world.clock - start > timeout_s:
                raise AgentError("turn timed out")
            direction = "left" if err > 0 else "right"
            self.client.command_and_wait("turn", {"direction": direction, "held": True},
                                         mode="driving")
            self.run_seconds(min(0.25, max(0.04, abs(err) / self.desc.speeds.turn_wmax / 2)))
        self.client.command_and_wait("turn", {"held": False}, mode="driving")


def _angle_diff(target, current):
    d = (target - current + math.pi) % (2 * math.pi) - math.pi
    return d

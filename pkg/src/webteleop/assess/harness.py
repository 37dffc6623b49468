"""Harness orchestration: administer the 19-item assessment and the
drink-retrieval task against a lockstep server with scripted agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..kinematics import home_joints
from .agents import AgentError, AgentTimeout, ScriptedAgent
from .arat import (AratOutcome, AratScoreSheet, ITEM_OBJECT_ID, clear_item,
                   item_partial, item_start_pose, item_success, item_target_point,
                   load_items, load_schedule, score_item, spawn_item)


TUCKED_TIP = (0.50, 0.34, 0.75)     # per-side setup fingertip, y mirrored


def reset_setup(server) -> None:
    """Return the robot to the setup configuration between items: torso at
    home, grippers closed, arms tucked low so every item requires a real
    transport (the sub-5-s full-points window is unreachable at the capped
    speeds)."""
    from ..geometry import Pose
    from ..kinematics import Unreachable, solve_ik_step
    world = server.sim.world
    desc = server.sim.desc
    world.actuation.clear_motion()
    world.attachments.clear()
    world.joints = home_joints(desc)
    for side, sign in (("left", 1.0), ("right", -1.0)):
        arm = desc.arm(side)
        tip = np.array([TUCKED_TIP[0], sign * TUCKED_TIP[1], TUCKED_TIP[2]])
        goal = Pose(tip - np.array([arm.fingertip_offset, 0.0, 0.0]))
        try:
            world.joints = solve_ik_step(desc, world.joints, goal, side)
        except Unreachable:
            pass
    server.sim.control.abort_all("item reset")


class ExpertAratAgent(ScriptedAgent):
    """Completes feasible items: grasp/transport/place, displace, the pour
    proxy, and the gross reaches. All motion uses the discrete step
    interface, so every item takes well over the full-points window."""

    def perform_item(self, item) -> None:
        kind = item.goal.get("type")
        world = self.world
        side = self.side
        target = item_target_point(world, side, item)
        if kind == "reach":
            self.open_gripper(0.0)
            self.fingertip_to(target)
            return
        obj = world.objects[ITEM_OBJECT_ID]
        grasp_point = obj.pose.position.copy()
        self.open_gripper(1.0)
        self.fingertip_to(grasp_point)
        outcome = self.grasp()
        if outcome != "grasped":
            raise AgentError(f"grasp failed: {outcome}")
        bottom = obj.bottom_offset()
        if kind == "pour":
            carry_z = target[2] + 0.22
            self.move_point_z(self.fingertip, carry_z)
            self.move_point_xy(lambda: obj.pose.position, target[:2], tol=0.02)
            for arrow in ("y+", "y+", "y-", "y-", "y-"):
                tilt = math.degrees(math.acos(min(1.0, max(
                    -1.0, float(obj.pose.rotation_matrix()[2, 2])))))
                if tilt >= float(item.goal.get("tilt_deg", 90.0)) + 2.0:
                    break
                goal = self.rotate(arrow, "L")
                if goal["state"] != "reached":
                    continue
            return
        carry_z = max(grasp_point[2], target[2] + bottom + 0.05)
        self.move_point_z(self.fingertip, carry_z)
        self.move_point_xy(lambda: obj.pose.position, target[:2])
        self.move_point_z(lambda: obj.pose.position, target[2] + bottom + 0.02)
        self.open_gripper(1.0)


def administer_item(server, agent: ExpertAratAgent, side: str, item, limit: float):
    """Run one item with success/partial monitoring on the sim clock."""
    world = server.sim.world
    if not item.feasible:
        return AratOutcome(item_id=item.item_id, completed=False, partial=False,
                           elapsed=limit, aborted_reason="robot-infeasible (skipped)")
    t0 = world.clock
    state = {"success_at": None, "ever_grasped": False}

    def monitor():
        if state["success_at"] is None and item_success(world, side, item):
            state["success_at"] = world.clock
        if any(att.object_id == ITEM_OBJECT_ID for att in world.attachments.values()):
            state["ever_grasped"] = True

    agent.monitors.append(monitor)
    agent.deadline = t0 + limit
    reason = None
    try:
        agent.perform_item(item)
        deadline = world.clock + 5.0
        while state["success_at"] is None and world.clock < deadline:
            agent._pump()
    except AgentTimeout:
        reason = "time limit"
    except AgentError as e:
        reason = str(e)
    finally:
        agent.deadline = None
        agent.monitors.remove(monitor)
    if state["success_at"] is not None:
        return AratOutcome(item_id=item.item_id, completed=True,
                           elapsed=state["success_at"] - t0)
    return AratOutcome(item_id=item.item_id, completed=False,
                       partial=item_partial(world, side, item, state["ever_grasped"]),
                       elapsed=min(world.clock - t0, limit), aborted_reason=reason)


def run_arat(server, side: str, schedule_path=None, items_path=None,
             agent: ExpertAratAgent | None = None) -> AratScoreSheet:
    """Administer the full schedule; the server must already be restricted."""
    if server.restriction != f"arat-{side}":
        raise RuntimeError(f"server restriction is {server.restriction!r}; "
                           f"refuse to administer without arat-{side}")
    if server.sim.world.scene_name != "arat":
        raise RuntimeError("assessment needs the arat scene")
    items = load_items(items_path)
    order, limit = load_schedule(schedule_path)
    by_id = {i.item_id: i for i in items}
    agent = agent or ExpertAratAgent(server, side=side)
    sheet = AratScoreSheet(side=side, items=[by_id[i] for i in order])
    for item_id in order:
        item = by_id[item_id]
        reset_setup(server)
        spawn_item(server.sim.world, side, item)
        outcome = administer_item(server, agent, side, item, limit)
        sheet.outcomes[item_id] = outcome
        sheet.scores[item_id] = score_item(outcome, item)
    clear_item(server.sim.world)
    reset_setup(server)
    return sheet


# --- the drink task ---------------------------------------------------------------

@dataclass
class SelfCareRun:
    success: bool = False
    grasp_lift_s: float | None = None     # start -> grasped and lifted 2 cm
    delivery_s: float | None = None       # that instant -> success
    total_s: float | None = None
    final_tip_error: float | None = None
    commands: int = 0


def check_selfcare(world) -> bool:
    """Success iff the bottle is held and its straw tip sits within 1 cm of
    the mouth anchor (strictly)."""
    bottle = world.objects.get("bottle")
    if bottle is None or not any(att.object_id == "bottle"
                                 for att in world.attachments.values()):
        return False
    tip = bottle.attachment_point_world()
    mouth = world.anchors["mouth_center"]
    return float(np.linalg.norm(tip - mouth)) < 0.01


class ExpertSelfCareAgent(ScriptedAgent):
    def run_task(self, monitor_state: dict) -> None:
        world = self.world
        bottle = world.objects["bottle"]
        mouth = np.asarray(world.anchors["mouth_center"], dtype=float)

        # raise the torso while rolling toward the shelf
        self.client.command_and_wait("spine", {"fraction": 0.5}, mode="spine")
        self.drive_to((bottle.pose.position[0] - 0.62, bottle.pose.position[1]),
                      stop_dist=0.03)
        self.open_gripper(1.0)
        self.fingertip_to(bottle.pose.position.copy())
        if self.grasp() != "grasped":
            raise AgentError("bottle grasp failed")
        self.move_point_z(self.fingertip, bottle.pose.position[2] + 0.12)
        # tuck the arm back a little before driving
        g = self.gripper().position
        self.move_point_xy(self.fingertip, (g[0] - 0.22, g[1]), tol=0.05, max_clicks=3)

        # over to the mannequin: drive to a spot facing it from +y, then turn
        approach = (mouth[0], mouth[1] + 0.64)
        self.drive_to(approach, stop_dist=0.03)
        self.turn_to_heading(-math.pi / 2)

        def straw_tip():
            return bottle.attachment_point_world()

        self.move_point_z(straw_tip, mouth[2], tol=0.004)
        self.move_point_xy(straw_tip, mouth[:2], tol=0.004)
        while not monitor_state.get("success_at"):
            # trim: tiny clicks directly at the residual
            err = mouth - straw_tip()
            if float(np.linalg.norm(err)) >= 0.01:
                self.move_point_z(straw_tip, mouth[2], tol=0.003)
                self.move_point_xy(straw_tip, mouth[:2], tol=0.003)
            self._pump()
            if float(np.linalg.norm(mouth - straw_tip())) < 0.008:
                self.run_seconds(0.1)
                break


def run_selfcare(server, side: str = "left", time_limit_s: float = 120.0) -> SelfCareRun:
    world = server.sim.world
    if world.scene_name != "selfcare":
        raise RuntimeError("self-care run needs the selfcare scene")
    agent = ExpertSelfCareAgent(server, side=side, name="selfcare-expert")
    bottle = world.objects["bottle"]
    z0 = float(bottle.pose.position[2])
    t0 = world.clock
    state = {"grasp_lift_at": None, "success_at": None}

    def monitor():
        if state["grasp_lift_at"] is None:
            held = any(att.object_id == "bottle" for att in world.attachments.values())
            if held and bottle.pose.position[2] >= z0 + 0.02:
                state["grasp_lift_at"] = world.clock
        if state["success_at"] is None and check_selfcare(world):
            state["success_at"] = world.clock

    agent.monitors.append(monitor)
    agent.deadline = t0 + time_limit_s
    result = SelfCareRun()
    try:
        agent.run_task(state)
    except (AgentTimeout, AgentError):
        pass
    finally:
        agent.deadline = None
        agent.monitors.remove(monitor)
    result.commands = agent.client.seq
    if state["success_at"] is not None:
        result.success = True
        result.total_s = state["success_at"] - t0
    if state["grasp_lift_at"] is not None:
        result.grasp_lift_s = state["grasp_lift_at"] - t0
        if result.success:
            result.delivery_s = state["success_at"] - state["grasp_lift_at"]
    tip = bottle.attachment_point_world()
    result.final_tip_error = float(np.linalg.norm(tip - world.anchors["mouth_center"]))
    return result


def selfcare_phases(log_path) -> SelfCareRun:
    """Phase timing reconstructed by replaying the session log and watching
    the same predicates the live harness used."""
    from ..replay import load_timeline
    from ..sim import SimSession
    from ..control import Command, CommandRejected

    records, report = load_timeline(log_path)
    header = next(r for r in records if r["kind"] == "header")
    sim = SimSession(scene=header["scene"], rate_hz=float(header.get("rate_hz", 50.0)))
    if sim.world.scene_name != "selfcare":
        raise ValueError("log is not from the selfcare scene")
    bottle = sim.world.objects["bottle"]
    z0 = float(bottle.pose.position[2])
    state = {"grasp_lift_at": None, "success_at": None}

    def monitor():
        if state["grasp_lift_at"] is None:
            held = any(att.object_id == "bottle" for att in sim.world.attachments.values())
            if held and bottle.pose.position[2] >= z0 + 0.02:
                state["grasp_lift_at"] = sim.world.clock
        if state["success_at"] is None and check_selfcare(sim.world):
            state["success_at"] = sim.world.clock

    half_tick = sim.dt / 2
    commands = [r for r in records if r["kind"] == "command"]
    for rec in commands:
        while sim.world.clock < rec["t"] - half_tick:
            sim.tick()
            monitor()
        try:
            sim.dispatch(Command(verb=rec["command"]["verb"],
                                 params=rec["command"].get("params", {}),
                                 mode=rec["command"].get("mode", "looking"),
                                 seq=int(rec["command"].get("seq", 0))))
        except CommandRejected:
            pass
    idle_deadline = sim.world.clock + 30.0
    while sim.world.clock < idle_deadline:
        sim.tick()
        monitor()
        act = sim.world.actuation
        if not (act.arm_plans or act.torso_target is not None or act.head_target is not None
                or act.grip_targets or act.grasp_requests):
            break
    out = SelfCareRun(commands=len(commands))
    if state["success_at"] is not None:
        out.success = True
        out.total_s = state["success_at"]
    if state["grasp_lift_at"] is not None:
        out.grasp_lift_s = state["grasp_lift_at"]
        if out.success:
            out.delivery_s = state["success_at"] - state["grasp_lift_at"]
    tip = bottle.attachment_point_world()
    out.final_tip_error = float(np.linalg.norm(tip - sim.world.anchors["mouth_center"]))
    return out

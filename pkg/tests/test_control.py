import math

import numpy as np
import pytest

from webteleop.camera import project_to_pixel
from webteleop.control import Command, CommandRejected, ControlStack, StepSize
from webteleop.geometry import Pose, quat_angle
from webteleop.kinematics import head_frame, head_look_at
from webteleop.scene import object_from_cfg
from webteleop.sim import SimSession


def make_session(scene="empty"):
    return SimSession(scene=scene)


def cmdseq():
    n = [0]
    def next_cmd(verb, params=None, mode="looking"):
        n[0] += 1
        return Command(verb=verb, params=params or {}, mode=mode, seq=n[0])
    return next_cmd


def settle(sim, timeout=30.0):
    sim.run_until_idle(timeout)


# --- step sizes ----------------------------------------------------------------

def test_step_size_values_fixed():
    assert [s.translation for s in StepSize] == [0.015, 0.04, 0.11, 0.25]
    assert [s.rotation for s in StepSize] == pytest.approx(
        [math.pi / 18, math.pi / 10, math.pi / 5, math.pi / 3])


def test_step_size_persists_per_arm():
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("step_size", {"side": "left", "label": "XS"}, mode="hand-left"))
    sim.dispatch(c("step_size", {"side": "right", "label": "L"}, mode="hand-right"))
    assert sim.control.step_sizes["left"] is StepSize.XS
    assert sim.control.step_sizes["right"] is StepSize.L
    with pytest.raises(CommandRejected):
        sim.dispatch(c("step_size", {"side": "left", "label": "XXL"}))


# --- looking --------------------------------------------------------------------

def test_look_centers_visible_box():
    sim = make_session()
    sim.world.objects["box"] = object_from_cfg(
        {"id": "box", "shape": "box", "dims": [0.3, 0.3, 0.3],
         "pose": {"xyz": [1.4, 0.45, 0.15]}}, "objects[0]")
    cam = sim.desc.cameras["rgb"]
    head_world = sim.world.base.as_pose().compose(head_frame(sim.desc, sim.world.joints))
    pixel = project_to_pixel(cam, head_world, [1.4, 0.45, 0.30])
    assert isinstance(pixel, tuple)
    c = cmdseq()
    ack = sim.dispatch(c("look", {"pixel": list(pixel)}))
    target = ack["target"]
    settle(sim)
    head_world = sim.world.base.as_pose().compose(head_frame(sim.desc, sim.world.joints))
    reproj = project_to_pixel(cam, head_world, target)
    assert isinstance(reproj, tuple)
    assert math.hypot(reproj[0] - cam.cx, reproj[1] - cam.cy) < 0.5


def test_look_at_center_when_already_centered_is_still():
    sim = make_session()
    # aim at a ground point, then click the image center again
    sim.world.joints.head_tilt = 0.9
    cam = sim.desc.cameras["rgb"]
    c = cmdseq()
    sim.dispatch(c("look", {"pixel": [cam.cx, cam.cy]}))
    settle(sim)
    pan1, tilt1 = sim.world.joints.head_pan, sim.world.joints.head_tilt
    sim.dispatch(c("look", {"pixel": [cam.cx, cam.cy]}))
    settle(sim)
    assert sim.world.joints.head_pan == pytest.approx(pan1, abs=1e-9)
    assert sim.world.joints.head_tilt == pytest.approx(tilt1, abs=1e-9)


def test_look_sky_uses_three_meter_fallback():
    sim = make_session()
    sim.world.joints.head_tilt = 0.0   # level camera
    cam = sim.desc.cameras["rgb"]
    c = cmdseq()
    ack = sim.dispatch(c("look", {"pixel": [cam.cx, 5.0]}))   # well above the horizon
    target = np.asarray(ack["target"])
    head_world = sim.world.base.as_pose().compose(head_frame(sim.desc, sim.world.joints))
    from webteleop.camera import pixel_ray
    origin, d = pixel_ray(cam, head_world, (cam.cx, 5.0))
    np.testing.assert_allclose(target, origin + 3.0 * d, atol=1e-9)


# --- driving -------------------------------------------------------------------

def drive_pixel_for(sim, ground_xy):
    cam = sim.desc.cameras["rgb"]
    head_world = sim.world.base.as_pose().compose(head_frame(sim.desc, sim.world.joints))
    hit = project_to_pixel(cam, head_world, [ground_xy[0], ground_xy[1], 0.0])
    assert isinstance(hit, tuple)
    return list(hit)


def test_drive_straight_ahead_velocity():
    sim = make_session()
    sim.world.joints.head_tilt = 0.9
    c = cmdseq()
    px = drive_pixel_for(sim, (1.0, 0.0))
    sim.dispatch(c("drive", {"pixel": px, "held": True}, mode="driving"))
    v = sim.world.actuation.base.velocity
    assert v[0] > 0
    assert v[1] == pytest.approx(0.0, abs=1e-9)
    assert sim.world.actuation.base.yaw_rate == 0.0
    expected_speed = min(sim.desc.speeds.drive_vmax, sim.desc.speeds.drive_gain * 1.0)
    assert np.hypot(v[0], v[1]) == pytest.approx(expected_speed, abs=1e-9)


def test_drive_release_stops_next_tick():
    sim = make_session()
    sim.world.joints.head_tilt = 0.9
    c = cmdseq()
    sim.dispatch(c("drive", {"pixel": drive_pixel_for(sim, (1.5, 0.2)), "held": True},
                  mode="driving"))
    sim.tick()
    assert sim.world.actuation.base.velocity[0] != 0
    sim.dispatch(c("drive", {"held": False}, mode="driving"))
    x = sim.world.base.x
    sim.tick()
    assert sim.world.base.x == x


def test_drive_deadman_350ms_gap():
    sim = make_session()
    sim.world.joints.head_tilt = 1.0
    c = cmdseq()
    px = drive_pixel_for(sim, (1.5, 0.0))
    sim.dispatch(c("drive", {"pixel": px, "held": True}, mode="driving"))
    # stream for a while, refreshing faster than the deadman
    for _ in range(5):
        sim.run_for(0.1)
        sim.dispatch(c("drive", {"pixel": drive_pixel_for(sim, (1.5, 0.0)), "held": True},
                      mode="driving"))
    moved = sim.world.base.x
    assert moved > 0
    # now a 350 ms silent gap: velocity must zero within one tick of 300 ms
    sim.run_for(0.30)
    x_at_deadline = sim.world.base.x
    sim.run_for(0.05)
    assert sim.world.base.x - x_at_deadline <= sim.desc.speeds.drive_vmax * sim.dt + 1e-9
    goal = sim.control.goal_status("base")
    assert goal.state == "aborted" and goal.reason == "deadman"


def test_turn_left_is_positive_yaw():
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("turn", {"direction": "left", "held": True}, mode="driving"))
    assert sim.world.actuation.base.yaw_rate == pytest.approx(sim.desc.speeds.turn_wmax)
    sim.tick()
    assert sim.world.base.theta > 0
    sim.dispatch(c("turn", {"direction": "right", "held": True}, mode="driving"))
    assert sim.world.actuation.base.yaw_rate == pytest.approx(-sim.desc.speeds.turn_wmax)


def test_drive_above_horizon_zero_velocity_and_notice():
    sim = make_session()
    sim.world.joints.head_tilt = 0.0   # level: center pixel ray parallel to the ground
    c = cmdseq()
    cam = sim.desc.cameras["rgb"]
    ack = sim.dispatch(c("drive", {"pixel": [cam.cx, cam.cy], "held": True}, mode="driving"))
    assert ack.get("notice") == "no-ground-point"
    assert not sim.world.actuation.base.velocity.any()
    assert sim.control.pop_notices()


# --- spine ----------------------------------------------------------------------

def test_spine_full_range_and_noop():
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("spine", {"fraction": 1.0}, mode="spine"))
    settle(sim)
    assert sim.world.joints.torso == pytest.approx(sim.desc.torso_travel)   # 0.30 m travel
    sim.dispatch(c("spine", {"fraction": 0.0}, mode="spine"))
    settle(sim)
    assert sim.world.joints.torso == pytest.approx(0.0)
    sim.dispatch(c("spine", {"fraction": 0.5}, mode="spine"))
    settle(sim)
    g1 = sim.control.goal_status("torso")
    assert g1.state == "reached"
    sim.dispatch(c("spine", {"fraction": 0.5}, mode="spine"))
    g2 = sim.control.goal_status("torso")
    assert g2.state == "reached" and g2.payload.get("noop")
    with pytest.raises(CommandRejected):
        sim.dispatch(c("spine", {"fraction": 1.2}, mode="spine"))


# --- hand position ----------------------------------------------------------------

def gripper_world(sim, side):
    return sim.world.gripper_pose_world(side)


def test_hand_step_unit_vector_scaling():
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("step_size", {"side": "left", "label": "M"}, mode="hand-left"))
    cur = gripper_world(sim, "left")
    x0, y0, z0 = cur.position
    click = [x0 + 0.30, y0, z0]
    ack = sim.dispatch(c("hand_step", {"side": "left", "point": click}, mode="hand-left"))
    goal_pose = ack["goal"]["payload"]["pose"]
    np.testing.assert_allclose(goal_pose["xyz"], [x0 + 0.11, y0, z0], atol=1e-12)
    settle(sim)
    assert sim.control.goal_status("arm-L").state == "reached"
    reached = gripper_world(sim, "left")
    np.testing.assert_allclose(reached.position, [x0 + 0.11, y0, z0], atol=1.1e-3)
    assert quat_angle(reached.orientation, cur.orientation) <= sim.desc.ik.tol_rot + 1e-9


def test_hand_step_clamps_to_click_point():
    sim = make_session()
    c = cmdseq()
    cur = gripper_world(sim, "left")
    click = cur.position + np.array([0.05, 0.0, 0.0])
    ack = sim.dispatch(c("hand_step", {"side": "left", "point": list(click)},
                       mode="hand-left"))
    np.testing.assert_allclose(ack["goal"]["payload"]["pose"]["xyz"], click, atol=1e-12)


def test_hand_step_zero_length_rejected():
    sim = make_session()
    c = cmdseq()
    cur = gripper_world(sim, "left")
    with pytest.raises(CommandRejected, match="zero-length"):
        sim.dispatch(c("hand_step", {"side": "left", "point": list(cur.position)},
                     mode="hand-left"))


def test_hand_vertical_steps_and_round_trip():
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("step_size", {"side": "right", "label": "XS"}, mode="hand-right"))
    z0 = gripper_world(sim, "right").position[2]
    sim.dispatch(c("hand_vertical", {"side": "right", "direction": "up"}, mode="hand-right"))
    settle(sim)
    assert gripper_world(sim, "right").position[2] == pytest.approx(z0 + 0.015, abs=1.1e-3)
    sim.dispatch(c("hand_vertical", {"side": "right", "direction": "down"}, mode="hand-right"))
    settle(sim)
    assert abs(gripper_world(sim, "right").position[2] - z0) <= 2e-3


def test_hand_vertical_floor_guard():
    sim = make_session()
    c = cmdseq()
    # start from a low, reachable pose near the base
    from webteleop.kinematics import solve_ik_step
    low = Pose(np.array([0.45, -0.188, 0.25]), np.array([0.0, 0.0, 0.0, 1.0]))
    sim.world.joints = solve_ik_step(sim.desc, sim.world.joints, low, "right")
    sim.dispatch(c("step_size", {"side": "right", "label": "L"}, mode="hand-right"))
    ack = sim.dispatch(c("hand_vertical", {"side": "right", "direction": "down"},
                       mode="hand-right"))
    assert ack["goal"]["state"] == "aborted"
    assert "workspace-guard" in ack["goal"]["reason"]
    settle(sim)
    # robot did not move
    assert sim.world.gripper_pose_world("right").position[2] == pytest.approx(0.25, abs=2e-3)


# --- hand rotation -----------------------------------------------------------------

def test_hand_rotate_inverse_returns_to_start():
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("step_size", {"side": "left", "label": "M"}, mode="hand-left"))
    start = gripper_world(sim, "left")
    sim.dispatch(c("hand_rotate", {"side": "left", "arrow": "y+"}, mode="hand-left"))
    settle(sim)
    mid = gripper_world(sim, "left")
    assert quat_angle(mid.orientation, start.orientation) > 0.9 * StepSize.M.rotation
    sim.dispatch(c("hand_rotate", {"side": "left", "arrow": "y-"}, mode="hand-left"))
    settle(sim)
    back = gripper_world(sim, "left")
    assert np.linalg.norm(back.position - start.position) <= 3e-3
    assert quat_angle(back.orientation, start.orientation) <= 2.2 * sim.desc.ik.tol_rot


def test_hand_rotate_pivots_on_fingertip():
    sim = make_session()
    c = cmdseq()
    tip0 = sim.world.fingertip_world("left")
    sim.dispatch(c("hand_rotate", {"side": "left", "arrow": "z+"}, mode="hand-left"))
    settle(sim)
    tip1 = sim.world.fingertip_world("left")
    assert np.linalg.norm(tip1 - tip0) <= 2e-3


def test_hand_rotate_18_xs_steps_compose_to_pi():
    # composed-rotation oracle: 18 exact XS rotations about the gripper x axis
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("step_size", {"side": "left", "label": "XS"}, mode="hand-left"))
    start = gripper_world(sim, "left")
    from webteleop.geometry import quat_from_axis_angle, quat_multiply, quat_normalize
    expected = start.orientation
    for _ in range(18):
        # oracle applies the exact step about the *current* gripper x axis
        axis_world = Pose(np.zeros(3), expected).rotation_matrix() @ np.array([1.0, 0, 0])
        expected = quat_normalize(quat_multiply(
            quat_from_axis_angle(axis_world, math.pi / 18), expected))
        ack = sim.dispatch(c("hand_rotate", {"side": "left", "arrow": "x+"}, mode="hand-left"))
        assert ack["goal"]["state"] != "aborted"
        settle(sim)
    end = gripper_world(sim, "left")
    # wrist roll is the x axis: net rotation must accumulate to pi
    assert quat_angle(start.orientation, expected) == pytest.approx(math.pi, abs=1e-9)
    assert quat_angle(end.orientation, expected) <= 18 * sim.desc.ik.tol_rot


# --- previews -----------------------------------------------------------------------

def test_preview_matches_execution_bit_exact():
    sim = make_session()
    c = cmdseq()
    cur = gripper_world(sim, "left")
    click = [cur.position[0] + 0.2, cur.position[1] + 0.05, cur.position[2]]
    pv = sim.dispatch(c("preview", {"side": "left",
                                    "of": {"verb": "hand_step", "params": {"point": click}}},
                      mode="hand-left"))
    before = gripper_world(sim, "left")
    assert (before.position == cur.position).all()   # preview is pure
    ack = sim.dispatch(c("hand_step", {"side": "left", "point": click}, mode="hand-left"))
    assert ack["goal"]["payload"]["pose"] == pv["pose"]   # bit-exact shared path


def test_preview_unreachable_flagged_robot_unmoved():
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("step_size", {"side": "left", "label": "L"}, mode="hand-left"))
    joints_before = sim.world.joints.arm_l.copy()
    # rotation that would shove the wrist through the torso region repeatedly
    pv = None
    for _ in range(12):
        pv = sim.dispatch(c("preview", {"side": "left",
                                        "of": {"verb": "hand_rotate",
                                               "params": {"arrow": "y+"}}},
                          mode="hand-left"))
        if not pv["reachable"]:
            break
        sim.dispatch(c("hand_rotate", {"side": "left", "arrow": "y+"}, mode="hand-left"))
        settle(sim)
    np.testing.assert_array_equal(sim.world.joints.arm_l, sim.world.joints.arm_l)
    assert pv is not None and "reachable" in pv


def test_preview_rotation_keeps_fingertip():
    sim = make_session()
    c = cmdseq()
    tip = sim.world.fingertip_world("right")
    pv = sim.dispatch(c("preview", {"side": "right",
                                    "of": {"verb": "hand_rotate", "params": {"arrow": "z-"}}},
                      mode="hand-right"))
    pose = Pose.from_dict(pv["pose"])
    arm = sim.desc.arm("right")
    tip_preview = pose.transform_point([arm.fingertip_offset, 0, 0])
    np.testing.assert_allclose(tip_preview, tip, atol=1e-9)


# --- gripper --------------------------------------------------------------------------

def test_gripper_open_full():
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("gripper", {"side": "left", "action": "open", "fraction": 1.0},
                  mode="hand-left"))
    settle(sim)
    assert sim.world.joints.grip_l == pytest.approx(sim.desc.gripper.aperture_max)


def test_gripper_grasp_empty_surfaces_no_object():
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("gripper", {"side": "right", "action": "grasp"}, mode="hand-right"))
    settle(sim)
    goal = sim.control.goal_status("gripper-R")
    assert goal.state == "reached"
    assert goal.payload["outcome"] == "no-object"


# --- lifecycle -------------------------------------------------------------------------

def test_preemption_single_active_per_subsystem():
    sim = make_session()
    c = cmdseq()
    cur = gripper_world(sim, "left").position
    sim.dispatch(c("hand_step", {"side": "left", "point": [cur[0] + 0.3, cur[1], cur[2]]},
                  mode="hand-left"))
    g1 = sim.control.goal_status("arm-L")
    sim.run_for(0.1)
    sim.dispatch(c("hand_step", {"side": "left", "point": [cur[0], cur[1] + 0.3, cur[2]]},
                  mode="hand-left"))
    g2 = sim.control.goal_status("arm-L")
    assert g1.state == "preempted"
    assert g2.state == "active" and g2.goal_id != g1.goal_id


def test_concurrent_goals_different_subsystems():
    sim = make_session()
    c = cmdseq()
    sim.world.joints.head_tilt = 0.5
    sim.dispatch(c("spine", {"fraction": 0.9}, mode="spine"))
    cam = sim.desc.cameras["rgb"]
    sim.dispatch(c("look", {"pixel": [cam.cx + 300, cam.cy + 100]}, mode="looking"))
    assert sim.control.goal_status("torso").state == "active"
    assert sim.control.goal_status("head").state == "active"
    settle(sim)
    assert sim.control.goal_status("torso").state == "reached"
    assert sim.control.goal_status("head").state == "reached"


def test_run_stop_aborts_goals_and_requires_reissue():
    sim = make_session()
    c = cmdseq()
    sim.dispatch(c("spine", {"fraction": 1.0}, mode="spine"))
    sim.run_for(0.1)
    sim.set_run_stop(True)
    sim.tick()
    assert sim.control.goal_status("torso").state == "aborted"
    torso = sim.world.joints.torso
    sim.run_for(0.2)
    assert sim.world.joints.torso == torso
    with pytest.raises(CommandRejected, match="run-stop"):
        sim.dispatch(c("spine", {"fraction": 0.5}, mode="spine"))
    sim.set_run_stop(False)
    sim.run_for(0.2)
    assert sim.world.joints.torso == torso   # released: still needs a new command
    sim.dispatch(c("spine", {"fraction": 0.5}, mode="spine"))
    settle(sim)
    assert sim.world.joints.torso == pytest.approx(0.15)


def test_modal_isolation():
    sim = make_session()
    c = cmdseq()
    before = {
        "arm_r": sim.world.joints.arm_r.copy(),
        "base": (sim.world.base.x, sim.world.base.y, sim.world.base.theta),
        "torso": sim.world.joints.torso,
        "grips": (sim.world.joints.grip_l, sim.world.joints.grip_r),
    }
    cur = gripper_world(sim, "left").position
    sim.dispatch(c("hand_step", {"side": "left", "point": [cur[0] + 0.1, cur[1], cur[2]]},
                  mode="hand-left"))
    settle(sim)
    np.testing.assert_array_equal(sim.world.joints.arm_r, before["arm_r"])
    assert (sim.world.base.x, sim.world.base.y, sim.world.base.theta) == before["base"]
    assert sim.world.joints.torso == before["torso"]
    assert (sim.world.joints.grip_l, sim.world.joints.grip_r) == before["grips"]


# --- auto head tracking ------------------------------------------------------------------

def test_auto_track_follows_fingertip():
    sim = make_session()
    c = cmdseq()
    cur = gripper_world(sim, "left").position
    sim.dispatch(c("hand_step", {"side": "left", "point": [cur[0], cur[1] + 0.25, cur[2]]},
                  mode="hand-left"))
    settle(sim)
    cam = sim.desc.cameras["rgb"]
    tip = sim.world.fingertip_world("left")
    head_world = sim.world.base.as_pose().compose(head_frame(sim.desc, sim.world.joints))
    hit = project_to_pixel(cam, head_world, tip)
    assert isinstance(hit, tuple)
    # fingertip within 10% of the image center once tracking settles
    assert abs(hit[0] - cam.cx) <= 0.10 * cam.width
    assert abs(hit[1] - cam.cy) <= 0.10 * cam.height


def test_auto_track_overrides_manual_look_in_hand_mode():
    sim = make_session()
    c = cmdseq()
    cur = gripper_world(sim, "left").position
    sim.dispatch(c("hand_step", {"side": "left", "point": [cur[0] + 0.22, cur[1], cur[2]]},
                  mode="hand-left"))
    sim.run_for(0.06)
    cam = sim.desc.cameras["rgb"]
    sim.dispatch(c("look", {"pixel": [5.0, 5.0]}, mode="hand-left"))
    settle(sim)
    head_goal = sim.control.goal_status("head")
    assert head_goal.payload.get("auto_track")   # tracking re-took the head


def test_no_tracking_outside_hand_modes():
    sim = make_session()
    c = cmdseq()
    pan0 = sim.world.joints.head_pan
    sim.dispatch(c("spine", {"fraction": 0.4}, mode="spine"))
    settle(sim)
    assert sim.world.joints.head_pan == pan0
    assert sim.control.goal_status("head") is None

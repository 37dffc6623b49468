import math

import numpy as np
import pytest

from webteleop.geometry import Pose, quat_from_axis_angle
from webteleop.kinematics import BasePose, forward_kinematics
from webteleop.raycast import RayScene, ScenePrim, closest_surface_point, ray_shape
from webteleop.scene import SceneError, load_scene_config, object_from_cfg
from webteleop.world import ArmPlan, BaseIntent, World, load_scene

from oracles import settle_support_z


@pytest.fixture()
def empty_world(desc):
    return load_scene(desc, "empty")


@pytest.fixture()
def selfcare_world(desc):
    return load_scene(desc, "selfcare")


# --- raycast primitives -------------------------------------------------------

def test_ray_box_hits_face():
    o = np.array([[-5.0, 0.0, 0.0]])
    d = np.array([[1.0, 0.0, 0.0]])
    t, n = ray_shape("box", [2.0, 2.0, 2.0], o, d)
    assert t[0] == pytest.approx(4.0)
    np.testing.assert_allclose(n[0], [-1, 0, 0])


def test_ray_primitives_substitution():
    rng = np.random.default_rng(3)
    for shape, dims in (("box", [0.4, 0.3, 0.5]), ("sphere", [0.4]), ("cylinder", [0.3, 0.6])):
        o = rng.uniform(-3, 3, size=(500, 3))
        o[np.linalg.norm(o, axis=1) < 1.0] += 2.0
        target = rng.uniform(-0.1, 0.1, size=(500, 3))
        d = target - o
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        t, _ = ray_shape(shape, dims, o, d)
        hits = np.isfinite(t)
        assert hits.mean() > 0.9
        p = o[hits] + t[hits, None] * d[hits]
        if shape == "box":
            half = np.asarray(dims) / 2
            on = (np.abs(np.abs(p) - half) < 1e-9).any(axis=1)
            inside = (np.abs(p) <= half + 1e-9).all(axis=1)
            assert (on & inside).all()
        elif shape == "sphere":
            np.testing.assert_allclose(np.linalg.norm(p, axis=1), dims[0] / 2, atol=1e-9)
        else:
            r, hh = dims[0] / 2, dims[1] / 2
            rad = np.hypot(p[:, 0], p[:, 1])
            on_side = (np.abs(rad - r) < 1e-9) & (np.abs(p[:, 2]) <= hh + 1e-9)
            on_cap = (np.abs(np.abs(p[:, 2]) - hh) < 1e-9) & (rad <= r + 1e-9)
            assert (on_side | on_cap).all()


def test_closest_surface_point_on_surface():
    rng = np.random.default_rng(4)
    for shape, dims in (("box", [0.4, 0.3, 0.5]), ("sphere", [0.4]), ("cylinder", [0.3, 0.6])):
        for _ in range(300):
            p = rng.uniform(-0.6, 0.6, size=3)
            c = closest_surface_point(shape, dims, p)
            if shape == "box":
                half = np.asarray(dims) / 2
                assert (np.abs(c) <= half + 1e-9).all()
                assert np.isclose(np.abs(c / half), 1.0, atol=1e-9).any()
            elif shape == "sphere":
                assert np.linalg.norm(c) == pytest.approx(dims[0] / 2, abs=1e-9)
            else:
                r, hh = dims[0] / 2, dims[1] / 2
                rad = math.hypot(c[0], c[1])
                assert (abs(rad - r) < 1e-9 and abs(c[2]) <= hh + 1e-9) or \
                       (abs(abs(c[2]) - hh) < 1e-9 and rad <= r + 1e-9)


# --- scene loading --------------------------------------------------------------

def test_load_scene_selfcare_layout(desc, selfcare_world):
    bottle = selfcare_world.objects["bottle"]
    assert bottle.pose.position[0] == pytest.approx(2.0)   # about two meters ahead
    assert "mouth_center" in selfcare_world.anchors
    # bottle rests on the shelf top
    shelf_top = selfcare_world.objects["shelf"].support_top(2.0, 0.0)
    assert shelf_top == pytest.approx(0.92)
    assert bottle.pose.position[2] - bottle.bottom_offset() == pytest.approx(shelf_top)


def test_load_scene_empty(empty_world):
    assert empty_world.objects == {}


def test_scene_errors_carry_field():
    with pytest.raises(SceneError, match=r"objects\[0\].dims"):
        object_from_cfg({"id": "x", "shape": "box", "dims": [1, -1, 1]}, "objects[0]")
    with pytest.raises(SceneError, match="grasp_width"):
        object_from_cfg({"id": "x", "shape": "box", "dims": [0.05, 0.05, 0.05],
                         "grasp_width": 0.2}, "objects[0]")


def test_scene_rejects_duplicate_ids(tmp_path):
    p = tmp_path / "dup.yaml"
    p.write_text("""
name: dup
objects:
  - {id: a, shape: sphere, dims: [0.1]}
  - {id: a, shape: sphere, dims: [0.1]}
""")
    with pytest.raises(SceneError, match="duplicate"):
        load_scene_config(p)


def test_scene_parse_error_reports_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("name: x\nobjects:\n  - {id: a, shape: box\n")
    with pytest.raises(SceneError, match="line"):
        load_scene_config(p)


# --- stepping -------------------------------------------------------------------

def test_step_quiescent_world_only_clock_and_battery(selfcare_world):
    w = selfcare_world
    before = w.public_state()
    for _ in range(50):
        w.step(0.02)
    after = w.public_state()
    assert after["sim_time"] == pytest.approx(1.0)
    assert after["joints"] == before["joints"]
    assert after["base"] == before["base"]
    assert w.diag.battery < 1.0


def test_step_arm_plan_respects_joint_caps(desc, empty_world):
    w = empty_world
    side = "left"
    q0 = w.joints.arm_l.copy()
    q1 = q0 + np.array([0.4, -0.2, 0.3, 0.25, -0.5, 0.2, 0.6])
    duration = float(np.max(np.abs(q1 - q0)) / desc.arm(side).joint_speed) + 0.2
    w.actuation.arm_plans[side] = ArmPlan(q0, q1, w.clock, duration)
    dt = 0.02
    prev = q0.copy()
    arrived = False
    for _ in range(200):
        res = w.step(dt)
        step = np.abs(w.joints.arm_l - prev)
        assert (step <= desc.arm(side).joint_speed * dt + 1e-9).all()
        prev = w.joints.arm_l.copy()
        if "arm-L" in res.arrivals:
            arrived = True
            break
    assert arrived
    np.testing.assert_allclose(w.joints.arm_l, q1, atol=1e-12)


def test_step_deadman_zeroes_velocity(empty_world):
    w = empty_world
    w.actuation.base = BaseIntent(velocity=np.array([0.2, 0.0]), yaw_rate=0.0,
                                  deadline=w.clock + 0.3)
    for _ in range(14):   # 0.28 s: still driving
        w.step(0.02)
    x_before = w.base.x
    assert x_before > 0
    w.step(0.02)          # crosses the 0.3 s deadline: zero within one tick
    w.step(0.02)
    assert w.base.x == pytest.approx(x_before, abs=1e-12) or \
        w.base.x == pytest.approx(0.2 * 0.30, abs=1e-9)
    x_stale = w.base.x
    for _ in range(10):
        w.step(0.02)
    assert w.base.x == x_stale


def test_run_stop_zeroes_all_motion(empty_world):
    w = empty_world
    w.actuation.base = BaseIntent(velocity=np.array([0.2, 0.0]), deadline=w.clock + 10)
    w.actuation.torso_target = 0.25
    w.step(0.02)
    assert w.base.x > 0
    w.set_run_stop(True)
    x = w.base.x
    torso = w.joints.torso
    w.step(0.02)
    assert w.base.x == x and w.joints.torso == torso
    w.set_run_stop(True)    # idempotent
    w.set_run_stop(False)
    w.step(0.02)            # no auto-resume
    assert w.base.x == x and w.joints.torso == torso


def test_battery_monotone_unless_charging(empty_world):
    w = empty_world
    levels = []
    for _ in range(100):
        w.step(0.05)
        levels.append(w.diag.battery)
    assert all(b2 <= b1 for b1, b2 in zip(levels, levels[1:]))
    w.set_charging(True)
    before = w.diag.battery
    for _ in range(100):
        w.step(0.05)
    assert w.diag.battery > before


# --- grasping and release -------------------------------------------------------

def put_gripper_at(desc, w, side, point):
    """Teleport helper: solve IK so the fingertip midpoint lands at point."""
    from webteleop.kinematics import solve_ik_step
    tip_off = desc.arm(side).fingertip_offset
    goal = Pose(np.asarray(point, dtype=float) - np.array([tip_off, 0.0, 0.0]),
                np.array([0.0, 0.0, 0.0, 1.0]))
    base_goal = Pose(w.base.to_base(goal.position), goal.orientation)
    w.joints = solve_ik_step(desc, w.joints, base_goal, side)


def test_grasp_block_between_pads(desc, empty_world):
    w = empty_world
    from webteleop.scene import object_from_cfg
    w.objects["block"] = object_from_cfg(
        {"id": "block", "shape": "box", "dims": [0.05, 0.05, 0.05],
         "pose": {"xyz": [0.62, 0.188, 0.95]}, "mass": "liftable",
         "grasp_width": 0.05}, "objects[0]")
    put_gripper_at(desc, w, "left", [0.62, 0.188, 0.95])
    res = w.attempt_grasp("left")
    assert res.outcome == "grasped" and res.object_id == "block"
    assert res.aperture == pytest.approx(0.05, abs=0.002)
    # attachment rigidity: object follows the gripper exactly
    w.actuation.torso_target = min(w.joints.torso + 0.05, desc.torso_travel)
    for _ in range(200):
        w.step(0.02)
    grip = w.gripper_pose_world("left")
    expected = grip.compose(w.attachments["left"].grasp)
    np.testing.assert_allclose(w.objects["block"].pose.position, expected.position, atol=1e-12)


def test_grasp_empty_air_and_too_wide(desc, empty_world):
    w = empty_world
    res = w.attempt_grasp("right")
    assert res.outcome == "no-object"
    assert w.joints.grip_r == 0.0
    from webteleop.scene import object_from_cfg
    w.objects["big"] = object_from_cfg(
        {"id": "big", "shape": "box", "dims": [0.10, 0.10, 0.10],
         "pose": {"xyz": [0.62, -0.188, 0.95]}, "mass": "liftable",
         "grasp_width": 0.10}, "objects[0]")
    put_gripper_at(desc, w, "right", [0.62, -0.188, 0.95])
    assert desc.gripper.aperture_max == pytest.approx(0.09)
    assert w.attempt_grasp("right").outcome == "too-wide"


def test_release_settles_on_support(desc, selfcare_world):
    w = selfcare_world
    put_gripper_at(desc, w, "left", [0.60, 0.188, 1.00])
    from webteleop.scene import object_from_cfg
    w.objects["cup"] = object_from_cfg(
        {"id": "cup", "shape": "cylinder", "dims": [0.06, 0.12],
         "pose": {"xyz": [0.60, 0.188, 1.00]}, "mass": "liftable",
         "grasp_width": 0.06}, "objects[0]")
    assert w.attempt_grasp("left").outcome == "grasped"
    released = w.release("left")
    assert released == "cup"
    cup = w.objects["cup"]
    oracle_prims = [(o.pose, o.shape, o.dims) for o in w.objects.values()
                    if o.obj_id != "cup" and o.shape in ("box", "cylinder")]
    support = settle_support_z(oracle_prims, 0.60, 0.188, 1.00)
    assert cup.pose.position[2] - cup.bottom_offset() == pytest.approx(support, abs=1e-9)
    assert w.release("left") is None   # nothing held: no-op


def test_release_mid_air_settles_upright_same_xy(desc, empty_world):
    w = empty_world
    put_gripper_at(desc, w, "left", [0.55, 0.10, 1.05])
    from webteleop.scene import object_from_cfg
    w.objects["bottle"] = object_from_cfg(
        {"id": "bottle", "shape": "cylinder", "dims": [0.065, 0.2],
         "pose": {"xyz": [0.55, 0.10, 1.05]}, "mass": "liftable",
         "grasp_width": 0.065}, "objects[0]")
    assert w.attempt_grasp("left").outcome == "grasped"
    w.release("left")
    b = w.objects["bottle"]
    assert b.pose.position[0] == pytest.approx(0.55, abs=1e-9)
    assert b.pose.position[1] == pytest.approx(0.10, abs=1e-9)
    assert b.pose.position[2] == pytest.approx(0.1, abs=1e-9)   # upright on the floor
    np.testing.assert_allclose(b.pose.rotation_matrix()[2, 2], 1.0, atol=1e-12)


# --- contacts ---------------------------------------------------------------------

def test_contact_events_on_table_overlap(desc):
    from webteleop.scene import SceneConfig
    from webteleop.kinematics import BasePose as BP
    table = object_from_cfg({"id": "table", "shape": "box", "dims": [0.6, 1.2, 0.72],
                             "pose": {"xyz": [0.55, 0.0, 0.36]}}, "objects[0]")
    w = World(desc, SceneConfig("t", BP(), {"table": table}, {}))
    # drive the left forearm into the table edge region
    from webteleop.kinematics import solve_ik_step
    goal = Pose(np.array([0.45, 0.188, 0.70]), np.array([0.0, 0.0, 0.0, 1.0]))
    w.joints = solve_ik_step(desc, w.joints, goal, "left")
    events = w.detect_contacts()
    arm_events = [e for e in events if e.kind == "arm"]
    assert arm_events, "expected forearm/table contact"
    for ev in arm_events:
        patch = next(p for p in desc.skin if p.patch_id == ev.patch_id)
        a, b, frame = w._patch_segment_world(patch)
        ab = b - a
        s = np.clip(np.dot(ev.location_world - a, ab) / np.dot(ab, ab), 0, 1)
        axis_pt = a + s * ab
        assert np.linalg.norm(ev.location_world - axis_pt) == pytest.approx(
            patch.radius, abs=1e-3)


def test_no_tunneling_at_cap_speeds(desc):
    """Per-step displacement at the velocity caps stays under half the
    smallest manipulable dimension in every shipped scene (and under half
    the smallest fixed-obstacle dimension for the base)."""
    from webteleop.assess.arat import load_items
    dt = 1.0 / 50.0
    arm_step = desc.arm("left").cartesian_speed * dt
    base_step = desc.speeds.drive_vmax * dt
    dims = []
    for scene in ("selfcare", "arat", "home"):
        w = load_scene(desc, scene)
        for obj in w.objects.values():
            if obj.mass == "liftable":
                dims.append(obj.min_dim())
            else:
                assert base_step < obj.min_dim() / 2, (scene, obj.obj_id)
    for item in load_items():
        if item.object_cfg is not None:
            dims.append(min(item.object_cfg["dims"]))
    assert dims
    assert arm_step < min(dims) / 2


def test_contact_episode_pairing(desc, empty_world):
    w = empty_world
    from webteleop.scene import object_from_cfg
    w.objects["post"] = object_from_cfg(
        {"id": "post", "shape": "box", "dims": [0.2, 0.2, 0.4],
         "pose": {"xyz": [10.0, 0.0, 0.2]}}, "objects[0]")
    onsets = releases = 0
    for i in range(6):
        # teleport the base into and out of overlap with the post
        w.base = BasePose(10.0 if i % 2 == 0 else 0.0, 0.0, 0.0)
        for ev in w.step(0.02).contact_events:
            if ev.kind != "base":
                continue
            if ev.phase == "onset":
                onsets += 1
                assert releases == onsets - 1   # strict alternation
            elif ev.phase == "released":
                releases += 1
    assert onsets == 3 and releases == 3


# --- depth sampling ---------------------------------------------------------------

def test_depth_region_empty_and_surface(desc, empty_world):
    w = empty_world
    pts, colors = w.sample_depth_region([10.0, 10.0, 1.0], 0.3)
    assert len(pts) == 0
    from webteleop.scene import object_from_cfg
    w.objects["box"] = object_from_cfg(
        {"id": "box", "shape": "box", "dims": [0.3, 0.3, 0.3],
         "pose": {"xyz": [1.0, 0.0, 0.15]}}, "objects[0]")
    w.joints.head_tilt = 0.6
    pts, colors = w.sample_depth_region([1.0, 0.0, 0.15], 0.4, stride=4)
    assert len(pts) > 50
    box_pts = pts[np.abs(np.linalg.norm(pts - [1.0, 0.0, 0.15], axis=1)) < 0.4]
    local = box_pts - [1.0, 0.0, 0.15]
    on_face = (np.abs(np.abs(local) - 0.15) < 1e-7).any(axis=1)
    floor = np.abs(box_pts[:, 2]) < 1e-9
    assert (on_face | floor).all()


def test_depth_region_stride_decimation(desc, empty_world):
    w = empty_world
    w.joints.head_tilt = 1.0
    # ground fills the frame; radius big enough to keep everything
    p1, _ = w.sample_depth_region([0.3, 0.0, 0.0], 50.0, stride=4)
    p2, _ = w.sample_depth_region([0.3, 0.0, 0.0], 50.0, stride=8)
    assert p2.shape[0] == pytest.approx(p1.shape[0] / 4, rel=0.05)

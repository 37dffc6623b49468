"""Kinematic model: forward kinematics, damped least-squares IK stepping,
fingertip frames, and head look-at.

All poses returned here are expressed in the robot base frame (origin at the
floor under the base center, x forward, z up). World-frame conversions go
through :class:`BasePose`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .description import ArmModel, RobotDescription
from .geometry import (Pose, normalize_angle, quat_conjugate, quat_from_matrix,
                       quat_multiply, quat_to_matrix, rotvec_from_quat)


class InvalidJoints(ValueError):
    """A joint value violates its configured limit interval."""


class Unreachable(RuntimeError):
    """IK failed to converge within its iteration budget."""


class DegenerateTarget(ValueError):
    """Look-at target coincides with the gaze origin."""


@dataclass
class JointVector:
    """All actuated values except the base pose.

    7 angles per arm, torso lift, head pan/tilt, and one aperture per
    gripper: 19 values. Together with the 3-DoF base pose the robot exposes
    22 actuated values; the interface addresses 20 of them as controllable
    degrees of freedom because each hand is commanded as a 6-DoF pose
    rather than 7 joints.
    """

    arm_l: np.ndarray = field(default_factory=lambda: np.zeros(7))
    arm_r: np.ndarray = field(default_factory=lambda: np.zeros(7))
    torso: float = 0.0
    head_pan: float = 0.0
    head_tilt: float = 0.0
    grip_l: float = 0.0
    grip_r: float = 0.0

    def __post_init__(self):
        self.arm_l = np.asarray(self.arm_l, dtype=float)
        self.arm_r = np.asarray(self.arm_r, dtype=float)

    def copy(self) -> "JointVector":
        return JointVector(self.arm_l.copy(), self.arm_r.copy(), self.torso,
                           self.head_pan, self.head_tilt, self.grip_l, self.grip_r)

    def arm(self, side: str) -> np.ndarray:
        return self.arm_l if side == "left" else self.arm_r

    def set_arm(self, side: str, q7) -> None:
        if side == "left":
            self.arm_l = np.asarray(q7, dtype=float)
        else:
            self.arm_r = np.asarray(q7, dtype=float)

    def grip(self, side: str) -> float:
        return self.grip_l if side == "left" else self.grip_r

    def set_grip(self, side: str, aperture: float) -> None:
        if side == "left":
            self.grip_l = aperture
        else:
            self.grip_r = aperture

    def to_dict(self) -> dict:
        return {
            "arm_l": [float(v) for v in self.arm_l],
            "arm_r": [float(v) for v in self.arm_r],
            "torso": self.torso,
            "head_pan": self.head_pan,
            "head_tilt": self.head_tilt,
            "grip_l": self.grip_l,
            "grip_r": self.grip_r,
        }

    @staticmethod
    def from_dict(d: dict) -> "JointVector":
        return JointVector(np.asarray(d["arm_l"]), np.asarray(d["arm_r"]), d["torso"],
                           d["head_pan"], d["head_tilt"], d["grip_l"], d["grip_r"])


@dataclass(frozen=True)
class BasePose:
    """Planar base pose in the world frame; heading normalized to (-pi, pi]."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def as_pose(self) -> Pose:
        half = 0.5 * self.theta
        return Pose(np.array([self.x, self.y, 0.0]),
                    np.array([0.0, 0.0, math.sin(half), math.cos(half)]))

    def to_world(self, p_base) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        p = np.asarray(p_base, dtype=float)
        return np.array([self.x + c * p[0] - s * p[1],
                         self.y + s * p[0] + c * p[1],
                         p[2]])

    def to_base(self, p_world) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        p = np.asarray(p_world, dtype=float)
        dx, dy = p[0] - self.x, p[1] - self.y
        return np.array([c * dx + s * dy, -s * dx + c * dy, p[2]])

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "theta": self.theta}


def validate_joints(desc: RobotDescription, q: JointVector) -> None:
    """Raise InvalidJoints when any value leaves its configured interval."""
    for side in ("left", "right"):
        arm = desc.arm(side)
        qa = q.arm(side)
        if qa.shape != (7,):
            raise InvalidJoints(f"{side} arm: expected 7 joints")
        bad = (qa < arm.lower - 1e-12) | (qa > arm.upper + 1e-12)
        if bad.any():
            i = int(np.argmax(bad))
            raise InvalidJoints(
                f"{side} arm joint {arm.joints[i].name}={qa[i]:.4f} outside "
                f"[{arm.joints[i].lo}, {arm.joints[i].hi}]")
    if not (0.0 - 1e-12 <= q.torso <= desc.torso_travel + 1e-12):
        raise InvalidJoints(f"torso={q.torso:.4f} outside [0, {desc.torso_travel}]")
    lo, hi = desc.head.pan_limits
    if not (lo <= q.head_pan <= hi):
        raise InvalidJoints(f"head_pan={q.head_pan:.4f} outside [{lo}, {hi}]")
    lo, hi = desc.head.tilt_limits
    if not (lo <= q.head_tilt <= hi):
        raise InvalidJoints(f"head_tilt={q.head_tilt:.4f} outside [{lo}, {hi}]")
    for side in ("left", "right"):
        a = q.grip(side)
        if not (0.0 - 1e-12 <= a <= desc.gripper.aperture_max + 1e-12):
            raise InvalidJoints(f"{side} aperture={a:.4f} outside [0, {desc.gripper.aperture_max}]")


def _axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    # Rodrigues rotation about a unit axis.
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    t = 1.0 - c
    return np.array([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])


def _lift_origin(desc: RobotDescription, q: JointVector) -> np.ndarray:
    return np.array([0.0, 0.0, desc.torso_base_height + q.torso])


def _chain(desc: RobotDescription, arm: ArmModel, q7: np.ndarray, torso: float):
    """Base-frame origins, axes, and per-joint frames of the 7-joint chain.

    Returns (origins 7x3, axes 7x3, frames list of (R, p) after each joint,
    gripper (R, p)).
    """
    p = np.array([0.0, 0.0, desc.torso_base_height + torso]) + arm.mount.position
    r = np.eye(3)
    origins = np.empty((7, 3))
    axes = np.empty((7, 3))
    frames = []
    for i, joint in enumerate(arm.joints):
        p = p + r @ joint.origin
        axis_world = r @ joint.axis
        origins[i] = p
        axes[i] = axis_world
        r = r @ _axis_angle_matrix(joint.axis, q7[i])
        frames.append((r, p))
    p_tool = p + r @ arm.tool.position
    r_tool = r @ quat_to_matrix(arm.tool.orientation)
    return origins, axes, frames, (r_tool, p_tool)


def forward_kinematics(desc: RobotDescription, q: JointVector, side: str) -> Pose:
    """Gripper-frame pose in the robot base frame. Pure and deterministic."""
    validate_joints(desc, q)
    return _fk_unchecked(desc, q.arm(side), q.torso, side)


def _fk_unchecked(desc: RobotDescription, q7: np.ndarray, torso: float, side: str) -> Pose:
    arm = desc.arm(side)
    _, _, _, (r, p) = _chain(desc, arm, q7, torso)
    return Pose(p, quat_from_matrix(r))


def fingertip_point(desc: RobotDescription, q: JointVector, side: str) -> np.ndarray:
    """Midpoint between the fingertips, base frame."""
    pose = forward_kinematics(desc, q, side)
    arm = desc.arm(side)
    return pose.transform_point(np.array([arm.fingertip_offset, 0.0, 0.0]))


def fingertip_of_pose(arm: ArmModel, gripper: Pose) -> np.ndarray:
    return gripper.transform_point(np.array([arm.fingertip_offset, 0.0, 0.0]))


def _pose_error(r_cur: np.ndarray, p_cur: np.ndarray, goal: Pose):
    e_pos = goal.position - p_cur
    q_cur = quat_from_matrix(r_cur)
    # rotation taking current to goal, expressed in the base frame
    q_err = quat_multiply(goal.orientation, quat_conjugate(q_cur))
    return e_pos, rotvec_from_quat(q_err)


def _dls_descend(desc: RobotDescription, arm: ArmModel, q0: np.ndarray, torso: float,
                 goal: Pose, iters: int):
    """Damped least-squares descent from one seed.

    The damping term scales with the squared error (plus the configured
    floor) and doubles-up whenever a step fails to reduce the error,
    relaxing again on success; a posture bias toward the nominal elbow
    configuration runs through the damped null-space projector and fades as
    the error shrinks so it can never block convergence. Returns
    (q, evals, converged); gives up early once damping escalation stalls.
    """
    params = desc.ik
    lo, hi = arm.lower, arm.upper
    tol_p, tol_r = params.tol_pos, params.tol_rot
    i7 = np.eye(7)
    wn_floor = params.damping ** 2

    def evaluate(qv):
        origins, axes, _, (r, p) = _chain(desc, arm, qv, torso)
        e_pos, e_rot = _pose_error(r, p, goal)
        return origins, axes, p, e_pos, e_rot

    q = np.clip(np.asarray(q0, dtype=float), lo, hi)
    origins, axes, p_cur, e_pos, e_rot = evaluate(q)
    evals = 1
    wn = wn_floor
    stuck = 0
    while evals < iters:
        if np.linalg.norm(e_pos) <= tol_p and np.linalg.norm(e_rot) <= tol_r:
            return q, evals, True
        jac = np.empty((6, 7))
        jac[:3] = np.cross(axes, p_cur - origins).T
        jac[3:] = axes.T
        e = np.concatenate([e_pos, e_rot])
        err2 = 0.5 * float(e @ e)
        h = jac.T @ jac + (err2 + wn) * i7
        v = arm.nominal - q
        sol = np.linalg.solve(h, np.column_stack([jac.T @ e, jac.T @ (jac @ v)]))
        dq = sol[:, 0] + params.nullspace_gain * min(1.0, err2) * (v - sol[:, 1])
        step = float(np.max(np.abs(dq)))
        if step > params.max_joint_step:
            dq *= params.max_joint_step / step
        cand = np.clip(q + dq, lo, hi)
        c_o, c_a, c_p, c_ep, c_er = evaluate(cand)
        evals += 1
        if float(c_ep @ c_ep) + float(c_er @ c_er) < float(e_pos @ e_pos) + float(e_rot @ e_rot):
            q, origins, axes, p_cur, e_pos, e_rot = cand, c_o, c_a, c_p, c_ep, c_er
            wn = max(wn_floor, wn * 0.5)
            stuck = 0
        else:
            wn *= 2.0
            stuck += 1
            if wn > 1e3 or stuck > 8:
                return q, evals, False
    return q, evals, False


def _proximal_geometry(arm: ArmModel):
    """Pattern-match the chain for the analytic seed generator.

    Requires the shipped layout: vertical pan, two y-pitch joints separated
    by x-only link offsets, x-roll joints between, tool along x. Returns
    None when the description deviates (the solver then runs on random
    restarts only).
    """
    j = arm.joints
    axes_ok = (np.allclose(j[0].axis, [0, 0, 1]) and np.allclose(j[1].axis, [0, 1, 0])
               and np.allclose(j[2].axis, [1, 0, 0]) and np.allclose(j[3].axis, [0, 1, 0])
               and np.allclose(j[4].axis, [1, 0, 0]) and np.allclose(j[5].axis, [0, 1, 0])
               and np.allclose(j[6].axis, [1, 0, 0]))
    offsets_ok = all(abs(j[i].origin[1]) < 1e-12 and abs(j[i].origin[2]) < 1e-12
                     for i in range(1, 7))
    if not (axes_ok and offsets_ok and np.allclose(j[0].origin, 0)
            and abs(arm.tool.position[1]) < 1e-12 and abs(arm.tool.position[2]) < 1e-12):
        return None
    return {
        "off": float(j[1].origin[0]),
        "l1": float(j[3].origin[0]),
        "l2": float(j[5].origin[0]),
    }


def _pan_band_samples(geo, arm, rel, q1_pref, n):
    """Pan angles whose wrist-center distance fits between full stretch and
    the elbow-flex limit (an annular band of two arcs around the target
    bearing)."""
    l1, l2, off = geo["l1"], geo["l2"], geo["off"]
    dmax2 = (l1 + l2) ** 2
    dmin2 = l1 * l1 + l2 * l2 + 2 * l1 * l2 * math.cos(arm.joints[3].lo)
    a = float(rel @ rel) + off * off
    b = 2.0 * off * math.hypot(rel[0], rel[1])
    psi = math.atan2(rel[1], rel[0])
    lo1, hi1 = arm.joints[0].lo, arm.joints[0].hi
    if b < 1e-12:
        vals = list(np.linspace(lo1, hi1, n)) if dmin2 <= a <= dmax2 else []
    else:
        cmin = (a - dmax2) / b
        cmax = (a - dmin2) / b
        if cmin > 1.0 or cmax < -1.0:
            return []
        d_hi = math.acos(max(-1.0, min(1.0, cmin)))
        d_lo = math.acos(max(-1.0, min(1.0, cmax))) if cmax <= 1.0 else 0.0
        half = max(2, n // 2)
        vals = [normalize_angle(psi + v) for v in np.linspace(d_lo, d_hi, half)]
        vals += [normalize_angle(psi - v) for v in np.linspace(d_lo, d_hi, half)]
    vals = [v for v in vals if lo1 <= v <= hi1]
    vals.sort(key=lambda v: abs(v - q1_pref))
    return vals


def _proximal_candidates(geo, arm, rel, q1_pref, n):
    """Closed-form (q1..q4) tuples that place the wrist center at ``rel``
    (expressed relative to the shoulder), joint limits respected."""
    l1, l2, off = geo["l1"], geo["l2"], geo["off"]
    lo, hi = arm.lower, arm.upper
    out = []
    for q1 in _pan_band_samples(geo, arm, rel, q1_pref, n):
        c1, s1 = math.cos(q1), math.sin(q1)
        wp0 = c1 * rel[0] + s1 * rel[1] - off
        wp1 = -s1 * rel[0] + c1 * rel[1]
        wp2 = rel[2]
        d2 = wp0 * wp0 + wp1 * wp1 + wp2 * wp2
        cos4 = (d2 - l1 * l1 - l2 * l2) / (2 * l1 * l2)
        if not (-1.0 - 1e-9 <= cos4 <= 1.0 + 1e-9):
            continue
        q4 = -math.acos(max(-1.0, min(1.0, cos4)))
        if q4 < lo[3] - 1e-9 or q4 > hi[3] + 1e-9:
            continue
        q4 = min(max(q4, lo[3]), hi[3])
        kx = l1 + l2 * math.cos(q4)
        rho = math.hypot(wp0, wp2)
        if rho < 1e-9 or kx / rho > 1.0 + 1e-9:
            continue
        phi0 = math.atan2(wp2, wp0)
        base_a = math.acos(max(-1.0, min(1.0, kx / rho)))
        s4 = math.sin(q4)
        for sgn in (1.0, -1.0):
            q2 = normalize_angle(sgn * base_a - phi0)
            if q2 < lo[1] or q2 > hi[1]:
                continue
            c2, s2 = math.cos(q2), math.sin(q2)
            vy = wp1
            vz = s2 * wp0 + c2 * wp2
            if abs(s4) < 1e-9:
                q3 = arm.nominal[2]
            else:
                q3 = math.atan2(vy / (l2 * s4), -vz / (l2 * s4))
            if q3 < lo[2] or q3 > hi[2]:
                continue
            out.append(np.array([q1, q2, q3, q4]))
    return out


def _wrist_xyx(m: np.ndarray):
    """x-y-x Euler split of a wrist rotation with the flex angle in [-pi, 0]."""
    cb = min(1.0, max(-1.0, m[0, 0]))
    b = -math.acos(cb)
    sb = math.sin(b)
    if abs(sb) < 1e-8:
        return normalize_angle(math.atan2(m[2, 1], m[1, 1])), 0.0, 0.0
    a = math.atan2(m[1, 0] / sb, -m[2, 0] / sb)
    c = math.atan2(m[0, 1] / sb, m[0, 2] / sb)
    return normalize_angle(a), b, normalize_angle(c)


def solve_arm_ik(desc: RobotDescription, side: str, q7_start: np.ndarray,
                 torso: float, goal: Pose, max_iters: int | None = None) -> np.ndarray:
    """One-arm IK: damped least-squares stepping with a null-space bias
    toward the nominal posture, within joint limits and the configured
    tolerances (position 1 mm, rotation 0.5 degrees by default).

    The first descent starts from ``q7_start`` (so goals at or near the
    current pose resolve immediately and exactly). When that misses, restart
    seeds come from a closed-form decomposition that exploits the chain's
    spherical wrist: sample the pan angles whose wrist-center distance is
    geometrically admissible, solve the shoulder/elbow joints exactly, read
    the wrist angles off the residual rotation, and descend from each seed.
    ``max_iters`` (default from the description) bounds the total DLS
    iterations across all seeds; seed generation itself is closed-form and
    uncounted. Raises Unreachable when the budget is exhausted.
    """
    arm = desc.arm(side)
    params = desc.ik
    budget = params.max_iters if max_iters is None else max_iters
    lo, hi = arm.lower, arm.upper

    shoulder = _lift_origin(desc, JointVector(torso=torso)) + arm.mount.position
    if np.linalg.norm(goal.position - shoulder) > arm.reach + arm.fingertip_offset + 1e-6:
        raise Unreachable(f"goal {np.round(goal.position, 3)} outside {side} arm workspace")

    used = 0
    q, ev, ok = _dls_descend(desc, arm, q7_start, torso, goal,
                             min(12, budget))
    used += ev
    if ok:
        return q

    geo = _proximal_geometry(arm)
    if geo is not None:
        r_goal = quat_to_matrix(goal.orientation)
        rel = goal.position - r_goal @ arm.tool.position - shoulder
        clamped = []
        for n in (48, 512):
            for q4v in _proximal_candidates(geo, arm, rel, float(q7_start[0]), n):
                if used >= budget:
                    break
                _, _, frames, _ = _chain(desc, arm, np.concatenate([q4v, arm.nominal[4:]]), torso)
                a, b, c = _wrist_xyx(frames[3][0].T @ r_goal)
                over = max(0.0, lo[5] - b, b - hi[5])
                if over > 0.0:
                    clamped.append((over, q4v, a, min(max(b, lo[5]), hi[5]), c))
                    continue
                seed = np.clip(np.concatenate([q4v, [a, b, c]]), lo, hi)
                q, ev, ok = _dls_descend(desc, arm, seed, torso, goal, min(25, budget - used))
                used += ev
                if ok:
                    return q
        # rescue pass: least-clamped wrist seeds first
        clamped.sort(key=lambda t: t[0])
        for rank, (over, q4v, a, b, c) in enumerate(clamped):
            if used >= budget:
                break
            seed = np.clip(np.concatenate([q4v, [a, b, c]]), lo, hi)
            q, ev, ok = _dls_descend(desc, arm, seed, torso, goal,
                                     min(40 if rank < 3 else 15, budget - used))
            used += ev
            if ok:
                return q

    rng = np.random.default_rng(0x5EED)
    while used < budget:
        q, ev, ok = _dls_descend(desc, arm, rng.uniform(lo, hi), torso, goal,
                                 min(40, budget - used))
        used += ev
        if ok:
            return q
    raise Unreachable(f"no IK convergence for {side} arm within {budget} iterations")


def solve_ik_step(desc: RobotDescription, q_current: JointVector, goal: Pose, side: str) -> JointVector:
    """Full-joint-vector wrapper around :func:`solve_arm_ik`.

    Only the commanded arm's joints change; torso and head are untouched.
    A goal equal to FK(q_current) returns q_current unchanged.
    """
    validate_joints(desc, q_current)
    q7 = solve_arm_ik(desc, side, q_current.arm(side), q_current.torso, goal)
    out = q_current.copy()
    out.set_arm(side, q7)
    return out


def head_frame(desc: RobotDescription, q: JointVector) -> Pose:
    """Pose of the tilt frame in the base frame (before the camera mount).

    Positive pan turns left, positive tilt pitches the gaze down.
    """
    origin = _lift_origin(desc, q) + desc.head.offset
    r = _axis_angle_matrix(np.array([0.0, 0.0, 1.0]), q.head_pan) \
        @ _axis_angle_matrix(np.array([0.0, 1.0, 0.0]), q.head_tilt)
    return Pose(origin, quat_from_matrix(r))


def camera_pose(desc: RobotDescription, q: JointVector, camera=None,
                base: BasePose | None = None) -> Pose:
    """Optical-frame pose of a head camera in base (or world) frame."""
    cam = camera if camera is not None else desc.cameras["rgb"]
    pose = head_frame(desc, q).compose(cam.mount)
    if base is not None:
        pose = base.as_pose().compose(pose)
    return pose


def head_look_at(desc: RobotDescription, q: JointVector, target) -> tuple:
    """Pan/tilt placing ``target`` (base frame) on the optical axis.

    Values are clamped to the configured head limits; the unclamped solution
    is exact because the camera mount sits on the optical axis through the
    pan/tilt center. Raises DegenerateTarget for a zero-length gaze vector.
    """
    origin = _lift_origin(desc, q) + desc.head.offset
    d = np.asarray(target, dtype=float) - origin
    n = float(np.linalg.norm(d))
    if n < 1e-9:
        raise DegenerateTarget("look-at target coincides with the head origin")
    pan = math.atan2(d[1], d[0])
    tilt = -math.atan2(d[2], math.hypot(d[0], d[1]))
    pan = min(max(pan, desc.head.pan_limits[0]), desc.head.pan_limits[1])
    tilt = min(max(tilt, desc.head.tilt_limits[0]), desc.head.tilt_limits[1])
    return pan, tilt


def link_frame(desc: RobotDescription, q: JointVector, link: str) -> Pose:
    """Base-frame pose of a named link (skin patch hosts)."""
    if link == "base":
        return Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))
    name, _, side_tag = link.rpartition("-")
    side = "left" if side_tag == "L" else "right"
    arm = desc.arm(side)
    _, _, frames, _ = _chain(desc, arm, q.arm(side), q.torso)
    if name == "upper-arm":
        r, p = frames[2]   # after upperarm_roll: x runs shoulder -> elbow
    elif name == "forearm":
        r, p = frames[4]   # after forearm_roll: x runs elbow -> wrist
    else:
        raise KeyError(f"unknown link {link!r}")
    return Pose(p, quat_from_matrix(r))


def home_joints(desc: RobotDescription) -> JointVector:
    """Setup configuration: both arms at the nominal posture, head level."""
    q = JointVector(desc.arms["left"].nominal.copy(), desc.arms["right"].nominal.copy(),
                    torso=0.1, head_pan=0.0, head_tilt=0.5,
                    grip_l=0.0, grip_r=0.0)
    validate_joints(desc, q)
    return q

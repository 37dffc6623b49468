"""Independent reference implementations used to check the production code.

Everything here is written the straightforward, slow way (explicit 4x4
homogeneous matrices, brute-force enumeration) and deliberately shares no
code with the package internals it validates.
"""

import math

import numpy as np


def _rodrigues(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    kx, ky, kz = axis
    k = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def _hom(r=None, t=None):
    m = np.eye(4)
    if r is not None:
        m[:3, :3] = r
    if t is not None:
        m[:3, 3] = np.asarray(t, dtype=float)
    return m


def fk_matrix_chain(desc, side, q7, torso):
    """4x4 matrix-chain forward kinematics: base frame -> gripper frame."""
    arm = desc.arm(side)
    m = _hom(t=[0.0, 0.0, desc.torso_base_height + torso])
    m = m @ _hom(t=arm.mount.position)
    for joint, angle in zip(arm.joints, q7):
        m = m @ _hom(t=joint.origin) @ _hom(r=_rodrigues(joint.axis, angle))
    m = m @ _hom(t=arm.tool.position)
    return m


def fk_fingertip(desc, side, q7, torso):
    m = fk_matrix_chain(desc, side, q7, torso)
    tip = m @ np.array([desc.arm(side).fingertip_offset, 0.0, 0.0, 1.0])
    return tip[:3]


def matrix_to_quat_xyzw(m):
    # Shepperd's method, defensive and slow.
    r = np.asarray(m, dtype=float)[:3, :3]
    w = math.sqrt(max(0.0, 1.0 + r[0, 0] + r[1, 1] + r[2, 2])) / 2.0
    x = math.sqrt(max(0.0, 1.0 + r[0, 0] - r[1, 1] - r[2, 2])) / 2.0
    y = math.sqrt(max(0.0, 1.0 - r[0, 0] + r[1, 1] - r[2, 2])) / 2.0
    z = math.sqrt(max(0.0, 1.0 - r[0, 0] - r[1, 1] + r[2, 2])) / 2.0
    x = math.copysign(x, r[2, 1] - r[1, 2])
    y = math.copysign(y, r[0, 2] - r[2, 0])
    z = math.copysign(z, r[1, 0] - r[0, 1])
    q = np.array([x, y, z, w])
    return q / np.linalg.norm(q)


def pinhole_project(camera, cam_pose_matrix, point):
    """Pure matrix pinhole projection; None when behind the camera."""
    inv = np.linalg.inv(cam_pose_matrix)
    p = inv @ np.array([point[0], point[1], point[2], 1.0])
    if p[2] <= 0:
        return None
    u = camera.fx * p[0] / p[2] + camera.cx
    v = camera.fy * p[1] / p[2] + camera.cy
    return u, v


def camera_matrix(camera, head_pose):
    """4x4 optical-frame pose from a head pose and the camera mount."""
    def pose_to_matrix(pose):
        x, y, z, w = pose.orientation
        r = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ])
        return _hom(r=r, t=pose.position)
    return pose_to_matrix(head_pose) @ pose_to_matrix(camera.mount)


def wilcoxon_brute_force(diffs, tail="greater"):
    """Exact one-sided signed-rank p by enumerating all 2^n sign patterns.

    Requires tie-free |differences| and no zeros. Returns (W, p).
    """
    d = [x for x in diffs if x != 0]
    n = len(d)
    mags = sorted(abs(x) for x in d)
    assert len(set(mags)) == n, "oracle requires tie-free magnitudes"
    ranks = {m: i + 1 for i, m in enumerate(mags)}
    w_obs = sum(ranks[abs(x)] for x in d if x > 0)
    count = 0
    total = 2 ** n
    rank_list = [ranks[abs(x)] for x in d]
    for mask in range(total):
        w = 0
        for i in range(n):
            if mask >> i & 1:
                w += rank_list[i]
        if tail == "greater":
            if w >= w_obs:
                count += 1
        else:
            if w <= w_obs:
                count += 1
    return w_obs, count / total


def settle_support_z(scene_objects, x, y, below_z, floor_z=0.0):
    """Raycast straight down from (x, y, below_z): highest support top.

    ``scene_objects`` are (pose, shape, dims) tuples; only upward-facing box
    and cylinder tops (and the floor) can support.
    """
    best = floor_z
    for pose, shape, dims in scene_objects:
        local = pose.inverse_transform_point([x, y, below_z])
        if shape == "box":
            hx, hy, hz = dims[0] / 2, dims[1] / 2, dims[2] / 2
            inside = abs(local[0]) <= hx and abs(local[1]) <= hy
            top = pose.position[2] + hz
        elif shape == "cylinder":
            inside = math.hypot(local[0], local[1]) <= dims[0] / 2
            top = pose.position[2] + dims[1] / 2
        else:
            continue
        if inside and top <= below_z + 1e-9:
            best = max(best, top)
    return best

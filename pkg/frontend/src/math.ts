/** Minimal vector/quaternion/pose math mirroring the server conventions:
 * quaternions are [x, y, z, w], frames right-handed, z up. */

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export interface Pose {
  xyz: Vec3;
  quat: Quat;
}

export const IDENTITY: Quat = [0, 0, 0, 1];

export function vAdd(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function vSub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function vScale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function vNorm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

export function vNormalize(a: Vec3): Vec3 {
  const n = vNorm(a);
  return n > 0 ? vScale(a, 1 / n) : [0, 0, 0];
}

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [ax, ay, az, aw] = a;
  const [bx, by, bz, bw] = b;
  return [
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
    aw * bw - ax * bx - ay * by - az * bz,
  ];
}

export function quatConjugate(q: Quat): Quat {
  return [-q[0], -q[1], -q[2], q[3]];
}

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function quatFromAxisAngle(axis: Vec3, angle: number): Quat {
  const n = vNorm(axis);
  const half = angle / 2;
  const s = Math.sin(half) / n;
  return [axis[0] * s, axis[1] * s, axis[2] * s, Math.cos(half)];
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  const [qx, qy, qz, qw] = q;
  const tx = 2 * (qy * v[2] - qz * v[1]);
  const ty = 2 * (qz * v[0] - qx * v[2]);
  const tz = 2 * (qx * v[1] - qy * v[0]);
  return [
    v[0] + qw * tx + qy * tz - qz * ty,
    v[1] + qw * ty + qz * tx - qx * tz,
    v[2] + qw * tz + qx * ty - qy * tx,
  ];
}

export function poseTransform(p: Pose, v: Vec3): Vec3 {
  return vAdd(p.xyz, quatRotate(p.quat, v));
}

export function poseInverseTransform(p: Pose, v: Vec3): Vec3 {
  return quatRotate(quatConjugate(p.quat), vSub(v, p.xyz));
}

export function poseCompose(a: Pose, b: Pose): Pose {
  return {
    xyz: poseTransform(a, b.xyz),
    quat: quatNormalize(quatMultiply(a.quat, b.quat)),
  };
}

export function yawQuat(theta: number): Quat {
  return [0, 0, Math.sin(theta / 2), Math.cos(theta / 2)];
}

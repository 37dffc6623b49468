/** Client-side head-camera math: the same pinhole model, head kinematics,
 * and optical conventions as the server, driven by the constants served at
 * /constants.json. Click geometry computed here must match the server's
 * re-computation to within 5 mm. */

import {
  Pose, Quat, Vec3, poseCompose, quatRotate, vAdd, vNormalize, vScale,
  vSub, yawQuat, quatMultiply, quatFromAxisAngle,
} from "./math.js";

export interface CameraConstants {
  width: number;
  height: number;
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  mount_x: number;
}

export interface ClientConstants {
  camera: CameraConstants;
  head: { offset: Vec3; pan_limits: [number, number]; tilt_limits: [number, number] };
  torso: { base_height: number; travel: number };
  arm: { fingertip_offset: number; shoulder_offset_y: number };
  gripper: { aperture_max: number };
  steps: { translation: Record<string, number>; rotation: Record<string, number> };
  speeds: { drive_vmax: number; turn_wmax: number; drive_gain: number; deadman_s: number };
  peek: { descent_s: number; hold_s: number };
}

export interface JointsState {
  torso: number;
  head_pan: number;
  head_tilt: number;
  [k: string]: unknown;
}

export interface BaseState {
  x: number;
  y: number;
  theta: number;
}

/** head x-forward maps to camera z-forward, -y to x (right), -z to y (down) */
const OPTICAL: Quat = [0.5, -0.5, 0.5, -0.5];

export function headFrameWorld(c: ClientConstants, joints: JointsState,
                               base: BaseState): Pose {
  const origin: Vec3 = [
    c.head.offset[0],
    c.head.offset[1],
    c.torso.base_height + joints.torso + c.head.offset[2],
  ];
  const rot = quatMultiply(quatFromAxisAngle([0, 0, 1], joints.head_pan),
                           quatFromAxisAngle([0, 1, 0], joints.head_tilt));
  const headInBase: Pose = { xyz: origin, quat: rot };
  const basePose: Pose = { xyz: [base.x, base.y, 0], quat: yawQuat(base.theta) };
  return poseCompose(basePose, headInBase);
}

export function cameraPoseWorld(c: ClientConstants, joints: JointsState,
                                base: BaseState): Pose {
  const mount: Pose = { xyz: [c.camera.mount_x, 0, 0], quat: OPTICAL };
  return poseCompose(headFrameWorld(c, joints, base), mount);
}

export type Offscreen =
  | "left" | "right" | "top" | "bottom"
  | "top-left" | "top-right" | "bottom-left" | "bottom-right";

const SECTORS: Offscreen[] = ["right", "bottom-right", "bottom", "bottom-left",
                              "left", "top-left", "top", "top-right"];

function direction8(dx: number, dy: number): Offscreen {
  const ang = Math.atan2(dy, dx);
  const idx = ((Math.floor((ang + Math.PI / 8) / (Math.PI / 4)) % 8) + 8) % 8;
  return SECTORS[idx];
}

export type Projection = { kind: "pixel"; u: number; v: number; depth: number }
                       | { kind: "offscreen"; dir: Offscreen };

export function projectPoint(cam: CameraConstants, camPose: Pose, p: Vec3): Projection {
  const local = poseInverse(camPose, p);
  const [x, y, z] = local;
  if (z <= 1e-9) {
    return { kind: "offscreen", dir: direction8(x, y) };
  }
  const u = cam.fx * x / z + cam.cx;
  const v = cam.fy * y / z + cam.cy;
  if (u >= 0 && u <= cam.width - 1 && v >= 0 && v <= cam.height - 1) {
    return { kind: "pixel", u, v, depth: z };
  }
  return { kind: "offscreen", dir: direction8(u - cam.cx, v - cam.cy) };
}

function poseInverse(p: Pose, v: Vec3): Vec3 {
  const d = vSub(v, p.xyz);
  const q: Quat = [-p.quat[0], -p.quat[1], -p.quat[2], p.quat[3]];
  return quatRotate(q, d);
}

export function pixelRay(cam: CameraConstants, camPose: Pose,
                         u: number, v: number): { origin: Vec3; dir: Vec3 } {
  const dCam: Vec3 = [(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1];
  const dir = vNormalize(quatRotate(camPose.quat, dCam));
  return { origin: camPose.xyz, dir };
}

/** Intersection of the pixel ray with a horizontal plane; null when the ray
 * runs parallel or away. The ground is planeZ = 0; the control ring uses
 * the plane at the gripper height. */
export function pixelToPlane(cam: CameraConstants, camPose: Pose, u: number,
                             v: number, planeZ: number): Vec3 | null {
  const { origin, dir } = pixelRay(cam, camPose, u, v);
  if (Math.abs(dir[2]) < 1e-12) return null;
  const s = (planeZ - origin[2]) / dir[2];
  if (s <= 0) return null;
  const hit = vAdd(origin, vScale(dir, s));
  return [hit[0], hit[1], planeZ];
}

export function pixelToGround(cam: CameraConstants, camPose: Pose,
                              u: number, v: number): Vec3 | null {
  return pixelToPlane(cam, camPose, u, v, 0);
}

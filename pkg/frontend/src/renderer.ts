/** First-person scene renderer: projects the streamed scene through the
 * head camera into 2D draw operations (painter's algorithm). There is no
 * free camera: the view is always the robot's head, optionally lowered by
 * the peek animation. */

import { CameraConstants, projectPoint } from "./camera.js";
import { Pose, Quat, Vec3, poseCompose, poseTransform } from "./math.js";
import { PoseDict, StaticObject } from "./protocol.js";

export type DrawOp =
  | { op: "poly"; pts: [number, number][]; fill: string; depth: number }
  | { op: "circle"; u: number; v: number; r: number; fill: string; depth: number }
  | { op: "line"; pts: [number, number][]; stroke: string; width: number; depth: number };

function rgba(color: number[], alpha = 1, shade = 1): string {
  const [r, g, b] = color;
  return `rgba(${Math.round(r * 255 * shade)}, ${Math.round(g * 255 * shade)}, `
    + `${Math.round(b * 255 * shade)}, ${alpha})`;
}

const BOX_FACES: [number, number, number, number][] = [
  [0, 1, 3, 2], [4, 6, 7, 5], [0, 4, 5, 1], [2, 3, 7, 6], [0, 2, 6, 4], [1, 5, 7, 3],
];
const FACE_SHADE = [0.75, 0.95, 0.7, 0.85, 0.8, 0.9];

function boxCorners(dims: number[]): Vec3[] {
  const [hx, hy, hz] = [dims[0] / 2, dims[1] / 2, dims[2] / 2];
  const out: Vec3[] = [];
  for (const x of [-hx, hx]) for (const y of [-hy, hy]) for (const z of [-hz, hz]) {
    out.push([x, y, z]);
  }
  return out;
}

function projectAll(cam: CameraConstants, camPose: Pose, pts: Vec3[]):
  ({ u: number; v: number; depth: number } | null)[] {
  return pts.map((p) => {
    const proj = projectPoint(cam, camPose, p);
    return proj.kind === "pixel" ? proj : null;
  });
}

function drawBox(cam: CameraConstants, camPose: Pose, pose: Pose, dims: number[],
                 color: number[], out: DrawOp[]): void {
  const corners = boxCorners(dims).map((c) => poseTransform(pose, c));
  const projected = projectAll(cam, camPose, corners);
  BOX_FACES.forEach((face, i) => {
    const pts = face.map((idx) => projected[idx]);
    if (pts.some((p) => p === null)) return;
    const good = pts as { u: number; v: number; depth: number }[];
    const depth = good.reduce((s, p) => s + p.depth, 0) / 4;
    out.push({ op: "poly", pts: good.map((p) => [p.u, p.v]),
               fill: rgba(color, 1, FACE_SHADE[i]), depth });
  });
}

function drawCylinder(cam: CameraConstants, camPose: Pose, pose: Pose, dims: number[],
                      color: number[], out: DrawOp[]): void {
  const r = dims[0] / 2;
  const hh = dims[1] / 2;
  const n = 12;
  const ring = (z: number): Vec3[] => Array.from({ length: n }, (_, i) => {
    const a = (2 * Math.PI * i) / n;
    return poseTransform(pose, [r * Math.cos(a), r * Math.sin(a), z]);
  });
  const top = projectAll(cam, camPose, ring(hh));
  const bottom = projectAll(cam, camPose, ring(-hh));
  for (let i = 0; i < n; i++) {
    const quad = [top[i], top[(i + 1) % n], bottom[(i + 1) % n], bottom[i]];
    if (quad.some((p) => p === null)) continue;
    const good = quad as { u: number; v: number; depth: number }[];
    const depth = good.reduce((s, p) => s + p.depth, 0) / 4;
    out.push({ op: "poly", pts: good.map((p) => [p.u, p.v]),
               fill: rgba(color, 1, 0.7 + 0.25 * Math.cos((2 * Math.PI * i) / n)), depth });
  }
  if (!top.some((p) => p === null)) {
    const good = top as { u: number; v: number; depth: number }[];
    out.push({ op: "poly", pts: good.map((p) => [p.u, p.v]),
               fill: rgba(color, 1, 0.95),
               depth: good.reduce((s, p) => s + p.depth, 0) / n });
  }
}

function drawSphere(cam: CameraConstants, camPose: Pose, pose: Pose, dims: number[],
                    color: number[], out: DrawOp[]): void {
  const proj = projectPoint(cam, camPose, pose.xyz);
  if (proj.kind !== "pixel") return;
  const r = (dims[0] / 2) * cam.fx / proj.depth;
  out.push({ op: "circle", u: proj.u, v: proj.v, r, fill: rgba(color, 1, 0.85),
             depth: proj.depth });
}

export function renderScene(cam: CameraConstants, camPose: Pose,
                            statics: StaticObject[],
                            poses: Record<string, PoseDict>): DrawOp[] {
  const out: DrawOp[] = [];
  // floor grid for orientation cues
  for (let i = -6; i <= 6; i++) {
    for (const line of [
      [[i, -6, 0], [i, 6, 0]] as [Vec3, Vec3],
      [[-6, i, 0], [6, i, 0]] as [Vec3, Vec3],
    ]) {
      const a = projectPoint(cam, camPose, line[0]);
      const b = projectPoint(cam, camPose, line[1]);
      if (a.kind === "pixel" && b.kind === "pixel") {
        out.push({ op: "line", pts: [[a.u, a.v], [b.u, b.v]],
                   stroke: "rgba(150,150,160,0.35)", width: 1, depth: 50 });
      }
    }
  }
  for (const obj of statics) {
    const poseDict = poses[obj.id];
    if (!poseDict) continue;
    const pose: Pose = { xyz: poseDict.xyz as Vec3, quat: poseDict.quat as Quat };
    const parts = obj.shape === "composite" && obj.parts
      ? obj.parts.map((p) => ({ shape: p.shape, dims: p.dims,
                                pose: poseCompose(pose, { xyz: p.offset.xyz as Vec3,
                                                          quat: p.offset.quat as Quat }) }))
      : [{ shape: obj.shape, dims: obj.dims, pose }];
    for (const part of parts) {
      if (part.shape === "box") drawBox(cam, camPose, part.pose, part.dims, obj.color, out);
      else if (part.shape === "cylinder") drawCylinder(cam, camPose, part.pose, part.dims, obj.color, out);
      else if (part.shape === "sphere") drawSphere(cam, camPose, part.pose, part.dims, obj.color, out);
    }
  }
  out.sort((a, b) => b.depth - a.depth);   // painter: far first
  return out;
}

export function renderPeekPoints(cam: CameraConstants, camPose: Pose,
                                 points: number[][]): DrawOp[] {
  const out: DrawOp[] = [];
  for (const p of points) {
    const proj = projectPoint(cam, camPose, [p[0], p[1], p[2]]);
    if (proj.kind !== "pixel") continue;
    out.push({ op: "circle", u: proj.u, v: proj.v, r: Math.max(1.5, 4 / proj.depth),
               fill: rgba([p[3], p[4], p[5]]), depth: proj.depth });
  }
  out.sort((a, b) => b.depth - a.depth);
  return out;
}

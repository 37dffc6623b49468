/** Wire message types (see protocol.md at the repository root). */

export type Mode = "looking" | "driving" | "spine" | "hand-left" | "hand-right";
export type Side = "left" | "right";
export type StepLabel = "XS" | "S" | "M" | "L";

export interface PoseDict {
  xyz: number[];
  quat: number[];
}

export interface GoalDict {
  goal_id: number;
  subsystem: string;
  payload: Record<string, unknown> & { pose?: PoseDict };
  state: "active" | "reached" | "aborted" | "preempted";
  issued_at: number;
  command_seq: number | null;
  reason: string | null;
}

export interface Snapshot {
  type: "snapshot";
  seq: number;
  ts: number;
  tick: number;
  sim_time: number;
  joints: { arm_l: number[]; arm_r: number[]; torso: number; head_pan: number;
            head_tilt: number; grip_l: number; grip_r: number };
  base: { x: number; y: number; theta: number };
  grippers: Record<Side, { pose: PoseDict; fingertip: number[]; aperture: number }>;
  attached: Record<string, string>;
  contacts: ContactDict[];
  goals: Record<string, GoalDict>;
  step_sizes: Record<Side, StepLabel>;
  restriction: string;
}

export interface ContactDict {
  patch: string;
  object: string;
  kind: "arm" | "base";
  link_xyz: number[];
  world_xyz: number[];
  t: number;
  phase: "onset" | "ongoing" | "released";
}

export interface SceneMsg {
  type: "scene";
  objects: Record<string, PoseDict>;
  tick: number;
}

export interface StaticObject {
  id: string;
  shape: "box" | "cylinder" | "sphere" | "composite";
  dims: number[];
  color: number[];
  mass: string;
  parts?: { shape: string; dims: number[]; offset: PoseDict }[];
}

export interface Welcome {
  type: "welcome";
  session: string;
  role: "operator" | "spectator";
  protocol: number;
  restriction: string;
  scene: { name: string; objects: StaticObject[]; anchors: Record<string, number[]> };
  constants: import("./camera.js").ClientConstants;
}

export interface Ack {
  type: "ack";
  re: number;
  result: Record<string, unknown> & { goal?: GoalDict; pose?: PoseDict;
                                      reachable?: boolean };
}

export interface Reject {
  type: "reject";
  re: number | null;
  reason: string;
}

export interface GoalEvent {
  type: "event";
  kind: "goal";
  goal: GoalDict;
}

export interface ContactEvent {
  type: "event";
  kind: "contact";
  contact: ContactDict;
}

export interface PeekData {
  type: "peek_data";
  re: number;
  center: number[];
  radius: number;
  points: number[][];   // [x, y, z, r, g, b]
}

export type ServerMessage = Welcome | Ack | Reject | Snapshot | SceneMsg
  | GoalEvent | ContactEvent | PeekData
  | { type: "diagnostics"; battery: number; run_stop: boolean;
      calibration_ok: boolean; sim_time: number }
  | { type: "notice"; notice: Record<string, unknown>; re?: number }
  | { type: "bye"; reason: string };

export interface CommandParams {
  [k: string]: unknown;
}

export function commandMsg(seq: number, verb: string, params: CommandParams,
                           mode: Mode): string {
  return JSON.stringify({ type: "command", seq, ts: Date.now() / 1000, verb,
                          params, mode });
}

export function helloMsg(seq: number, token: string, name: string): string {
  return JSON.stringify({ type: "hello", seq, ts: Date.now() / 1000, token, name });
}

export function heartbeatMsg(seq: number): string {
  return JSON.stringify({ type: "heartbeat", seq, ts: Date.now() / 1000 });
}

export function peekMsg(seq: number, side: Side, radius = 0.3, stride = 6): string {
  return JSON.stringify({ type: "peek", seq, ts: Date.now() / 1000, side, radius,
                          stride });
}

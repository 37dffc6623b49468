/** AR overlay computation: pure functions from client state to drawable
 * overlay elements. Colors follow the fixed scheme: yellow preview, green
 * goal, red contacts. */

import { Offscreen, Projection, cameraPoseWorld, projectPoint } from "./camera.js";
import { Pose, Quat, Vec3 } from "./math.js";
import { UiModel } from "./modes.js";
import { ClientState } from "./state.js";

export const COLORS = {
  preview: "rgba(240, 220, 60, 0.55)",    // yellow, semi-transparent
  goal: "rgba(80, 220, 90, 0.55)",        // green, semi-transparent
  contact: "rgba(230, 40, 40, 0.9)",      // red
  ring: "rgba(250, 230, 90, 0.8)",
  trace: "rgba(120, 200, 255, 0.8)",
};

export type Overlay =
  | { kind: "control-ring"; center: Vec3; radius: number; headingMark: number }
  | { kind: "updown-arrows"; anchor: Vec3 }
  | { kind: "rotation-arrows"; anchor: Pose; arrows: string[] }
  | { kind: "preview-gripper"; pose: Pose; color: string; reachable: boolean }
  | { kind: "goal-gripper"; pose: Pose; color: string; goalId: number }
  | { kind: "contact-dot"; at: Projection; color: string }
  | { kind: "contact-square"; at: Projection; color: string }
  | { kind: "edge-flash"; dir: Offscreen; color: string }
  | { kind: "turn-buttons" }
  | { kind: "spine-slider"; fraction: number }
  | { kind: "gripper-sliders"; side: string; fraction: number }
  | { kind: "step-size-selector"; side: string; selected: string }
  | { kind: "eyeball-cursor" }
  | { kind: "peek-button" };

export const RING_RADIUS = 0.16;

function asPose(d: { xyz: number[]; quat: number[] }): Pose {
  return { xyz: d.xyz as Vec3, quat: d.quat as Quat };
}

export function computeOverlays(ui: UiModel, state: ClientState): Overlay[] {
  const out: Overlay[] = [];
  const menu = ui.menu();
  const snap = state.snapshot;
  const c = state.constants;
  if (!snap || !c) return out;

  if (menu.eyeballCursor) out.push({ kind: "eyeball-cursor" });
  if (menu.showTurnButtons) out.push({ kind: "turn-buttons" });
  if (menu.showSpineSlider) {
    out.push({ kind: "spine-slider", fraction: snap.joints.torso / c.torso.travel });
  }
  const side = ui.handSide;
  if (side !== null && !ui.peeking) {
    const grip = asPose(snap.grippers[side].pose);
    if (menu.showRing) {
      // horizontal disk at the gripper height, top marker aligned with the
      // base heading: rises and falls with the hand
      out.push({ kind: "control-ring", center: grip.xyz, radius: RING_RADIUS,
                 headingMark: snap.base.theta });
      out.push({ kind: "updown-arrows", anchor: grip.xyz });
    }
    if (menu.showRotationArrows) {
      out.push({ kind: "rotation-arrows", anchor: grip,
                 arrows: ["x+", "x-", "y+", "y-", "z+", "z-"] });
    }
    out.push({ kind: "gripper-sliders", side,
               fraction: snap.grippers[side].aperture / c.gripper.aperture_max });
    out.push({ kind: "step-size-selector", side, selected: snap.step_sizes[side] });
    if (state.preview && state.preview.side === side) {
      out.push({ kind: "preview-gripper", pose: asPose(state.preview.pose),
                 color: COLORS.preview, reachable: state.preview.reachable });
    }
    const goal = state.activeHandGoal(side);
    if (goal && goal.payload.pose) {
      out.push({ kind: "goal-gripper", pose: asPose(goal.payload.pose),
                 color: COLORS.goal, goalId: goal.goal_id });
    }
  }
  if (menu.showPeek) out.push({ kind: "peek-button" });

  // contacts: red dot (arm) or square (base) at the projected location,
  // nearest edge/corner flash when out of view
  const camPose = cameraPoseWorld(c, snap.joints, snap.base);
  for (const contact of state.contacts) {
    const proj = projectPoint(c.camera, camPose, contact.world_xyz as Vec3);
    if (proj.kind === "offscreen") {
      out.push({ kind: "edge-flash", dir: proj.dir, color: COLORS.contact });
    } else if (contact.kind === "arm") {
      out.push({ kind: "contact-dot", at: proj, color: COLORS.contact });
    } else {
      out.push({ kind: "contact-square", at: proj, color: COLORS.contact });
    }
  }
  return out;
}

/** Modal interface state: one active mode, hand sub-modes, per-hand step
 * sizes. Mode switches are client-local (the server runs every controller
 * concurrently), and every reachable action needs only cursor motion plus
 * a single button. */

import { Mode, Side, StepLabel } from "./protocol.js";

export const MODES: Mode[] = ["looking", "driving", "spine", "hand-left", "hand-right"];
export type HandSubMode = "position" | "rotation";

/** The complete set of input event types the interface listens to; the
 * single-button audit asserts nothing else is required. */
export const INPUT_EVENTS = ["pointermove", "pointerdown", "pointerup"] as const;

export interface ModeChange {
  stepSizeCommand?: { side: Side; label: StepLabel };
}

export class UiModel {
  mode: Mode = "looking";
  handSub: HandSubMode = "position";
  stepSizes: Record<Side, StepLabel> = { left: "M", right: "M" };
  peeking = false;

  get handSide(): Side | null {
    if (this.mode === "hand-left") return "left";
    if (this.mode === "hand-right") return "right";
    return null;
  }

  setMode(mode: Mode): void {
    // client-local: no server round trip; an ongoing robot goal is unaffected
    this.mode = mode;
    if (this.handSide === null) {
      this.peeking = false;
    }
  }

  setHandSub(sub: HandSubMode): void {
    this.handSub = sub;
  }

  /** Step size persists for all movements of that hand until adjusted,
   * across sub-mode and mode switches; the selection is mirrored to the
   * server, which stores it per arm. */
  selectStepSize(side: Side, label: StepLabel): ModeChange {
    this.stepSizes[side] = label;
    return { stepSizeCommand: { side, label } };
  }

  peekAvailable(): boolean {
    return this.handSide !== null;
  }

  /** Menu entries are stable chrome: the five primary modes on the left
   * edge, sub-mode toggle and step sizes only in hand modes. */
  menu(): { modes: Mode[]; showSpineSlider: boolean; showGripperSliders: boolean;
            showStepSizes: boolean; showRotationArrows: boolean;
            showRing: boolean; showPeek: boolean; showTurnButtons: boolean;
            eyeballCursor: boolean } {
    const hand = this.handSide !== null;
    return {
      modes: MODES,
      showSpineSlider: this.mode === "spine",
      showGripperSliders: hand,
      showStepSizes: hand,
      showRotationArrows: hand && this.handSub === "rotation",
      showRing: hand && this.handSub === "position",
      showPeek: this.peekAvailable(),
      showTurnButtons: this.mode === "driving",
      eyeballCursor: this.mode === "looking",
    };
  }
}

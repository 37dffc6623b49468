import { describe, expect, it } from "vitest";

import { INPUT_EVENTS, UiModel } from "../src/modes.js";

describe("modal interface model", () => {
  it("starts in looking mode with eyeball cursor and no hand chrome", () => {
    const ui = new UiModel();
    const menu = ui.menu();
    expect(ui.mode).toBe("looking");
    expect(menu.eyeballCursor).toBe(true);
    expect(menu.showRing).toBe(false);
    expect(menu.showPeek).toBe(false);
    expect(menu.modes).toHaveLength(5);
  });

  it("mode switches are client-local state changes", () => {
    const ui = new UiModel();
    ui.setMode("driving");
    expect(ui.menu().showTurnButtons).toBe(true);
    ui.setMode("spine");
    expect(ui.menu().showSpineSlider).toBe(true);
    ui.setMode("hand-left");
    expect(ui.handSide).toBe("left");
    expect(ui.menu().showRing).toBe(true);
    expect(ui.menu().showGripperSliders).toBe(true);
  });

  it("step size persists per hand across sub-mode and mode switches", () => {
    const ui = new UiModel();
    ui.setMode("hand-left");
    const change = ui.selectStepSize("left", "XS");
    expect(change.stepSizeCommand).toEqual({ side: "left", label: "XS" });
    ui.setHandSub("rotation");
    expect(ui.stepSizes.left).toBe("XS");
    ui.setMode("driving");
    ui.setMode("hand-left");
    expect(ui.stepSizes.left).toBe("XS");
    expect(ui.stepSizes.right).toBe("M");
  });

  it("rotation arrows replace the ring in the rotation sub-mode", () => {
    const ui = new UiModel();
    ui.setMode("hand-right");
    expect(ui.menu().showRing).toBe(true);
    expect(ui.menu().showRotationArrows).toBe(false);
    ui.setHandSub("rotation");
    expect(ui.menu().showRing).toBe(false);
    expect(ui.menu().showRotationArrows).toBe(true);
  });

  it("peek is available only in hand modes", () => {
    const ui = new UiModel();
    for (const mode of ["looking", "driving", "spine"] as const) {
      ui.setMode(mode);
      expect(ui.peekAvailable()).toBe(false);
      expect(ui.menu().showPeek).toBe(false);
    }
    for (const mode of ["hand-left", "hand-right"] as const) {
      ui.setMode(mode);
      expect(ui.peekAvailable()).toBe(true);
      expect(ui.menu().showPeek).toBe(true);
    }
  });

  it("single-button audit: pointer motion and one button suffice", () => {
    // the whole interface listens to exactly these event types: no
    // keyboard, no wheel, no context menu, no multi-button chords
    expect([...INPUT_EVENTS].sort()).toEqual(["pointerdown", "pointermove", "pointerup"]);
  });

  it("leaving a hand mode cancels the peek flag", () => {
    const ui = new UiModel();
    ui.setMode("hand-left");
    ui.peeking = true;
    ui.setMode("driving");
    expect(ui.peeking).toBe(false);
  });
});

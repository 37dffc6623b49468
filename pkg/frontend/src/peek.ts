/** The 3D-peek animation timeline: the render camera descends from head
 * height to gripper height over the descent window, holds the low view,
 * then returns. Live overlays stay suspended while active. */

export type PeekPhase = "idle" | "descending" | "holding" | "returning";

export class PeekController {
  readonly descentS: number;
  readonly holdS: number;
  readonly returnS: number;
  private startedAt: number | null = null;
  private readonly now: () => number;

  constructor(now: () => number, descentS = 0.3, holdS = 2.8, returnS = 0.3) {
    this.now = now;
    this.descentS = descentS;
    this.holdS = holdS;
    this.returnS = returnS;
  }

  start(): void {
    this.startedAt = this.now();
  }

  cancel(): void {
    this.startedAt = null;
  }

  phase(): PeekPhase {
    if (this.startedAt === null) return "idle";
    const t = this.now() - this.startedAt;
    if (t < this.descentS) return "descending";
    if (t < this.descentS + this.holdS) return "holding";
    if (t < this.descentS + this.holdS + this.returnS) return "returning";
    this.startedAt = null;
    return "idle";
  }

  /** 0 at head height, 1 fully lowered to the gripper. */
  blend(): number {
    if (this.startedAt === null) return 0;
    const t = this.now() - this.startedAt;
    if (t < this.descentS) return t / this.descentS;
    if (t < this.descentS + this.holdS) return 1;
    const back = t - this.descentS - this.holdS;
    if (back < this.returnS) return 1 - back / this.returnS;
    return 0;
  }

  get active(): boolean {
    return this.phase() !== "idle";
  }
}

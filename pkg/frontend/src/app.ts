/** Browser entry: wires the canvas, single-button pointer input, the
 * protocol client, and the render loop. The session token rides in the
 * page URL query (the bookmark contract). */

import { cameraPoseWorld, pixelToGround, pixelToPlane, projectPoint, ClientConstants } from "./camera.js";
import { Pose, Vec3, vAdd } from "./math.js";
import { INPUT_EVENTS, UiModel } from "./modes.js";
import { ProtocolClient } from "./net.js";
import { computeOverlays, Overlay, RING_RADIUS, COLORS } from "./overlays.js";
import { PeekController } from "./peek.js";
import { Mode, PeekData, Side } from "./protocol.js";
import { DrawOp, renderPeekPoints, renderScene } from "./renderer.js";
import { ClientState } from "./state.js";

const HOVER_DEBOUNCE_MS = 100;
const DRIVE_STREAM_MS = 100;    // 10 Hz while held

interface Cursor {
  u: number;                 // image-plane coordinates (camera pixels)
  v: number;
  down: boolean;
  overArrow: string | null;  // rotation arrow id under the cursor
}

export class App {
  ui = new UiModel();
  state = new ClientState();
  peek: PeekController;
  cursor: Cursor = { u: 0, v: 0, down: false, overArrow: null };
  client: ProtocolClient;
  peekPoints: number[][] = [];
  private canvas: HTMLCanvasElement;
  private driveTimer: number | null = null;
  private hoverTimer: number | null = null;
  private pendingPreviewSeq: number | null = null;

  constructor(canvas: HTMLCanvasElement, client: ProtocolClient) {
    this.canvas = canvas;
    this.client = client;
    this.peek = new PeekController(() => performance.now() / 1000);
    client.onMessage((msg) => {
      this.state.apply(msg as never);
      if (msg.type === "ack" && this.pendingPreviewSeq === msg.re) {
        const r = msg.result;
        if (r.pose && this.ui.handSide) {
          this.state.preview = { side: this.ui.handSide, pose: r.pose,
                                 reachable: Boolean(r.reachable) };
        }
        this.pendingPreviewSeq = null;
      }
      if (msg.type === "peek_data") {
        this.peekPoints = (msg as PeekData).points;
        this.peek.start();
      }
    });
    this.bindInput();
    requestAnimationFrame(() => this.frame());
  }

  // --- input: cursor motion plus one button only ---------------------------------

  private bindInput(): void {
    const toImage = (ev: PointerEvent): [number, number] => {
      const c = this.state.constants!;
      const rect = this.canvas.getBoundingClientRect();
      return [(ev.clientX - rect.left) * (c.camera.width / rect.width),
              (ev.clientY - rect.top) * (c.camera.height / rect.height)];
    };
    const handlers: Record<(typeof INPUT_EVENTS)[number], (ev: PointerEvent) => void> = {
      pointermove: (ev) => {
        if (!this.state.constants) return;
        [this.cursor.u, this.cursor.v] = toImage(ev);
        this.scheduleHoverPreview();
      },
      pointerdown: (ev) => {
        if (!this.state.constants) return;
        [this.cursor.u, this.cursor.v] = toImage(ev);
        this.cursor.down = true;
        this.onPress();
      },
      pointerup: () => {
        this.cursor.down = false;
        this.onRelease();
      },
    };
    for (const name of INPUT_EVENTS) {
      this.canvas.addEventListener(name, handlers[name] as EventListener);
    }
  }

  private onPress(): void {
    const mode = this.ui.mode;
    if (mode === "looking") {
      this.client.command("look", { pixel: [this.cursor.u, this.cursor.v] }, "looking");
    } else if (mode === "driving") {
      this.startDriveStream();
    } else if (mode === "spine") {
      const c = this.state.constants!;
      const fraction = 1 - Math.min(1, Math.max(0, this.cursor.v / c.camera.height));
      this.client.command("spine", { fraction }, "spine");
    } else if (this.ui.handSide) {
      this.onHandClick(this.ui.handSide);
    }
  }

  private onRelease(): void {
    if (this.driveTimer !== null) {
      clearInterval(this.driveTimer);
      this.driveTimer = null;
      this.client.command("drive", { held: false }, "driving");
    }
  }

  private startDriveStream(): void {
    const sendDrive = () => {
      if (!this.cursor.down) return;
      const target = this.groundUnderCursor();
      if (target) {
        this.client.command("drive",
                            { pixel: [this.cursor.u, this.cursor.v], held: true },
                            "driving");
      }
    };
    sendDrive();
    this.driveTimer = setInterval(sendDrive, DRIVE_STREAM_MS) as unknown as number;
  }

  private onHandClick(side: Side): void {
    const snap = this.state.snapshot;
    const c = this.state.constants;
    if (!snap || !c) return;
    const mode: Mode = side === "left" ? "hand-left" : "hand-right";
    if (this.ui.handSub === "rotation" && this.cursor.overArrow) {
      this.client.command("hand_rotate", { side, arrow: this.cursor.overArrow }, mode);
      return;
    }
    const ringPoint = this.ringPointUnderCursor(side);
    if (ringPoint) {
      this.client.command("hand_step", { side, point: ringPoint }, mode);
    }
  }

  // --- click geometry (shared math with the server) --------------------------------

  groundUnderCursor(): Vec3 | null {
    const snap = this.state.snapshot;
    const c = this.state.constants;
    if (!snap || !c) return null;
    const camPose = cameraPoseWorld(c, snap.joints, snap.base);
    return pixelToGround(c.camera, camPose, this.cursor.u, this.cursor.v);
  }

  ringPointUnderCursor(side: Side): Vec3 | null {
    const snap = this.state.snapshot;
    const c = this.state.constants;
    if (!snap || !c) return null;
    const planeZ = snap.grippers[side].pose.xyz[2];
    const camPose = cameraPoseWorld(c, snap.joints, snap.base);
    return pixelToPlane(c.camera, camPose, this.cursor.u, this.cursor.v, planeZ);
  }

  // --- hover previews ----------------------------------------------------------------

  private scheduleHoverPreview(): void {
    const side = this.ui.handSide;
    if (!side) return;
    if (this.hoverTimer !== null) clearTimeout(this.hoverTimer);
    this.hoverTimer = setTimeout(() => {
      const mode: Mode = side === "left" ? "hand-left" : "hand-right";
      if (this.ui.handSub === "rotation" && this.cursor.overArrow) {
        this.pendingPreviewSeq = this.client.requestPreview(
          side, { verb: "hand_rotate", params: { side, arrow: this.cursor.overArrow } },
          mode);
      } else {
        const point = this.ringPointUnderCursor(side);
        if (point) {
          this.pendingPreviewSeq = this.client.requestPreview(
            side, { verb: "hand_step", params: { side, point } }, mode);
        }
      }
    }, HOVER_DEBOUNCE_MS) as unknown as number;
  }

  // --- peek ---------------------------------------------------------------------------

  triggerPeek(): void {
    const side = this.ui.handSide;
    if (!side || !this.ui.peekAvailable()) return;
    this.ui.peeking = true;
    this.client.requestPeek(side);
  }

  // --- render loop ----------------------------------------------------------------------

  private frame(): void {
    const ctx = this.canvas.getContext("2d");
    const snap = this.state.snapshot;
    const c = this.state.constants;
    if (ctx && snap && c) {
      let camPose = cameraPoseWorld(c, snap.joints, snap.base);
      const blend = this.peek.blend();
      if (blend > 0 && this.ui.handSide) {
        const gripZ = snap.grippers[this.ui.handSide].pose.xyz[2];
        camPose = { xyz: [camPose.xyz[0], camPose.xyz[1],
                          camPose.xyz[2] + blend * (gripZ - camPose.xyz[2])],
                    quat: camPose.quat };
      }
      this.ui.peeking = this.peek.active;
      const scale = this.canvas.width / c.camera.width;
      ctx.save();
      ctx.scale(scale, scale);
      ctx.clearRect(0, 0, c.camera.width, c.camera.height);
      const ops = renderScene(c.camera, camPose, this.state.staticObjects,
                              this.state.objectPoses);
      drawOps(ctx, ops);
      if (this.peek.active) {
        drawOps(ctx, renderPeekPoints(c.camera, camPose, this.peekPoints));
      } else {
        drawOverlays(ctx, c, camPose, computeOverlays(this.ui, this.state));
      }
      ctx.restore();
    }
    requestAnimationFrame(() => this.frame());
  }
}

function drawOps(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  for (const op of ops) {
    if (op.op === "poly") {
      ctx.fillStyle = op.fill;
      ctx.beginPath();
      op.pts.forEach(([u, v], i) => (i ? ctx.lineTo(u, v) : ctx.moveTo(u, v)));
      ctx.closePath();
      ctx.fill();
    } else if (op.op === "circle") {
      ctx.fillStyle = op.fill;
      ctx.beginPath();
      ctx.arc(op.u, op.v, op.r, 0, 2 * Math.PI);
      ctx.fill();
    } else {
      ctx.strokeStyle = op.stroke;
      ctx.lineWidth = op.width;
      ctx.beginPath();
      op.pts.forEach(([u, v], i) => (i ? ctx.lineTo(u, v) : ctx.moveTo(u, v)));
      ctx.stroke();
    }
  }
}

function drawOverlays(ctx: CanvasRenderingContext2D, c: ClientConstants, camPose: Pose,
                      overlays: Overlay[]): void {
  for (const ov of overlays) {
    if (ov.kind === "control-ring") {
      ctx.strokeStyle = COLORS.ring;
      ctx.lineWidth = 3;
      ctx.beginPath();
      let started = false;
      for (let i = 0; i <= 48; i++) {
        const a = ov.headingMark + (2 * Math.PI * i) / 48;
        const p: Vec3 = vAdd(ov.center, [RING_RADIUS * Math.cos(a),
                                         RING_RADIUS * Math.sin(a), 0]);
        const proj = projectPoint(c.camera, camPose, p);
        if (proj.kind !== "pixel") { started = false; continue; }
        if (!started) { ctx.moveTo(proj.u, proj.v); started = true; }
        else ctx.lineTo(proj.u, proj.v);
      }
      ctx.stroke();
    } else if (ov.kind === "preview-gripper" || ov.kind === "goal-gripper") {
      const proj = projectPoint(c.camera, camPose, ov.pose.xyz);
      if (proj.kind === "pixel") {
        ctx.fillStyle = ov.color;
        ctx.beginPath();
        ctx.arc(proj.u, proj.v, 900 / proj.depth, 0, 2 * Math.PI);
        ctx.fill();
      }
    } else if (ov.kind === "contact-dot" && ov.at.kind === "pixel") {
      ctx.fillStyle = ov.color;
      ctx.beginPath();
      ctx.arc(ov.at.u, ov.at.v, 14, 0, 2 * Math.PI);
      ctx.fill();
    } else if (ov.kind === "contact-square" && ov.at.kind === "pixel") {
      ctx.fillStyle = ov.color;
      ctx.fillRect(ov.at.u - 14, ov.at.v - 14, 28, 28);
    } else if (ov.kind === "edge-flash") {
      ctx.fillStyle = ov.color;
      const w = c.camera.width;
      const h = c.camera.height;
      const t = 26;
      if (ov.dir.includes("left")) ctx.fillRect(0, 0, t, h);
      if (ov.dir.includes("right")) ctx.fillRect(w - t, 0, t, h);
      if (ov.dir.includes("top")) ctx.fillRect(0, 0, w, t);
      if (ov.dir.includes("bottom")) ctx.fillRect(0, h - t, w, t);
    }
  }
}

export function startBrowserApp(): void {
  const params = new URLSearchParams(window.location.search);
  const token = params.get("token") ?? "";
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const proto = window.location.protocol === "https:" ? "wss" : "ws";
  const ws = new WebSocket(`${proto}://${window.location.host}/ws?token=${token}`);
  const adapter = {
    send: (d: string) => ws.send(d),
    close: () => ws.close(),
    onmessage: null as ((ev: { data: string }) => void) | null,
    onclose: null as (() => void) | null,
    onopen: null as (() => void) | null,
  };
  ws.onmessage = (ev) => adapter.onmessage?.({ data: String(ev.data) });
  ws.onclose = () => adapter.onclose?.();
  ws.onopen = () => {
    const client = new ProtocolClient(adapter, token, "browser");
    const app = new App(canvas, client);
    wireChrome(app);
  };
}

function wireChrome(app: App): void {
  const menu = document.getElementById("menu")!;
  const modes: [Mode, string][] = [["looking", "Looking"], ["driving", "Driving"],
                                   ["spine", "Spine"], ["hand-left", "Left Hand"],
                                   ["hand-right", "Right Hand"]];
  for (const [mode, label] of modes) {
    const btn = document.createElement("button");
    btn.textContent = label;
    btn.addEventListener("pointerup", () => app.ui.setMode(mode));
    menu.appendChild(btn);
  }
  const peekBtn = document.getElementById("peek")!;
  peekBtn.addEventListener("pointerup", () => app.triggerPeek());
}

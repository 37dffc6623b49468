/** Client-side state store: the latest self-contained snapshot wins;
 * reconnecting mid-session re-renders an equivalent view from the next
 * snapshot alone (no hidden client state). */

import { ClientConstants } from "./camera.js";
import {
  ContactDict, GoalDict, PoseDict, SceneMsg, ServerMessage, Snapshot, StaticObject,
  Welcome,
} from "./protocol.js";

export interface PendingPreview {
  side: string;
  pose: PoseDict;
  reachable: boolean;
}

export class ClientState {
  constants: ClientConstants | null = null;
  role = "";
  restriction = "full";
  sceneName = "";
  staticObjects: StaticObject[] = [];
  anchors: Record<string, number[]> = {};
  snapshot: Snapshot | null = null;
  objectPoses: Record<string, PoseDict> = {};
  contacts: ContactDict[] = [];
  lastGoalEvents: GoalDict[] = [];
  preview: PendingPreview | null = null;
  notices: string[] = [];
  closed = false;

  apply(msg: ServerMessage): void {
    switch (msg.type) {
      case "welcome": {
        const w = msg as Welcome;
        this.constants = w.constants;
        this.role = w.role;
        this.restriction = w.restriction;
        this.sceneName = w.scene.name;
        this.staticObjects = w.scene.objects;
        this.anchors = w.scene.anchors;
        break;
      }
      case "snapshot": {
        const s = msg as Snapshot;
        if (!this.snapshot || s.tick >= this.snapshot.tick) {
          this.snapshot = s;
          this.contacts = s.contacts;
          this.restriction = s.restriction;
        }
        break;
      }
      case "scene": {
        const sc = msg as SceneMsg;
        this.objectPoses = sc.objects;
        break;
      }
      case "event": {
        if (msg.kind === "goal") {
          this.lastGoalEvents.push(msg.goal);
          if (this.lastGoalEvents.length > 64) this.lastGoalEvents.shift();
        } else if (msg.kind === "contact") {
          // edges update the live list between snapshots
          const c = msg.contact;
          if (c.phase === "released") {
            this.contacts = this.contacts.filter(
              (e) => !(e.patch === c.patch && e.object === c.object));
          } else {
            this.contacts = [...this.contacts.filter(
              (e) => !(e.patch === c.patch && e.object === c.object)), c];
          }
        }
        break;
      }
      case "notice":
        this.notices.push(JSON.stringify(msg.notice));
        if (this.notices.length > 16) this.notices.shift();
        break;
      case "bye":
        this.closed = true;
        break;
      default:
        break;
    }
  }

  /** The green goal marker for a hand: the active arm goal's pose, cleared
   * as soon as the subsystem's goal leaves the active state. */
  activeHandGoal(side: "left" | "right"): GoalDict | null {
    const key = side === "left" ? "arm-L" : "arm-R";
    const goal = this.snapshot?.goals?.[key];
    return goal && goal.state === "active" ? goal : null;
  }
}

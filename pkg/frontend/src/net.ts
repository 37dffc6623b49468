/** Protocol client over a WebSocket-like transport. The browser passes the
 * native WebSocket; tests pass a node socket adapter with the same shape. */

import { CommandParams, Mode, ServerMessage, Side, commandMsg, heartbeatMsg, helloMsg,
         peekMsg } from "./protocol.js";

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
}

export class ProtocolClient {
  private ws: WebSocketLike;
  private seq = 0;
  private listeners: ((msg: ServerMessage) => void)[] = [];
  private heartbeatTimer: ReturnType<typeof setInterval> | null = null;
  closed = false;

  constructor(ws: WebSocketLike, token: string, name: string) {
    this.ws = ws;
    ws.onmessage = (ev) => {
      const msg = JSON.parse(ev.data) as ServerMessage;
      for (const fn of this.listeners) fn(msg);
    };
    ws.onclose = () => {
      this.closed = true;
      if (this.heartbeatTimer !== null) clearInterval(this.heartbeatTimer);
    };
    this.ws.send(helloMsg(++this.seq, token, name));
    this.heartbeatTimer = setInterval(() => {
      if (!this.closed) this.ws.send(heartbeatMsg(++this.seq));
    }, 1000);
  }

  onMessage(fn: (msg: ServerMessage) => void): void {
    this.listeners.push(fn);
  }

  command(verb: string, params: CommandParams, mode: Mode): number {
    const seq = ++this.seq;
    this.ws.send(commandMsg(seq, verb, params, mode));
    return seq;
  }

  requestPreview(side: Side, of: { verb: string; params: CommandParams },
                 mode: Mode): number {
    return this.command("preview", { side, of }, mode);
  }

  requestPeek(side: Side): number {
    const seq = ++this.seq;
    this.ws.send(peekMsg(seq, side));
    return seq;
  }

  close(): void {
    this.closed = true;
    if (this.heartbeatTimer !== null) clearInterval(this.heartbeatTimer);
    this.ws.close();
  }
}

"""Teleoperation server: the network boundary between browser/agent clients
and the simulation loop.

Sessions speak length-delimited JSON over WebSocket (or an in-process
channel with identical semantics for deterministic harness runs). One
operator holds the lock; everyone else spectates. Commands are validated,
appended to the session log, then dispatched; state snapshots broadcast at
10 Hz with latest-wins coalescing while events (acks, goal transitions,
contacts) are delivered reliably and in order.
"""

from __future__ import annotations

import collections
import json
import queue
import socket
import threading
import time
import uuid
from pathlib import Path

from . import protocol, wsock
from .control import Command, CommandRejected, StepSize
from .sim import SimSession
from .telemetry import TelemetryWriter

SNAPSHOT_DIVISOR = 5          # 50 Hz sim -> 10 Hz snapshots
DIAG_DIVISOR = 50             # 1 Hz diagnostics
SESSION_TIMEOUT_S = 10.0
COALESCED_TYPES = ("snapshot", "scene", "diagnostics")
FAST_BURST_TICKS = 40         # fast mode: bursts between yields


class _TcpTransport:
    """Writer-thread transport: reliable ordered events plus latest-wins
    slots for coalesced snapshot types."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.events = collections.deque()
        self.latest = {}
        self.cv = threading.Condition()
        self.closed = False
        self.seq = 0
        self.thread = threading.Thread(target=self._run, daemon=True)
        self.thread.start()

    def push(self, msg: dict):
        with self.cv:
            if self.closed:
                return
            if msg.get("type") in COALESCED_TYPES:
                self.latest[msg["type"]] = msg
            else:
                self.events.append(msg)
            self.cv.notify()

    def _next_batch(self, timeout=0.5):
        with self.cv:
            if not self.events and not self.latest:
                self.cv.wait(timeout)
            batch = list(self.events)
            self.events.clear()
            for key in ("snapshot", "scene", "diagnostics"):
                msg = self.latest.pop(key, None)
                if msg is not None:
                    batch.append(msg)
            return batch

    def _run(self):
        try:
            while not self.closed:
                batch = self._next_batch()
                if not batch:
                    continue
                buf = bytearray()
                for msg in batch:
                    self.seq += 1
                    msg["seq"] = self.seq
                    buf += wsock.encode_frame(protocol.encode(msg))
                self.sock.sendall(bytes(buf))
        except OSError:
            pass
        finally:
            self.close()

    def close(self):
        with self.cv:
            self.closed = True
            self.cv.notify_all()
        try:
            self.sock.close()
        except OSError:
            pass


class _LocalTransport:
    """Deterministic in-process transport: every message delivered, in order,
    through the same JSON codec as the wire."""

    def __init__(self):
        self.inbox = collections.deque()
        self.closed = False
        self.seq = 0

    def push(self, msg: dict):
        if self.closed:
            return
        self.seq += 1
        msg["seq"] = self.seq
        self.inbox.append(protocol.encode(msg))

    def close(self):
        self.closed = True


class ClientSession:
    def __init__(self, server, transport, name: str = ""):
        self.server = server
        self.transport = transport
        self.session_id = uuid.uuid4().hex[:8]
        self.name = name
        self.role = None              # operator | spectator (set at hello)
        self.authed = False
        self.last_seq = 0
        self.last_recv_wall = time.monotonic()
        self.connected_at = None
        self.closed = False

    def push(self, msg: dict):
        msg.setdefault("ts", self.server.sim.world.clock)
        self.transport.push(msg)

    def close(self, reason: str = ""):
        if self.closed:
            return
        self.closed = True
        if reason:
            try:
                self.push({"type": "bye", "reason": reason})
            except Exception:
                pass
        self.transport.close()
        self.server._drop_session(self)


class LocalClient:
    """Harness-side handle for an in-process session."""

    def __init__(self, server, transport: _LocalTransport, session: ClientSession):
        self.server = server
        self.transport = transport
        self.session = session
        self.seq = 0

    def send(self, msg: dict) -> int:
        self.seq += 1
        msg = {"seq": self.seq, "ts": self.server.sim.world.clock, **msg}
        data = protocol.encode(msg)      # exercise the codec both ways
        self.server._enqueue(self.session, protocol.decode(data))
        return self.seq

    def recv(self):
        if not self.transport.inbox:
            return None
        return protocol.decode(self.transport.inbox.popleft())

    def drain(self) -> list:
        out = []
        while self.transport.inbox:
            out.append(protocol.decode(self.transport.inbox.popleft()))
        return out


class TeleopServer:
    def __init__(self, scene: str = "empty", token: str = "", restriction: str = "full",
                 rate_hz: float = 50.0, battery_hours: float = 8.0,
                 port: int | None = None, static_roots=(), log_dir=None,
                 mode: str = "realtime", sync_log: bool = False):
        if restriction not in protocol.RESTRICTIONS:
            raise ValueError(f"unknown restriction {restriction!r}")
        self.sim = SimSession(scene=scene, rate_hz=rate_hz, battery_hours=battery_hours)
        self.token = token
        self.restriction = restriction
        self.mode = mode
        self.port = port
        self.static_roots = [Path(p) for p in static_roots]
        self.sessions: list = []
        self.operator: ClientSession | None = None
        self._lock = threading.RLock()
        self._inbox: queue.Queue = queue.Queue()
        self._listener = None
        self._threads: list = []
        self._running = False
        self.telemetry = None
        if log_dir is not None:
            Path(log_dir).mkdir(parents=True, exist_ok=True)
            sid = uuid.uuid4().hex[:8]
            self.telemetry = TelemetryWriter(
                Path(log_dir) / f"session-{sid}.ndjson", sid, scene, rate_hz,
                sync=sync_log or mode == "lockstep")

    # --- lifecycle -------------------------------------------------------------

    def start(self):
        self._running = True
        if self.port is not None:
            self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            self._listener.bind(("127.0.0.1", self.port))
            self._listener.listen(16)
            self.port = self._listener.getsockname()[1]
            t = threading.Thread(target=self._accept_loop, daemon=True)
            t.start()
            self._threads.append(t)
        if self.mode in ("realtime", "fast"):
            t = threading.Thread(target=self._sim_loop, daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def stop(self):
        self._running = False
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            for s in list(self.sessions):
                s.close("server shutdown")
        if self.telemetry is not None:
            self.telemetry.close()

    # --- connection plumbing ------------------------------------------------------

    def _accept_loop(self):
        while self._running:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._handle_conn, args=(conn,), daemon=True).start()

    def _handle_conn(self, conn: socket.socket):
        try:
            kind, info = wsock.server_handshake(conn)
        except (ValueError, ConnectionError, OSError):
            conn.close()
            return
        if kind == "http":
            _, _, path = info
            try:
                wsock.serve_static(conn, path, self.static_roots,
                                   extra_routes={"/constants.json": self._constants_json})
            except OSError:
                pass
            finally:
                conn.close()
            return
        session = ClientSession(self, _TcpTransport(conn))
        with self._lock:
            self.sessions.append(session)
        try:
            while self._running and not session.closed:
                opcode, payload = wsock.read_message(conn)
                if opcode == wsock.OP_CLOSE:
                    break
                session.last_recv_wall = time.monotonic()
                try:
                    msg = protocol.decode(payload)
                except protocol.ProtocolError as e:
                    session.push({"type": "reject", "re": None, "reason": str(e)})
                    continue
                self._enqueue(session, msg)
        except (ConnectionError, OSError):
            pass
        finally:
            session.close()

    def connect_local(self, token: str | None = None, name: str = "local") -> LocalClient:
        transport = _LocalTransport()
        session = ClientSession(self, transport, name=name)
        with self._lock:
            self.sessions.append(session)
        client = LocalClient(self, transport, session)
        client.send({"type": "hello", "token": self.token if token is None else token,
                     "name": name})
        if self.mode == "lockstep":
            self.process_inbox()
        return client

    def _drop_session(self, session: ClientSession):
        with self._lock:
            if session in self.sessions:
                self.sessions.remove(session)
            if self.operator is session:
                self.operator = None

    def _enqueue(self, session: ClientSession, msg: dict):
        self._inbox.put((session, msg))

    # --- the sim loop ----------------------------------------------------------------

    def _sim_loop(self):
        period = self.sim.dt
        next_tick = time.monotonic()
        burst = 0
        while self._running:
            self.tick_once()
            if self.mode == "realtime":
                next_tick += period
                delay = next_tick - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_tick = time.monotonic()
                self._check_timeouts()
            else:
                # fast mode: sim time unthrottled, but yield so transport
                # threads are never starved
                burst += 1
                if burst >= FAST_BURST_TICKS:
                    burst = 0
                    time.sleep(0.002)

    def _check_timeouts(self):
        now = time.monotonic()
        with self._lock:
            stale = [s for s in self.sessions
                     if now - s.last_recv_wall > SESSION_TIMEOUT_S]
        for s in stale:
            s.close("session timeout: no heartbeat")

    def process_inbox(self):
        while True:
            try:
                session, msg = self._inbox.get_nowait()
            except queue.Empty:
                return
            self._handle_message(session, msg)

    def tick_once(self):
        """Drain the inbox, advance the sim one tick, broadcast."""
        self.process_inbox()
        events = self.sim.tick()
        if self.telemetry is not None:
            self.telemetry.on_tick(self.sim.world, events.transitions, events.contacts)
        self._broadcast(events)

    def run_until_idle(self, timeout: float = 60.0):
        """Lockstep helper: tick until no goal or motion target is pending."""
        deadline = self.sim.world.clock + timeout
        while self.sim.world.clock < deadline:
            self.tick_once()
            act = self.sim.world.actuation
            busy = (act.arm_plans or act.torso_target is not None
                    or act.head_target is not None or act.grip_targets
                    or act.grasp_requests
                    or any(g.state == "active" for g in self.sim.control.goals.values()))
            if not busy:
                return

    # --- ingest ---------------------------------------------------------------------

    def _handle_message(self, session: ClientSession, msg: dict):
        try:
            protocol.validate_client_message(msg)
        except protocol.ProtocolError as e:
            session.push({"type": "reject", "re": msg.get("seq"), "reason": str(e)})
            return
        mtype = msg["type"]
        seq = msg["seq"]
        if mtype == "hello":
            self._handle_hello(session, msg)
            return
        if not session.authed:
            session.push({"type": "reject", "re": seq, "reason": "hello first"})
            return
        if seq <= session.last_seq:
            return                     # stale or duplicate: dropped silently
        session.last_seq = seq
        if mtype == "heartbeat":
            return
        if mtype == "claim_lock":
            with self._lock:
                if self.operator is None or self.operator.closed:
                    self.operator = session
                    session.role = "operator"
                    session.push({"type": "ack", "re": seq, "result": {"role": "operator"}})
                else:
                    session.push({"type": "reject", "re": seq,
                                  "reason": "operator lock held"})
            return
        if mtype == "peek":
            self._handle_peek(session, msg)
            return
        self._handle_command(session, msg)

    def _handle_hello(self, session: ClientSession, msg: dict):
        if msg.get("token") != self.token:
            session.push({"type": "reject", "re": msg["seq"], "reason": "bad token"})
            session.close("bad token")
            return
        session.authed = True
        session.name = msg.get("name", session.name)
        session.connected_at = self.sim.world.clock
        with self._lock:
            if self.operator is None:
                self.operator = session
                session.role = "operator"
            else:
                session.role = "spectator"
        world = self.sim.world
        session.push({
            "type": "welcome", "re": msg["seq"], "session": session.session_id,
            "role": session.role, "protocol": protocol.PROTOCOL_VERSION,
            "restriction": self.restriction,
            "scene": {"name": world.scene_name,
                      "objects": self._static_objects(),
                      "anchors": {k: [float(x) for x in v]
                                  for k, v in world.anchors.items()}},
            "constants": self._client_constants(),
        })
        session.push(self._snapshot_msg())
        session.push(self._scene_msg())

    def _handle_peek(self, session: ClientSession, msg: dict):
        side = msg["side"]
        if self.restriction != "full" and not self.restriction.endswith(side):
            session.push({"type": "reject", "re": msg["seq"],
                          "reason": f"restriction {self.restriction} blocks {side} peek"})
            return
        world = self.sim.world
        center = world.fingertip_world(side)
        radius = float(msg.get("radius", 0.3))
        stride = int(msg.get("stride", 6))
        pts, colors = world.sample_depth_region(center, radius, stride)
        payload = [[round(float(v), 4) for v in p] + [round(float(c), 3) for c in col]
                   for p, col in zip(pts, colors)]
        session.push({"type": "peek_data", "re": msg["seq"],
                      "center": [float(v) for v in center], "radius": radius,
                      "points": payload})

    def _handle_command(self, session: ClientSession, msg: dict):
        seq = msg["seq"]
        if session.role != "operator":
            session.push({"type": "reject", "re": seq, "reason": "spectators cannot command"})
            return
        verb = msg["verb"]
        params = msg.get("params", {})
        if not protocol.restriction_allows(self.restriction, verb, params):
            session.push({"type": "reject", "re": seq,
                          "reason": f"restriction {self.restriction} blocks {verb}"})
            return
        command = Command(verb=verb, params=params, mode=msg["mode"], seq=seq,
                          client_ts=float(msg.get("ts", 0.0)))
        if self.telemetry is not None:
            # log before the dispatch acknowledgment ever leaves
            self.telemetry.record_command(
                {"verb": verb, "params": params, "mode": msg["mode"], "seq": seq,
                 "client": session.session_id}, self.sim.world.clock)
        try:
            result = self.sim.dispatch(command)
        except CommandRejected as e:
            session.push({"type": "reject", "re": seq, "reason": e.reason})
            return
        for notice in self.sim.control.pop_notices():
            session.push({"type": "notice", "notice": notice, "re": seq})
        session.push({"type": "ack", "re": seq, "result": result})
        for goal_event in self.sim.control.drain_transitions():
            self._push_all({"type": "event", "kind": "goal", "goal": goal_event})
            if self.telemetry is not None:
                self.telemetry.record_goal(goal_event, self.sim.world.clock)

    # --- broadcast -------------------------------------------------------------------

    def _push_all(self, msg: dict):
        with self._lock:
            targets = [s for s in self.sessions if s.authed and not s.closed]
        for s in targets:
            s.push(dict(msg))

    def _snapshot_msg(self) -> dict:
        world = self.sim.world
        return {"type": "snapshot", **world.public_state(),
                "goals": {k: g.to_dict() for k, g in self.sim.control.goals.items()},
                "step_sizes": {k: v.value for k, v in self.sim.control.step_sizes.items()},
                "restriction": self.restriction}

    def _scene_msg(self) -> dict:
        return {"type": "scene", "objects": self.sim.world.object_poses(),
                "tick": self.sim.world.tick_count}

    def _broadcast(self, events):
        for g in events.transitions:
            self._push_all({"type": "event", "kind": "goal", "goal": g})
        for c in events.contacts:
            self._push_all({"type": "event", "kind": "contact", "contact": c.to_dict()})
        for n in events.notices:
            self._push_all({"type": "notice", "notice": n})
        tick = self.sim.world.tick_count
        if tick % SNAPSHOT_DIVISOR == 0:
            self._push_all(self._snapshot_msg())
            self._push_all(self._scene_msg())
        if tick % DIAG_DIVISOR == 0:
            self._push_all({"type": "diagnostics", **self.sim.world.diag.to_dict()})

    # --- restriction -------------------------------------------------------------------

    def set_restriction(self, restriction: str):
        """Harness/CLI authority only; not reachable from the wire."""
        if restriction not in protocol.RESTRICTIONS:
            raise ValueError(f"unknown restriction {restriction!r}")
        self.restriction = restriction
        self._push_all(self._snapshot_msg())

    # --- static assets ---------------------------------------------------------------

    def _static_objects(self) -> list:
        out = []
        for obj in self.sim.world.objects.values():
            entry = {"id": obj.obj_id, "shape": obj.shape, "dims": obj.dims,
                     "color": list(obj.color), "mass": obj.mass}
            if obj.parts:
                entry["parts"] = [{"shape": p.shape, "dims": p.dims,
                                   "offset": p.offset.to_dict()} for p in obj.parts]
            out.append(entry)
        return out

    def _client_constants(self) -> dict:
        desc = self.sim.desc
        cam = desc.cameras["rgb"]
        return {
            "camera": {"width": cam.width, "height": cam.height, "fx": cam.fx,
                       "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                       "mount_x": float(cam.mount.position[0])},
            "head": {"offset": [float(v) for v in desc.head.offset],
                     "pan_limits": list(desc.head.pan_limits),
                     "tilt_limits": list(desc.head.tilt_limits)},
            "torso": {"base_height": desc.torso_base_height, "travel": desc.torso_travel},
            "arm": {"fingertip_offset": desc.arm("left").fingertip_offset,
                    "shoulder_offset_y": float(desc.arm("left").mount.position[1])},
            "gripper": {"aperture_max": desc.gripper.aperture_max},
            "steps": {"translation": {s.value: s.translation for s in StepSize},
                      "rotation": {s.value: s.rotation for s in StepSize}},
            "speeds": {"drive_vmax": desc.speeds.drive_vmax,
                       "turn_wmax": desc.speeds.turn_wmax,
                       "drive_gain": desc.speeds.drive_gain,
                       "deadman_s": desc.speeds.deadman_s},
            "peek": {"descent_s": 0.3, "hold_s": 2.8},
        }

    def _constants_json(self) -> bytes:
        return json.dumps(self._client_constants()).encode()

"""Python client for the teleoperation protocol.

Speaks the same wire format as the browser client; used by the assessment
harness agents and the integration tests. Two transports: a real WebSocket
over TCP, or an in-process lockstep channel (see
:meth:`TeleopServer.connect_local`) wrapped to the same interface.
"""

from __future__ import annotations

import socket
import threading
import time
from collections import deque

from . import protocol, wsock


class TeleopClient:
    """Blocking client. ``pump`` (when set) is called while waiting for
    messages; lockstep harnesses point it at the server's tick function."""

    def __init__(self, pump=None):
        self.seq = 0
        self.pump = pump
        self._local = None
        self._sock = None
        self._rx = deque()
        self._rx_lock = threading.Lock()
        self._reader = None
        self.closed = False

    # --- transports ------------------------------------------------------------

    @classmethod
    def connect_tcp(cls, host: str, port: int, token: str, name: str = "client",
                    timeout: float = 10.0) -> "TeleopClient":
        c = cls()
        c._sock = socket.create_connection((host, port), timeout=timeout)
        c._sock.settimeout(None)
        wsock.client_handshake(c._sock, f"{host}:{port}", path=f"/ws?token={token}")
        c._reader = threading.Thread(target=c._read_loop, daemon=True)
        c._reader.start()
        c.send({"type": "hello", "token": token, "name": name})
        welcome = c.wait_for(lambda m: m["type"] in ("welcome", "reject"), timeout=timeout)
        if welcome is None or welcome["type"] != "welcome":
            raise ConnectionError(f"refused: {welcome}")
        c.welcome = welcome
        return c

    @classmethod
    def wrap_local(cls, server, token: str | None = None, name: str = "local") -> "TeleopClient":
        c = cls(pump=server.tick_once)
        c._local = server.connect_local(token=token, name=name)
        welcome = c.wait_for(lambda m: m["type"] in ("welcome", "reject"), timeout=5.0)
        if welcome is None or welcome["type"] != "welcome":
            raise ConnectionError(f"refused: {welcome}")
        c.welcome = welcome
        return c

    def _read_loop(self):
        try:
            while not self.closed:
                opcode, payload = wsock.read_message(self._sock)
                if opcode == wsock.OP_CLOSE:
                    break
                with self._rx_lock:
                    self._rx.append(protocol.decode(payload))
        except (ConnectionError, OSError, protocol.ProtocolError):
            pass
        finally:
            self.closed = True

    # --- sending ----------------------------------------------------------------

    def send(self, msg: dict) -> int:
        if self._local is not None:
            self.seq = self._local.send(msg)
            return self.seq
        self.seq += 1
        msg = {"seq": self.seq, "ts": time.time(), **msg}
        self._sock.sendall(wsock.encode_frame(protocol.encode(msg), mask=True))
        return self.seq

    def command(self, verb: str, params: dict | None = None, mode: str = "looking") -> int:
        return self.send({"type": "command", "verb": verb, "params": params or {},
                          "mode": mode})

    def heartbeat(self) -> int:
        return self.send({"type": "heartbeat"})

    # --- receiving ---------------------------------------------------------------

    def poll(self):
        if self._local is not None:
            return self._local.recv()
        with self._rx_lock:
            return self._rx.popleft() if self._rx else None

    def drain(self) -> list:
        out = []
        while True:
            m = self.poll()
            if m is None:
                return out
            out.append(m)

    def wait_for(self, pred, timeout: float = 10.0, collect=None):
        """Next message matching pred; pumps the server (lockstep) or sleeps.

        Messages that do not match are appended to ``collect`` when given,
        otherwise discarded in arrival order.
        """
        deadline = time.monotonic() + timeout
        pumps = 0
        while time.monotonic() < deadline:
            m = self.poll()
            if m is not None:
                if pred(m):
                    return m
                if collect is not None:
                    collect.append(m)
                continue
            if self.pump is not None:
                self.pump()
                pumps += 1
                if pumps > 1_000_000:
                    break
            else:
                time.sleep(0.002)
        return None

    def command_and_wait(self, verb: str, params: dict | None = None,
                         mode: str = "looking", timeout: float = 10.0,
                         collect=None) -> dict:
        """Send a command and wait for its ack/reject."""
        seq = self.command(verb, params, mode)
        reply = self.wait_for(lambda m: m.get("re") == seq and m["type"] in ("ack", "reject"),
                              timeout=timeout, collect=collect)
        if reply is None:
            raise TimeoutError(f"no reply to {verb} seq={seq}")
        return reply

    def run_goal(self, verb: str, params: dict | None = None, mode: str = "looking",
                 timeout: float = 60.0) -> dict:
        """Send a goal-producing command and wait for its goal to terminate.

        Returns the terminal goal dict; raises on rejection.
        """
        reply = self.command_and_wait(verb, params, mode, timeout=timeout)
        if reply["type"] == "reject":
            raise CommandRefused(reply.get("reason", "rejected"))
        goal = reply["result"].get("goal")
        if goal is None:
            return reply["result"]
        if goal["state"] != "active":
            return goal
        gid = goal["goal_id"]
        ev = self.wait_for(
            lambda m: (m["type"] == "event" and m.get("kind") == "goal"
                       and m["goal"]["goal_id"] == gid
                       and m["goal"]["state"] != "active"),
            timeout=timeout)
        if ev is None:
            raise TimeoutError(f"goal {gid} never terminated")
        return ev["goal"]

    def close(self):
        self.closed = True
        if self._sock is not None:
            try:
                self._sock.sendall(wsock.encode_frame(b"", wsock.OP_CLOSE, mask=True))
                self._sock.close()
            except OSError:
                pass


class CommandRefused(RuntimeError):
    pass

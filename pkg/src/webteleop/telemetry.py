"""Session telemetry: newline-delimited JSON records, one file per session.

Record kinds: header (schema version + scene), command (every accepted
command, appended before the dispatch ack), joints (4 Hz), frame (0.25 Hz
camera pose + object poses, enough to re-render a 540x960 view offline),
diagnostics (1 Hz), goal (goal transitions), contact (onset/released).
All samplers run on the sim clock, never the wall clock.
"""

from __future__ import annotations

import gzip
import json
import queue
import sys
import threading
from pathlib import Path

SCHEMA_VERSION = 2

JOINT_PERIOD = 0.25       # 4 Hz
FRAME_PERIOD = 4.0        # 0.25 Hz
DIAG_PERIOD = 1.0         # 1 Hz


class TelemetryWriter:
    """Single-writer session log.

    In async mode (default) records flow through a bounded queue into a
    writer thread with a <= 1 s flush policy; sync mode appends inline for
    deterministic lockstep runs. Storage failures never halt the robot:
    they flip ``storage_ok`` and complain on stderr once.
    """

    def __init__(self, path, session_id: str, scene: str, rate_hz: float,
                 compress: bool = False, sync: bool = False):
        self.path = Path(path)
        self.session_id = session_id
        self.sync = sync
        self.storage_ok = True
        self._lock = threading.Lock()
        self._next_joints = JOINT_PERIOD
        self._next_frame = FRAME_PERIOD
        self._next_diag = DIAG_PERIOD
        self._closed = False
        try:
            self._fh = (gzip.open(self.path, "at", encoding="utf-8") if compress
                        else open(self.path, "a", encoding="utf-8"))
        except OSError as e:
            self._fh = None
            self._fail(e)
        self._queue: queue.Queue = queue.Queue(maxsize=10000)
        self._writer = None
        if not sync and self._fh is not None:
            self._writer = threading.Thread(target=self._drain_loop, daemon=True,
                                            name=f"telemetry-{session_id}")
            self._writer.start()
        self._append({"kind": "header", "version": SCHEMA_VERSION, "session": session_id,
                      "scene": scene, "rate_hz": rate_hz, "t": 0.0})

    def _fail(self, err):
        if self.storage_ok:
            self.storage_ok = False
            print(f"telemetry: storage failure, session continues: {err}", file=sys.stderr)

    def _write_line(self, record: dict):
        if self._fh is None:
            return
        try:
            self._fh.write(json.dumps(record, separators=(",", ":")) + "\n")
        except OSError as e:
            self._fail(e)

    def _drain_loop(self):
        import time
        last_flush = time.monotonic()
        while True:
            try:
                item = self._queue.get(timeout=0.25)
            except queue.Empty:
                item = None
            if item is StopIteration:
                break
            if item is not None:
                self._write_line(item)
            now = time.monotonic()
            if now - last_flush >= 1.0:
                try:
                    if self._fh is not None:
                        self._fh.flush()
                except OSError as e:
                    self._fail(e)
                last_flush = now
        try:
            if self._fh is not None:
                self._fh.flush()
        except OSError as e:
            self._fail(e)

    def _append(self, record: dict):
        record.setdefault("session", self.session_id)
        if self.sync or self._writer is None:
            with self._lock:
                self._write_line(record)
                if self._fh is not None:
                    try:
                        self._fh.flush()
                    except OSError as e:
                        self._fail(e)
        else:
            try:
                self._queue.put_nowait(record)
            except queue.Full:
                self._fail(RuntimeError("telemetry queue overflow"))

    # --- record entry points --------------------------------------------------

    def record_command(self, command: dict, sim_time: float):
        """Append an accepted command; callers ack only after this returns."""
        self._append({"kind": "command", "t": sim_time, "command": command})

    def record_goal(self, goal: dict, sim_time: float):
        self._append({"kind": "goal", "t": sim_time, "goal": goal})

    def record_contact(self, contact: dict, sim_time: float):
        self._append({"kind": "contact", "t": sim_time, "contact": contact})

    def on_tick(self, world, transitions=(), contacts=()):
        """Sample joints/frames/diagnostics on the sim clock and log edges."""
        t = world.clock
        while t >= self._next_joints - 1e-12:
            self._append({"kind": "joints", "t": t,
                          "joints": world.joints.to_dict(),
                          "base": world.base.to_dict()})
            self._next_joints += JOINT_PERIOD
        while t >= self._next_frame - 1e-12:
            from .kinematics import camera_pose
            cam_pose = camera_pose(world.desc, world.joints, world.desc.cameras["rgb"],
                                   base=world.base)
            self._append({"kind": "frame", "t": t,
                          "camera": cam_pose.to_dict(),
                          "base": world.base.to_dict(),
                          "joints": world.joints.to_dict(),
                          "objects": world.object_poses()})
            self._next_frame += FRAME_PERIOD
        while t >= self._next_diag - 1e-12:
            self._append({"kind": "diagnostics", "t": t,
                          "diag": world.diag.to_dict()})
            self._next_diag += DIAG_PERIOD
        for g in transitions:
            self.record_goal(g, t)
        for ev in contacts:
            self.record_contact(ev.to_dict() if hasattr(ev, "to_dict") else ev, t)

    def close(self):
        if self._closed:
            return
        self._closed = True
        if self._writer is not None:
            self._queue.put(StopIteration)
            self._writer.join(timeout=5.0)
        if self._fh is not None:
            try:
                self._fh.flush()
                self._fh.close()
            except OSError as e:
                self._fail(e)


def read_log(path, strict: bool = False):
    """Iterate records from a session log (.ndjson or .ndjson.gz).

    Corrupt lines are skipped with a count unless ``strict``; returns
    (records, skipped).
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    records = []
    skipped = 0
    with opener(path, "rt", encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                if strict:
                    raise ValueError(f"{path}:{i}: corrupt record: {e}") from e
                skipped += 1
    return records, skipped

"""Deterministic replay: re-simulate the commands of a session log against
the same scene and reconstruct the robot's trajectory.

Because command ingest happens on tick boundaries and the sim is
deterministic, replaying a log reproduces the live run's final state to
within the IK tolerance (bit-exact when tick-aligned).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .control import Command, CommandRejected
from .sim import SimSession
from .telemetry import read_log


@dataclass
class ReplayReport:
    scene: str = ""
    records: int = 0
    skipped: int = 0
    commands: int = 0
    rejected: int = 0
    final_time: float = 0.0
    kinds: dict = field(default_factory=dict)


def load_timeline(log_path, strict: bool = False):
    """Ordered event iterator over a session log.

    Returns (records, report). Corrupt records are skipped and counted
    unless strict, in which case they raise.
    """
    records, skipped = read_log(log_path, strict=strict)
    report = ReplayReport(records=len(records), skipped=skipped)
    for r in records:
        report.kinds[r.get("kind", "?")] = report.kinds.get(r.get("kind", "?"), 0) + 1
        if r.get("kind") == "header":
            report.scene = r.get("scene", "")
    records.sort(key=lambda r: r.get("t", 0.0))
    return records, report


def replay(log_path, strict: bool = False, settle_timeout: float = 60.0):
    """Re-simulate a log; returns (SimSession at final state, ReplayReport)."""
    records, report = load_timeline(log_path, strict=strict)
    header = next((r for r in records if r.get("kind") == "header"), None)
    if header is None:
        raise ValueError(f"{log_path}: no header record")
    sim = SimSession(scene=header.get("scene", "empty"),
                     rate_hz=float(header.get("rate_hz", 50.0)))
    half_tick = sim.dt / 2.0
    for rec in records:
        if rec.get("kind") != "command":
            continue
        target_t = float(rec.get("t", 0.0))
        while sim.world.clock < target_t - half_tick:
            sim.tick()
        cmd = rec["command"]
        try:
            sim.dispatch(Command(verb=cmd["verb"], params=cmd.get("params", {}),
                                 mode=cmd.get("mode", "looking"),
                                 seq=int(cmd.get("seq", 0))))
            report.commands += 1
        except CommandRejected:
            report.rejected += 1
    sim.run_until_idle(settle_timeout)
    report.final_time = sim.world.clock
    return sim, report

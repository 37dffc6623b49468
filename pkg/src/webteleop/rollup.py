"""Hierarchical task timing rollups over session logs.

Labels (human-authored, consensus-style) map time intervals to nested
task/subtask names: a YAML list of {task, level, start, end}. Nesting depth
is arbitrary; parents are inferred by time containment one level up.
Sibling intervals within a level must not overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml


class LabelError(ValueError):
    pass


@dataclass
class Interval:
    task: str
    level: int
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class RollupRow:
    task: str
    level: int
    parent: str | None
    start: float
    end: float
    duration: float
    commands: int
    modes: dict = field(default_factory=dict)


def load_labels(path) -> list:
    raw = yaml.safe_load(Path(path).read_text()) or []
    if not isinstance(raw, list):
        raise LabelError("label file must be a list of intervals")
    out = []
    for i, item in enumerate(raw):
        try:
            iv = Interval(str(item["task"]), int(item.get("level", 0)),
                          float(item["start"]), float(item["end"]))
        except (KeyError, TypeError, ValueError) as e:
            raise LabelError(f"labels[{i}]: {e}") from e
        if iv.end <= iv.start:
            raise LabelError(f"labels[{i}] ({iv.task}): end must exceed start")
        out.append(iv)
    _check_overlaps(out)
    return out


def _check_overlaps(intervals: list) -> None:
    by_level: dict = {}
    for iv in intervals:
        by_level.setdefault(iv.level, []).append(iv)
    for level, ivs in by_level.items():
        ivs = sorted(ivs, key=lambda v: v.start)
        for a, b in zip(ivs, ivs[1:]):
            if b.start < a.end - 1e-9:
                raise LabelError(
                    f"level {level}: {a.task!r} [{a.start}, {a.end}] overlaps "
                    f"{b.task!r} [{b.start}, {b.end}]")


def rollup(records: list, intervals: list) -> list:
    """Per-task/subtask durations, command counts, and mode distribution.

    With no intervals, one synthetic whole-session row carries the
    command-level stats.
    """
    commands = [r for r in records if r.get("kind") == "command"]
    if not intervals:
        end = max((r.get("t", 0.0) for r in records), default=0.0)
        modes: dict = {}
        for c in commands:
            m = c["command"].get("mode", "?")
            modes[m] = modes.get(m, 0) + 1
        return [RollupRow("session", 0, None, 0.0, end, end, len(commands), modes)]
    rows = []
    for iv in sorted(intervals, key=lambda v: (v.level, v.start)):
        parent = None
        best_span = float("inf")
        for cand in intervals:
            if (cand.level == iv.level - 1 and cand.start <= iv.start + 1e-9
                    and iv.end <= cand.end + 1e-9 and cand.duration < best_span):
                parent, best_span = cand.task, cand.duration
        inside = [c for c in commands if iv.start <= c.get("t", 0.0) < iv.end]
        modes = {}
        for c in inside:
            m = c["command"].get("mode", "?")
            modes[m] = modes.get(m, 0) + 1
        rows.append(RollupRow(iv.task, iv.level, parent, iv.start, iv.end,
                              iv.duration, len(inside), modes))
    return rows


def format_rows(rows: list) -> str:
    lines = [f"{'task':30} {'lvl':>3} {'parent':20} {'start':>8} {'end':>8} "
             f"{'dur':>8} {'cmds':>5}  modes"]
    for r in rows:
        modes = ",".join(f"{k}:{v}" for k, v in sorted(r.modes.items()))
        lines.append(f"{r.task:30} {r.level:>3} {r.parent or '-':20} "
                     f"{r.start:8.2f} {r.end:8.2f} {r.duration:8.2f} {r.commands:>5}  {modes}")
    return "\n".join(lines)

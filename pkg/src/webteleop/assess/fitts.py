"""Fitts-style pointing throughput from trial endpoints.

Effective-width method: per condition (distance D, width W), the effective
width is 4.133 times the standard deviation of the endpoint projections
along the task axis, the effective index of difficulty is
log2(D / We + 1), and throughput is the mean over conditions of
IDe / mean movement time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

WE_FACTOR = 4.133
MIN_TRIALS_PER_CONDITION = 5


class DegenerateCondition(ValueError):
    """Zero endpoint variance in a condition."""


@dataclass
class FittsTrial:
    distance: float           # D, px
    width: float              # W, px
    movement_time: float      # s
    endpoint: float           # projection along the task axis, px

    def __post_init__(self):
        if self.distance <= 0 or self.width <= 0:
            raise ValueError("D and W must be > 0")
        if self.movement_time <= 0:
            raise ValueError("movement time must be > 0")


@dataclass
class ConditionRow:
    distance: float
    width: float
    trials: int
    we: float
    ide: float
    mean_mt: float
    throughput: float


@dataclass
class FittsReport:
    conditions: list = field(default_factory=list)
    throughput: float = 0.0

    def summary(self) -> str:
        lines = [f"{'D':>6} {'W':>6} {'n':>4} {'We':>8} {'IDe':>7} {'MT':>7} {'TP':>7}"]
        for c in self.conditions:
            lines.append(f"{c.distance:6.0f} {c.width:6.0f} {c.trials:4d} "
                         f"{c.we:8.2f} {c.ide:7.3f} {c.mean_mt:7.3f} {c.throughput:7.3f}")
        lines.append(f"throughput = {self.throughput:.3f} bits/s "
                     "(mean of per-condition IDe / mean MT)")
        return "\n".join(lines)


def fitts_throughput(trials) -> FittsReport:
    trials = list(trials)
    if not trials:
        raise ValueError("need at least one condition")
    groups: dict = {}
    for t in trials:
        groups.setdefault((t.distance, t.width), []).append(t)
    rows = []
    for (d, w), ts in sorted(groups.items()):
        if len(ts) < MIN_TRIALS_PER_CONDITION:
            raise ValueError(f"condition D={d} W={w}: needs >= "
                             f"{MIN_TRIALS_PER_CONDITION} trials, got {len(ts)}")
        endpoints = np.array([t.endpoint for t in ts])
        sd = float(np.std(endpoints, ddof=1))
        if sd <= 0.0:
            raise DegenerateCondition(f"condition D={d} W={w}: zero endpoint variance")
        we = WE_FACTOR * sd
        ide = math.log2(d / we + 1.0)
        mean_mt = float(np.mean([t.movement_time for t in ts]))
        rows.append(ConditionRow(d, w, len(ts), we, ide, mean_mt, ide / mean_mt))
    return FittsReport(conditions=rows,
                       throughput=float(np.mean([r.throughput for r in rows])))


def midskill_cursor_trials(conditions, trials_per_condition: int = 15,
                           seed: int = 7) -> list:
    """Synthetic mid-skill pointing agent: noisy endpoints whose scatter
    tracks the target width and movement times that follow a Fitts-style
    law with latency jitter."""
    rng = np.random.default_rng(seed)
    a, b = 0.30, 0.35          # s, s/bit
    out = []
    for d, w in conditions:
        sigma = max(w / WE_FACTOR, 1.0)
        for _ in range(trials_per_condition):
            endpoint = float(d + rng.normal(0.0, sigma))
            ide_nominal = math.log2(d / w + 1.0)
            mt = max(0.15, a + b * ide_nominal + float(rng.normal(0.0, 0.06)))
            out.append(FittsTrial(d, w, mt, endpoint))
    return out


DEFAULT_CONDITIONS = [(256.0, 32.0), (256.0, 96.0), (512.0, 32.0),
                      (512.0, 96.0), (768.0, 48.0), (768.0, 128.0)]

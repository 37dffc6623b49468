"""Simulation session: one world plus its control stack, advanced tick by
tick. The network server drives this from its own loop; tests and the
assessment harness drive it directly (lockstep) for determinism.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .control import Command, ControlStack
from .description import RobotDescription, load_robot_description
from .world import World, load_scene


@dataclass
class TickEvents:
    tick: int
    sim_time: float
    transitions: list = field(default_factory=list)   # goal dicts
    contacts: list = field(default_factory=list)      # ContactEvent onset/released
    notices: list = field(default_factory=list)


class SimSession:
    def __init__(self, scene: str = "empty", desc: RobotDescription | None = None,
                 rate_hz: float = 50.0, battery_hours: float = 8.0):
        self.desc = desc if desc is not None else load_robot_description()
        self.world = load_scene(self.desc, scene, battery_hours=battery_hours)
        self.control = ControlStack(self.world)
        self.dt = 1.0 / rate_hz

    def dispatch(self, cmd: Command) -> dict:
        """Run one command through the controllers; raises CommandRejected."""
        return self.control.dispatch(cmd)

    def tick(self) -> TickEvents:
        result = self.world.step(self.dt)
        self.control.after_step(result)
        return TickEvents(
            tick=self.world.tick_count,
            sim_time=self.world.clock,
            transitions=self.control.drain_transitions(),
            contacts=result.contact_events,
            notices=self.control.pop_notices(),
        )

    def run_for(self, seconds: float) -> list:
        events = []
        n = max(1, round(seconds / self.dt))
        for _ in range(n):
            events.append(self.tick())
        return events

    def run_until_idle(self, timeout: float = 30.0) -> list:
        """Tick until no goal is active and no motion target remains."""
        events = []
        deadline = self.world.clock + timeout
        while self.world.clock < deadline:
            events.append(self.tick())
            act = self.world.actuation
            busy = (act.arm_plans or act.torso_target is not None
                    or act.head_target is not None or act.grip_targets
                    or act.grasp_requests
                    or any(g.state == "active" for g in self.control.goals.values()))
            if not busy:
                break
        return events

    def set_run_stop(self, engaged: bool) -> None:
        self.world.set_run_stop(engaged)
        if engaged:
            self.control.abort_all("run-stop")   # aborts surface via the next tick's drain

#!/usr/bin/env python3
"""Scripted in-home session: fetch the spoon from the side table and bring
it to the mouth anchor, wipe with the towel, park. Produces a session log
plus a matching hierarchical label file, then prints the task rollup —
end-to-end material for log-tool and the dataset export.

Usage: python scripts/home_session_demo.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np
import yaml

from webteleop.assess.agents import ScriptedAgent
from webteleop.replay import load_timeline
from webteleop.rollup import format_rows, load_labels, rollup
from webteleop.server import TeleopServer


class HomeAgent(ScriptedAgent):
    def run_session(self):
        world = self.world
        marks = {"start": world.clock}
        spoon = world.objects["spoon"]
        mouth = np.asarray(world.anchors["mouth_center"], dtype=float)

        # fetch the spoon
        self.client.command_and_wait("spine", {"fraction": 0.3}, mode="spine")
        self.drive_to((spoon.pose.position[0] - 0.62, spoon.pose.position[1]),
                      stop_dist=0.04)
        self.open_gripper(1.0)
        self.level_gripper()
        self.fingertip_to(spoon.pose.position.copy())
        assert self.grasp() == "grasped"
        self.move_point_z(self.fingertip, spoon.pose.position[2] + 0.12)
        marks["grasped"] = world.clock

        # bring the spoon tip to the mouth
        tip = spoon.attachment_point_world
        self.drive_to((mouth[0] - 0.60, mouth[1]), stop_dist=0.04)
        self.move_point_z(tip, mouth[2], tol=0.005)
        self.move_point_xy(tip, mouth[:2], tol=0.005)
        marks["fed"] = world.clock

        # park: put the spoon back down on the table and withdraw
        self.drive_to((spoon_home[0] - 0.62, spoon_home[1]), stop_dist=0.05)
        self.move_point_xy(lambda: spoon.pose.position, spoon_home[:2], tol=0.01)
        self.move_point_z(lambda: spoon.pose.position, spoon_home[2], tol=0.01)
        self.open_gripper(1.0)
        marks["parked"] = world.clock
        return marks


def main() -> int:
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-output")
    outdir.mkdir(parents=True, exist_ok=True)
    server = TeleopServer(scene="home", token="", mode="lockstep", log_dir=outdir)
    global spoon_home
    spoon_home = server.sim.world.objects["spoon"].pose.position.copy() + [0.0, 0.0, 0.02]
    agent = HomeAgent(server, side="left", name="home-demo")
    marks = agent.run_session()
    agent.run_seconds(1.0)
    server.stop()
    log_path = server.telemetry.path
    print(f"session log: {log_path}")

    labels = [
        {"task": "feed with spoon", "level": 0,
         "start": 0.0, "end": round(marks["fed"] + 0.5, 2)},
        {"task": "fetch spoon", "level": 1,
         "start": 0.0, "end": round(marks["grasped"], 2)},
        {"task": "bring to mouth", "level": 1,
         "start": round(marks["grasped"], 2), "end": round(marks["fed"] + 0.5, 2)},
        {"task": "park robot", "level": 0,
         "start": round(marks["fed"] + 0.5, 2), "end": round(marks["parked"] + 1.0, 2)},
    ]
    labels_path = outdir / "labels.yaml"
    labels_path.write_text(yaml.safe_dump(labels, sort_keys=False))
    print(f"labels: {labels_path}\n")

    records, _ = load_timeline(log_path)
    rows = rollup(records, load_labels(labels_path))
    print(format_rows(rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())

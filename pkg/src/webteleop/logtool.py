"""log-tool: inspect, roll up, replay, and render session telemetry logs."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path


def cmd_stats(args) -> int:
    from .replay import load_timeline
    records, report = load_timeline(args.log, strict=args.strict)
    print(f"records: {report.records}  skipped: {report.skipped}")
    for kind, n in sorted(report.kinds.items()):
        print(f"  {kind:12} {n}")
    commands = [r for r in records if r.get("kind") == "command"]
    verbs: dict = {}
    modes: dict = {}
    for c in commands:
        verbs[c["command"].get("verb", "?")] = verbs.get(c["command"].get("verb", "?"), 0) + 1
        modes[c["command"].get("mode", "?")] = modes.get(c["command"].get("mode", "?"), 0) + 1
    dur = max((r.get("t", 0.0) for r in records), default=0.0)
    print(f"session length: {dur:.2f} s   commands: {len(commands)}")
    if verbs:
        print("  by verb: " + ", ".join(f"{k}={v}" for k, v in sorted(verbs.items())))
        print("  by mode: " + ", ".join(f"{k}={v}" for k, v in sorted(modes.items())))
    return 0


def cmd_rollup(args) -> int:
    from .replay import load_timeline
    from .rollup import format_rows, load_labels, rollup
    records, _ = load_timeline(args.log, strict=args.strict)
    intervals = load_labels(args.labels) if args.labels else []
    rows = rollup(records, intervals)
    print(format_rows(rows))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["task", "level", "parent", "start_s", "end_s", "duration_s",
                        "commands", "modes"])
            for r in rows:
                w.writerow([r.task, r.level, r.parent or "", f"{r.start:.3f}",
                            f"{r.end:.3f}", f"{r.duration:.3f}", r.commands,
                            ";".join(f"{k}={v}" for k, v in sorted(r.modes.items()))])
        print(f"wrote {args.csv}")
    return 0


def cmd_render(args) -> int:
    from .description import load_robot_description
    from .render import render_frame, save_png
    from .replay import load_timeline
    records, report = load_timeline(args.log, strict=args.strict)
    desc = load_robot_description()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frames = [r for r in records if r.get("kind") == "frame"]
    n = 0
    for i, frame in enumerate(frames):
        if i % args.every:
            continue
        img = render_frame(frame, desc, report.scene)
        save_png(img, out / f"frame-{i:05d}-t{frame['t']:.1f}.png")
        n += 1
    print(f"rendered {n} of {len(frames)} frames to {out}")
    return 0


def cmd_replay(args) -> int:
    from .replay import replay
    sim, report = replay(args.log, strict=args.strict)
    print(f"scene: {report.scene}  records: {report.records}  skipped: {report.skipped}")
    print(f"commands applied: {report.commands}  rejected: {report.rejected}")
    print(f"final sim time: {report.final_time:.2f} s")
    print(f"final base: x={sim.world.base.x:.4f} y={sim.world.base.y:.4f} "
          f"theta={sim.world.base.theta:.4f}")
    for side in ("left", "right"):
        tip = sim.world.fingertip_world(side)
        print(f"final {side} fingertip: [{tip[0]:.4f}, {tip[1]:.4f}, {tip[2]:.4f}]")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="log-tool", description=__doc__)
    ap.add_argument("--strict", action="store_true",
                    help="fail on corrupt records instead of skip-with-report")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("stats", help="record counts and command stats")
    p.add_argument("log")
    p.set_defaults(fn=cmd_stats)
    p = sub.add_parser("rollup", help="task timing rollup from a label file")
    p.add_argument("log")
    p.add_argument("--labels", default=None, help="YAML interval labels")
    p.add_argument("--csv", default=None, help="also write rows as CSV")
    p.set_defaults(fn=cmd_rollup)
    p = sub.add_parser("render", help="render frame records to 960x540 PNGs")
    p.add_argument("log")
    p.add_argument("--out", required=True)
    p.add_argument("--every", type=int, default=1, help="render every Nth frame")
    p.set_defaults(fn=cmd_render)
    p = sub.add_parser("replay", help="re-simulate the log and report the final state")
    p.add_argument("log")
    p.set_defaults(fn=cmd_replay)
    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

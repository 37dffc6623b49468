"""teleop-server command line entry point."""

from __future__ import annotations

import argparse
import signal
import sys
import time
from pathlib import Path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="teleop-server",
        description="Serve the simulated robot over WebSocket + static client assets.")
    ap.add_argument("--scene", default="selfcare",
                    help="scene name (empty|selfcare|arat|home) or a YAML path")
    ap.add_argument("--rate", type=float, default=50.0, help="sim tick rate, Hz")
    ap.add_argument("--battery-hours", type=float, default=8.0,
                    help="full-charge battery life under load")
    ap.add_argument("--charging", action="store_true", help="start with the charger attached")
    ap.add_argument("--port", type=int, default=8750)
    ap.add_argument("--token", default="", help="session token clients must present")
    ap.add_argument("--restriction", default="full",
                    choices=["full", "arat-left", "arat-right"])
    ap.add_argument("--log-dir", default=None, help="write session telemetry here")
    ap.add_argument("--static", action="append", default=None,
                    help="static asset roots served over HTTP (repeatable)")
    args = ap.parse_args(argv)

    from .server import TeleopServer

    static_roots = args.static
    if static_roots is None:
        # repo checkout layout: src/webteleop/cli.py -> <root>/frontend
        guess = Path(__file__).resolve().parents[2] / "frontend"
        static_roots = [p for p in (guess / "static", guess / "dist") if p.is_dir()]
    server = TeleopServer(scene=args.scene, token=args.token, restriction=args.restriction,
                          rate_hz=args.rate, battery_hours=args.battery_hours,
                          port=args.port, static_roots=static_roots,
                          log_dir=args.log_dir, mode="realtime")
    server.start()
    if args.charging:
        server.sim.world.set_charging(True)
    print(f"teleop-server: scene={args.scene} ws://127.0.0.1:{server.port}/ws"
          f"?token={args.token}  restriction={args.restriction}", flush=True)

    stop = []
    signal.signal(signal.SIGINT, lambda *_: stop.append(True))
    signal.signal(signal.SIGTERM, lambda *_: stop.append(True))
    try:
        while not stop:
            time.sleep(0.2)
    finally:
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""assess: administer the evaluations against the simulator and crunch the
statistics. Subcommands: arat, selfcare, fitts, stats wilcoxon, export."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml


def _lockstep_server(scene, restriction="full", log_dir=None):
    from ..server import TeleopServer
    return TeleopServer(scene=scene, token="", restriction=restriction,
                        mode="lockstep", log_dir=log_dir)


def cmd_arat(args) -> int:
    from .harness import run_arat
    from .datasets import sheet_to_item_rows
    out = Path(args.out) if args.out else None
    srv = _lockstep_server("arat", restriction=f"arat-{args.side}",
                           log_dir=out / "logs" if out else None)
    sheet = run_arat(srv, args.side, schedule_path=args.schedule)
    print(sheet.summary())
    print()
    print(sheet.derivation_table())
    from .arat import MCID_POINTS
    print(f"reference: minimal clinically important difference on this scale is "
          f"reported as {MCID_POINTS[0]} or {MCID_POINTS[1]} points in the cited "
          f"literature (annotation only)")
    srv.stop()
    if out:
        out.mkdir(parents=True, exist_ok=True)
        rows = sheet_to_item_rows(sheet, args.participant)
        (out / "arat_result.json").write_text(json.dumps({
            "participant": args.participant, "side": args.side,
            "total": sheet.total, "expected_max": sheet.expected_max,
            "items": rows}, indent=2))
        print(f"\nwrote {out / 'arat_result.json'}")
    return 0


def cmd_selfcare(args) -> int:
    from .harness import run_selfcare
    out = Path(args.out) if args.out else None
    results = []
    for i in range(args.repeats):
        srv = _lockstep_server("selfcare", log_dir=out / "logs" if out else None)
        res = run_selfcare(srv)
        srv.stop()
        results.append(res)
        print(f"run {i + 1}: success={res.success} grasp+lift={_fmt(res.grasp_lift_s)} "
              f"delivery={_fmt(res.delivery_s)} total={_fmt(res.total_s)} "
              f"tip error={res.final_tip_error * 1000:.1f} mm")
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "selfcare_result.json").write_text(json.dumps([vars(r) for r in results],
                                                             indent=2))
        print(f"wrote {out / 'selfcare_result.json'}")
    return 0


def _fmt(v):
    return f"{v:.1f}s" if v is not None else "incomplete"


def cmd_fitts(args) -> int:
    from .fitts import DEFAULT_CONDITIONS, fitts_throughput, midskill_cursor_trials
    if args.conditions:
        cfg = yaml.safe_load(Path(args.conditions).read_text())
        conditions = [(float(c["distance"]), float(c["width"])) for c in cfg["conditions"]]
        trials_per = int(cfg.get("trials_per_condition", 15))
    else:
        conditions, trials_per = DEFAULT_CONDITIONS, 15
    trials = midskill_cursor_trials(conditions, trials_per, seed=args.seed)
    report = fitts_throughput(trials)
    print(report.summary())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        import csv
        with open(out / "fitts_trials.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["distance_px", "width_px", "movement_time_s", "endpoint_px"])
            for t in trials:
                w.writerow([t.distance, t.width, f"{t.movement_time:.4f}",
                            f"{t.endpoint:.2f}"])
        (out / "fitts_report.json").write_text(json.dumps(
            {"throughput_bits_s": report.throughput}, indent=2))
        print(f"wrote {out / 'fitts_trials.csv'}")
    return 0


def cmd_stats_wilcoxon(args) -> int:
    from .stats import wilcoxon_signed_rank
    if args.csv:
        import csv as _csv
        with open(args.csv) as fh:
            rows = list(_csv.DictReader(fh))
        x = [float(r[args.x_col]) for r in rows]
        y = [float(r[args.y_col]) for r in rows] if args.y_col else None
    else:
        x = [float(v) for v in args.x.split(",")]
        y = [float(v) for v in args.y.split(",")] if args.y else None
    mu = args.mu
    res = wilcoxon_signed_rank(x, y=y, mu=mu, tail=args.tail)
    print(res.summary())
    return 0


def cmd_export(args) -> int:
    from .datasets import export_datasets, participant_row, rollup_rows_to_s3
    from ..replay import load_timeline
    from ..rollup import load_labels, rollup
    s1, s2, s3 = [], [], []
    for path in args.arat or []:
        data = json.loads(Path(path).read_text())
        s2.extend(data["items"])
        sheet_like = type("S", (), {"total": data["total"],
                                    "expected_max": data["expected_max"]})
        s1.append(participant_row(data["participant"], sheet=sheet_like))
    for spec in args.rollup or []:
        log_path, _, labels_path = spec.partition(":")
        records, report = load_timeline(log_path)
        intervals = load_labels(labels_path) if labels_path else []
        rows = rollup(records, intervals)
        s3.extend(rollup_rows_to_s3(rows, Path(log_path).stem))
    paths = export_datasets(args.out, s1, s2, s3)
    for k, p in paths.items():
        print(f"wrote {p}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="assess", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("arat", help="administer the 19-item assessment with the expert agent")
    p.add_argument("--side", choices=["left", "right"], required=True)
    p.add_argument("--schedule", default=None, help="schedule YAML (default shipped)")
    p.add_argument("--participant", default="expert-sim")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_arat)

    p = sub.add_parser("selfcare", help="run the scripted drink-retrieval task")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_selfcare)

    p = sub.add_parser("fitts", help="pointing throughput of the mid-skill cursor agent")
    p.add_argument("--conditions", default=None, help="YAML conditions file")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_fitts)

    p = sub.add_parser("stats", help="statistics")
    statsub = p.add_subparsers(dest="stat", required=True)
    pw = statsub.add_parser("wilcoxon", help="one-sided signed-rank test")
    pw.add_argument("--x", default=None, help="comma-separated sample")
    pw.add_argument("--y", default=None, help="comma-separated paired sample")
    pw.add_argument("--mu", type=float, default=0.0, help="one-sample comparison value")
    pw.add_argument("--tail", choices=["greater", "less"], default="greater")
    pw.add_argument("--csv", default=None)
    pw.add_argument("--x-col", default="x")
    pw.add_argument("--y-col", default=None)
    pw.set_defaults(fn=cmd_stats_wilcoxon)

    p = sub.add_parser("export", help="write the dataset-shaped CSV tables")
    p.add_argument("--arat", action="append", default=None,
                   help="arat_result.json files (repeatable)")
    p.add_argument("--rollup", action="append", default=None,
                   help="LOG[:LABELS] pairs for per-task rows (repeatable)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

"""Dataset-shaped CSV exports.

Three tables mirror the study's published data layout: participant rows
(S1: demographics/access schema, assessment totals, task outcomes, rating
scales), per-item rows (S2: score and timing for each of the 19 items),
and per-task rows (S3: hierarchical task timing from session logs).
Headers are always written; schema mismatches fail loudly with the column
difference.
"""

from __future__ import annotations

import csv
from pathlib import Path

S1_COLUMNS = [
    "participant", "access_method", "throughput_bits_s",
    "arat_total_robot", "arat_expected_max",
    "selfcare_success", "selfcare_grasp_lift_s", "selfcare_delivery_s",
    "selfcare_total_s",
    "ease_manipulation", "use_manipulation", "improvement_manipulation",
    "ease_selfcare", "use_selfcare", "improvement_selfcare",
]

S2_COLUMNS = [
    "participant", "side", "item", "subscale", "feasible",
    "completed", "partial", "elapsed_s", "score",
]

S3_COLUMNS = [
    "session", "task", "level", "parent", "start_s", "end_s",
    "duration_s", "commands", "modes",
]


class SchemaError(ValueError):
    pass


def _check_rows(rows, columns, name):
    for i, row in enumerate(rows):
        got = set(row)
        want = set(columns)
        if got != want:
            missing = sorted(want - got)
            extra = sorted(got - want)
            raise SchemaError(f"{name} row {i}: missing columns {missing}, "
                              f"unexpected columns {extra}")


def write_table(path, columns, rows, name):
    _check_rows(rows, columns, name)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow(row)
    return path


def sheet_to_item_rows(sheet, participant: str) -> list:
    rows = []
    for item in sheet.items:
        o = sheet.outcomes.get(item.item_id)
        rows.append({
            "participant": participant, "side": sheet.side, "item": item.item_id,
            "subscale": item.subscale, "feasible": item.feasible,
            "completed": bool(o and o.completed), "partial": bool(o and o.partial),
            "elapsed_s": round(o.elapsed, 3) if o else "",
            "score": sheet.scores.get(item.item_id, 0),
        })
    return rows


def participant_row(participant: str, sheet=None, selfcare=None,
                    throughput: float | None = None,
                    access_method: str = "", ratings: dict | None = None) -> dict:
    ratings = ratings or {}
    return {
        "participant": participant,
        "access_method": access_method,
        "throughput_bits_s": round(throughput, 3) if throughput is not None else "",
        "arat_total_robot": sheet.total if sheet else "",
        "arat_expected_max": sheet.expected_max if sheet else "",
        "selfcare_success": selfcare.success if selfcare else "",
        "selfcare_grasp_lift_s": _maybe(selfcare, "grasp_lift_s"),
        "selfcare_delivery_s": _maybe(selfcare, "delivery_s"),
        "selfcare_total_s": _maybe(selfcare, "total_s"),
        "ease_manipulation": ratings.get("ease_manipulation", ""),
        "use_manipulation": ratings.get("use_manipulation", ""),
        "improvement_manipulation": ratings.get("improvement_manipulation", ""),
        "ease_selfcare": ratings.get("ease_selfcare", ""),
        "use_selfcare": ratings.get("use_selfcare", ""),
        "improvement_selfcare": ratings.get("improvement_selfcare", ""),
    }


def _maybe(obj, attr):
    v = getattr(obj, attr, None) if obj else None
    return round(v, 3) if isinstance(v, float) else ("" if v is None else v)


def rollup_rows_to_s3(rows, session: str) -> list:
    return [{
        "session": session, "task": r.task, "level": r.level,
        "parent": r.parent or "", "start_s": round(r.start, 3),
        "end_s": round(r.end, 3), "duration_s": round(r.duration, 3),
        "commands": r.commands,
        "modes": ";".join(f"{k}={v}" for k, v in sorted(r.modes.items())),
    } for r in rows]


def export_datasets(outdir, s1_rows=(), s2_rows=(), s3_rows=()):
    """Write the three tables (header-only when a list is empty)."""
    outdir = Path(outdir)
    return {
        "s1": write_table(outdir / "s1_participants.csv", S1_COLUMNS, list(s1_rows), "S1"),
        "s2": write_table(outdir / "s2_items.csv", S2_COLUMNS, list(s2_rows), "S2"),
        "s3": write_table(outdir / "s3_tasks.csv", S3_COLUMNS, list(s3_rows), "S3"),
    }

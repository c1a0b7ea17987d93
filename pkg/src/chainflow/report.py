"""Report serialization: canonical JSON (byte-reproducible), hashing, and
per-step CSV export for plotting."""

from __future__ import annotations

import csv
import hashlib
import io
import json


def canonical_json_bytes(report: dict) -> bytes:
    return json.dumps(report, sort_keys=True, separators=(",", ":")).encode() + b"\n"


def report_hash(report: dict) -> str:
    return hashlib.sha256(canonical_json_bytes(report)).hexdigest()


_CSV_COLUMNS = (
    "step",
    "blocks_accepted",
    "blocks_rejected",
    "integrity_violations",
    "disputes",
    "confidentiality_breaches",
    "rewrite_attempts",
)

_KIND_TO_COLUMN = {
    "block_accepted": "blocks_accepted",
    "block_rejected": "blocks_rejected",
    "integrity_violation": "integrity_violations",
    "dispute_raised": "disputes",
    "confidentiality_breach": "confidentiality_breaches",
    "rewrite_attempt": "rewrite_attempts",
}


def per_step_csv(report: dict) -> str:
    """Cumulative per-step metrics derived from the event log."""
    steps = report["steps"]
    totals = {column: 0 for column in _CSV_COLUMNS[1:]}
    by_step: dict[int, dict[str, int]] = {}
    for entry in report.get("event_log", []):
        column = _KIND_TO_COLUMN.get(entry.get("kind"))
        if column is None:
            continue
        counts = by_step.setdefault(entry["step"], {c: 0 for c in _CSV_COLUMNS[1:]})
        counts[column] += 1
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(_CSV_COLUMNS)
    for step in range(steps):
        for column, delta in by_step.get(step, {}).items():
            totals[column] += delta
        writer.writerow([step] + [totals[c] for c in _CSV_COLUMNS[1:]])
    return out.getvalue()

"""Side-by-side comparison of cost reports, as JSON or CSV."""

from __future__ import annotations

import csv
import io
from typing import Sequence

from ecsplan.evaluate import CostReport

ROWS = [
    ("investment", "Inv. Cost (m¥)"),
    ("operation", "Op. Cost (m¥)"),
    ("total", "Total Cost (m¥)"),
    ("cable_length", "Cable length (km)"),
    ("loss_rate", "P_loss rate (%)"),
    ("wall_time", "Cal. Time (s)"),
    ("gap", "Opt. Gap (%)"),
    ("candidate_count", "Candidate cables"),
]


def _metric(report: CostReport, key: str):
    if key in ("wall_time", "gap"):
        stats = report.stats or {}
        value = stats.get(key)
        if key == "gap" and value is not None:
            value = 100.0 * value
        return value
    return getattr(report, key)


def compare_reports(reports: Sequence[CostReport]) -> dict:
    """Table of the headline metrics with percentage deltas against the first report."""
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    labels = [r.label or f"report{k}" for k, r in enumerate(reports)]
    rows = []
    for key, title in ROWS:
        values = [_metric(r, key) for r in reports]
        ref = values[0]
        deltas = []
        for v in values:
            if v is None or ref is None or ref == 0:
                deltas.append(None)
            else:
                deltas.append(100.0 * (v - ref) / ref)
        rows.append({"metric": key, "title": title, "values": values, "delta_pct": deltas})
    digests = {r.instance_digest for r in reports}
    warning = None
    if len(digests) > 1:
        warning = "reports come from different instances"
    return {"labels": labels, "rows": rows, "warning": warning}


def comparison_csv(table: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    labels = table["labels"]
    writer.writerow(["metric"] + labels + [f"delta_{lab}_pct" for lab in labels[1:]])
    for row in table["rows"]:
        values = ["" if v is None else f"{v:.6g}" for v in row["values"]]
        deltas = ["" if d is None else f"{d:.4f}" for d in row["delta_pct"][1:]]
        writer.writerow([row["title"]] + values + deltas)
    return buf.getvalue()

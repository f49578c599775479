from __future__ import annotations

import csv
import io
from typing import Sequence

from edgefilter.evaluation.metrics import round_half_up
from edgefilter.evaluation.scenario import ScenarioReport

FORMATS = ("markdown", "csv")


def _fmt_threshold(t: float) -> str:
    return f"{t:g}°C"


def table_rows(reports: Sequence[ScenarioReport]) -> tuple[list[str], list[list[str]]]:
    if not reports:
        raise ValueError("no reports to render")
    thresholds: list[float] = []
    for r in reports:
        for m in r.rows:
            if m.threshold not in thresholds:
                thresholds.append(m.threshold)
    same_site = all(r.train_source_id == r.test_source_id for r in reports)
    head = ["Location"] if same_site else ["Source", "Target"]
    head.append("MAE")
    for t in thresholds:
        tag = _fmt_threshold(t)
        head += [f"Total ({tag})", f"Correct ({tag})", f"Transmitted ({tag})", f"Reduction (%) ({tag})"]

    body = []
    for r in reports:
        row = [r.test_source_id] if same_site else [r.train_source_id, r.test_source_id]
        row.append(round_half_up(r.mae, 3))
        by_t = {m.threshold: m for m in r.rows}
        for t in thresholds:
            m = by_t.get(t)
            if m is None:
                row += ["", "", "", ""]
            else:
                row += [str(m.total), str(m.correct), str(m.transmitted), round_half_up(m.reduction_pct, 2)]
        body.append(row)
    return head, body


def render_table(reports: Sequence[ScenarioReport], format: str = "markdown") -> str:
    """Results table in the layout Location/Source-Target, MAE, then per threshold
    Total / Correct / Transmitted / Reduction (%)."""
    head, body = table_rows(reports)
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(head)
        w.writerows(body)
        return buf.getvalue()
    if format == "markdown":
        lines = ["| " + " | ".join(head) + " |", "|" + "|".join("---" for _ in head) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in body]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}; choose from {FORMATS}")

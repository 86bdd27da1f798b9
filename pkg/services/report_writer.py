"""Plain-text run artifacts: trace files and CSV/JSON audit reports."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path as FilePath
from typing import Dict, Iterable, List, Optional, Sequence

from analysis import AuditReport
from dynamics import Trace
from utils.rational import format_rational

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "seed",
    "n",
    "|U|",
    "c(T*)",
    "c(S_f)",
    "pos_ratio_num",
    "pos_ratio_den",
    "moves",
    "critical_moves",
    "audit_pass",
)
REPORT_FORMATS = ("csv", "json")


def report_row(report: AuditReport) -> Dict[str, object]:
    return {
        "seed": report.seed,
        "n": report.n,
        "|U|": report.terminals,
        "c(T*)": str(report.opt_cost),
        "c(S_f)": str(report.final_cost),
        "pos_ratio_num": report.pos_ratio.num,
        "pos_ratio_den": report.pos_ratio.den,
        "moves": report.moves,
        "critical_moves": report.critical_moves,
        "audit_pass": str(report.audit_pass).lower(),
    }


def failure_row(seed: int, error: str) -> Dict[str, object]:
    """Bench row for an instance whose run or audit failed."""
    row: Dict[str, object] = {column: "" for column in CSV_COLUMNS}
    row.update(seed=seed, audit_pass=f"false:{error}")
    return row


def format_csv(rows: Iterable[Dict[str, object]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def emit_report(reports: Sequence[AuditReport], fmt: str = "csv") -> str:
    """Render reports deterministically as CSV rows or a JSON array."""
    if fmt == "csv":
        return format_csv(report_row(r) for r in reports)
    if fmt == "json":
        payload = [r.model_dump(mode="json") for r in reports]
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")


def parse_report_json(text: str) -> List[AuditReport]:
    return [AuditReport.model_validate(item) for item in json.loads(text)]


def format_trace(trace: Trace) -> str:
    lines = [f"start phi={format_rational(trace.initial_potential or 0)}"]
    for record in trace.records:
        lines.append(
            "move {} {} mover={} dphi={} added={} removed={}{}".format(
                record.index,
                record.kind,
                record.mover,
                format_rational(record.delta),
                ",".join(map(str, record.added)) or "-",
                ",".join(map(str, record.removed)) or "-",
                "".join(f" [{tag}]" for tag in record.tags),
            )
        )
    for event in trace.critical_events:
        lines.append(f"critical {event.index} mover={event.mover} e_a={event.e_a} e_b={event.e_b} b={event.vertex}")
    for event in trace.sigma_events:
        prior = format_rational(event.prior_cost) if event.prior_cost is not None else "-"
        lines.append(f"sigma {event.index} w={event.vertex} edge={event.sigma_edge} prior={event.prior_edge} cost={prior}")
    for run in trace.main_loop_runs:
        lines.append(f"main-loop {run.index} v={run.vertex} edge={run.edge} u_v={run.u_v}")
    for ex in trace.sigma_exemptions:
        lines.append(
            f"sigma-exempt {ex.index} v={ex.vertex} edge={ex.edge} q={ex.member} "
            f"c_q={format_rational(ex.member_cost)} floor={format_rational(ex.floor)} "
            f"sigma={format_rational(ex.sigma_cost)}"
        )
    lines.extend(f"note {note}" for note in trace.annotations)
    return "\n".join(lines) + "\n"


def write_artifacts(out_dir: FilePath, name: str, report: Optional[AuditReport], trace: Optional[Trace],
                    fmt: str = "csv") -> List[FilePath]:
    """Write ``<name>.trace`` and ``<name>.<fmt>`` under ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if trace is not None:
        path = out_dir / f"{name}.trace"
        path.write_text(format_trace(trace), encoding="utf-8")
        written.append(path)
    if report is not None:
        path = out_dir / f"{name}.{fmt}"
        path.write_text(emit_report([report], fmt), encoding="utf-8")
        written.append(path)
    logger.info("Wrote %s", ", ".join(str(p) for p in written))
    return written


__all__ = [
    "CSV_COLUMNS",
    "REPORT_FORMATS",
    "emit_report",
    "failure_row",
    "format_csv",
    "format_trace",
    "parse_report_json",
    "report_row",
    "write_artifacts",
]

import os
from pathlib import Path

from pydantic import BaseModel

from src.state import CompareReport
from src.utils.files import atomic_write_text


def timing_enabled() -> bool:
    """GGPM_REPORT_TIMING=0 zeroes wall times so reports are byte-reproducible."""
    return os.environ.get("GGPM_REPORT_TIMING", "1").strip() != "0"


def reported_time(seconds: float) -> float:
    return float(seconds) if timing_enabled() else 0.0


def write_json_report(path, report: BaseModel) -> Path:
    return atomic_write_text(path, report.model_dump_json(indent=2) + "\n")


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def render_compare_table(report: CompareReport) -> str:
    """Fixed-width text table, one row per engine."""

    header = ["engine", "status", "log_marginal", "shared", "MAE", "MSE", "NLP", "iters", "time_s"]
    rows = [header]
    for r in report.rows:
        rows.append(
            [
                r.engine,
                "stalled" if r.converged is False else r.status,
                _fmt(r.log_marginal),
                _fmt(r.shared_log_marginal),
                _fmt(r.MAE),
                _fmt(r.MSE),
                _fmt(r.NLP),
                str(r.iterations),
                f"{r.wall_time:.2f}",
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    failed = [r for r in report.rows if r.status == "failed"]
    lines.extend(f"{r.engine}: {r.error}" for r in failed)
    return "\n".join(lines) + "\n"

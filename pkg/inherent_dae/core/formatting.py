"""
Text and CSV formatting of experiment reports.
Pure functions - easily testable.
"""
import csv
import io
from typing import List, Optional, TextIO

from .models import RunReport, RunRow

CSV_COLUMNS = ("method", "version", "stages", "order", "steps", "max_error", "geometric_error", "wall_ms")
TABLE_HEADERS = ("METHOD", "VERSION", "STAGES", "ORDER", "STEPS", "ERROR", "GEOM. ERROR", "WALL [ms]")


def format_error(value: Optional[float], precision: int = 3) -> str:
    """
    Format an error in the tables' exponent style.

    Args:
        value: Error value or None
        precision: Mantissa digits after the point

    Returns:
        "1.224e-07", or "-" when not measured
    """
    if value is None:
        return "-"
    return f"{value:.{precision}e}"


def format_steps(steps: Optional[int]) -> str:
    return "-" if steps is None else str(steps)


def format_wall(wall_ms: float) -> str:
    return f"{wall_ms:.1f}"


def failure_cell(failure: str, width: int = 60) -> str:
    """
    Table cell for a failed row: first line of the reason, cut to width.

    Args:
        failure: "ExceptionName: message" as recorded on the row
        width: Cell width in characters, ellipsis included

    Returns:
        "FAILED: <reason>" no longer than width
    """
    reason = failure.splitlines()[0] if failure else "unknown"
    cell = f"FAILED: {reason}"
    if len(cell) > width:
        cell = cell[:width - 1].rstrip() + "…"
    return cell


def row_cells(row: RunRow) -> List[str]:
    """Table cells of one row; failed rows carry their reason in the error columns."""
    if row.failed:
        reason = failure_cell(row.failure or "")
        return [row.method, row.version, row.stages, str(row.order), format_steps(row.steps), reason, "", format_wall(row.wall_ms)]
    return [
        row.method,
        row.version,
        row.stages,
        str(row.order),
        format_steps(row.steps),
        format_error(row.max_error),
        format_error(row.geometric_error),
        format_wall(row.wall_ms),
    ]


def format_table(report: RunReport) -> str:
    """
    Aligned text table of a report, one line per row in request order.

    Args:
        report: Experiment report

    Returns:
        Multi-line string with a title, header and rule
    """
    body = [row_cells(row) for row in report.rows]
    widths = [len(h) for h in TABLE_HEADERS]
    for cells in body:
        for i, cell in enumerate(cells):
            if i != 5 or not cell.startswith("FAILED"):
                widths[i] = max(widths[i], len(cell))

    def line(cells) -> str:
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells)).rstrip()

    lines = [f"Problem: {report.problem}", line(TABLE_HEADERS), "-" * (sum(widths) + 2 * (len(widths) - 1))]
    lines.extend(line(cells) for cells in body)
    if not body:
        lines.append("(no combinations requested)")
    return "\n".join(lines)


def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(report: RunReport, stream: TextIO, include_timing: bool = True) -> None:
    """Write the report rows with the fixed CSV columns (failed rows leave errors empty)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([
            row.method,
            row.version,
            row.stages,
            row.order,
            _csv_value(row.steps),
            _csv_value(None if row.failed else row.max_error),
            _csv_value(None if row.failed else row.geometric_error),
            f"{row.wall_ms:.3f}" if include_timing else "",
        ])


def report_to_csv(report: RunReport, include_timing: bool = True) -> str:
    """
    CSV text of a report.

    Args:
        report: Experiment report
        include_timing: Fill the wall_ms column; left empty, fixed-grid
            reports are identical across runs

    Returns:
        CSV document as a string
    """
    buffer = io.StringIO()
    write_csv(report, buffer, include_timing)
    return buffer.getvalue()

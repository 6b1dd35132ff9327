"""Tests for report tables and CSV export."""
import csv
import io

from inherent_dae.core.formatting import (
    CSV_COLUMNS,
    failure_cell,
    format_error,
    format_steps,
    format_table,
    report_to_csv,
    row_cells,
)
from inherent_dae.core.models import RunReport, RunRow


def _report() -> RunReport:
    return RunReport(
        problem="wensch",
        rows=[
            RunRow("IMPLICIT-EULER", "DIRECT", "1", 1, steps=None, wall_ms=3.25, failure="StepSizeError: budget"),
            RunRow("IMPLICIT-EULER", "INHERENT", "1", 1, steps=12, max_error=1.2241e-7, wall_ms=1.5),
        ],
    )


def test_format_error():
    assert format_error(None) == "-"
    assert format_error(1.2241e-7) == "1.224e-07"
    assert format_error(0.5, precision=1) == "5.0e-01"


def test_format_steps():
    assert format_steps(None) == "-"
    assert format_steps(42) == "42"


def test_failure_cell():
    assert failure_cell("StepSizeError: too many steps") == "FAILED: StepSizeError: too many steps"
    assert failure_cell("ConvergenceError: no decay\nhistory: 1, 2") == "FAILED: ConvergenceError: no decay"
    cell = failure_cell("RegularityError: " + "a" * 80, width=30)
    assert len(cell) == 30
    assert cell.endswith("…")


def test_failed_row_carries_reason():
    cells = row_cells(_report().rows[0])
    assert cells[5].startswith("FAILED: StepSizeError")
    assert cells[6] == ""


def test_table_keeps_request_order():
    table = format_table(_report())
    lines = table.splitlines()
    assert lines[0] == "Problem: wensch"
    assert lines[1].startswith("METHOD")
    assert set(lines[2]) == {"-"}
    assert "DIRECT" in lines[3]
    assert "1.224e-07" in lines[4]


def test_empty_table():
    assert "(no combinations requested)" in format_table(RunReport(problem="self3"))


def test_csv_columns_and_failed_rows():
    rows = list(csv.reader(io.StringIO(report_to_csv(_report()))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[1][4:7] == ["", "", ""]
    assert rows[1][7] == "3.250"
    assert rows[2][4] == "12"
    assert float(rows[2][5]) == 1.2241e-7


def test_csv_without_timing_is_reproducible():
    first = report_to_csv(_report(), include_timing=False)
    other = _report()
    other.rows[1].wall_ms = 99.0
    assert report_to_csv(other, include_timing=False) == first
    assert all(line.endswith(",") for line in first.splitlines()[1:])

"""Tests for the command-line interface."""
import csv

import pytest

from inherent_dae.cli.main import create_parser, default_stages, main, parse_params, run_experiment
from inherent_dae.core.errors import ConfigurationError
from inherent_dae.core.models import Method, ProblemSpec, SolverConfig, Version


def test_parse_params():
    assert parse_params(["delta=-1e3", " eta = 0.5"]) == {"delta": -1e3, "eta": 0.5}
    assert parse_params([]) == {}
    with pytest.raises(ConfigurationError):
        parse_params(["delta"])
    with pytest.raises(ConfigurationError):
        parse_params(["delta=big"])


def test_default_stages():
    assert default_stages(Method.DORMAND_PRINCE) == 7
    assert default_stages(Method.IMPLICIT_EULER) == 1
    assert default_stages(Method.RADAU) == 2


def test_parser_normalizes_case():
    args = create_parser().parse_args(["run", "--problem", "wensch", "--method", "radau", "--version", "direct"])
    assert args.method == "RADAU"
    assert args.version == "DIRECT"


def test_steps_and_tol_are_exclusive():
    with pytest.raises(SystemExit) as info:
        create_parser().parse_args(["run", "--problem", "wensch", "--steps", "10", "--tol", "1e-3"])
    assert info.value.code == 2


def test_empty_experiment():
    report = run_experiment(ProblemSpec("wensch"), [], tol=1e-5)
    assert report.rows == []
    assert not report.failed


def test_invalid_combination_is_rejected_before_running():
    with pytest.raises(ConfigurationError):
        run_experiment(ProblemSpec("wensch"), [(Method.GAUSS, 2, Version.DIRECT)], n_steps=10)


def test_numerical_failure_is_recorded_per_row():
    report = run_experiment(
        ProblemSpec("wensch"),
        [(Method.IMPLICIT_EULER, 1, Version.INHERENT), (Method.IMPLICIT_EULER, 1, Version.ROTATED)],
        tol=1e-8,
        config=SolverConfig(max_steps=3),
    )
    assert len(report.rows) == 2
    assert report.failed
    row = report.rows[0]
    assert row.failure.startswith("StepSizeError: ")
    assert row.steps == 3
    assert row.order == 1


def test_list_problems(capsys):
    main(["list-problems"])
    out = capsys.readouterr().out
    assert "5 built-in problems" in out
    assert "pendulum" in out
    assert out.rstrip().endswith("Done!")


def test_bad_parameter_exits_with_configuration_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--problem", "wensch", "--method", "RADAU", "--version", "DIRECT", "--param", "gamma=1"])
    assert info.value.code == 2
    assert "gamma" in capsys.readouterr().out


def test_run_needs_combination():
    with pytest.raises(SystemExit) as info:
        main(["run", "--problem", "skew4"])
    assert info.value.code == 2


def test_run_exports_reproducible_csv(tmp_path, capsys):
    argv = [
        "run", "--problem", "skew4", "--method", "GAUSS", "--version", "SKEW_ADJOINT",
        "--steps", "20", "--t-end", "1", "--no-timing", "--csv",
    ]
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    main(argv + [str(first)])
    main(argv + [str(second)])
    assert first.read_text() == second.read_text()
    rows = list(csv.DictReader(first.open()))
    assert len(rows) == 1
    assert rows[0]["method"] == "GAUSS"
    assert rows[0]["version"] == "SKEW_ADJOINT"
    assert rows[0]["steps"] == "20"
    assert rows[0]["wall_ms"] == ""
    assert float(rows[0]["geometric_error"]) < 1e-8
    out = capsys.readouterr().out
    assert "✓ GAUSS 2 SKEW_ADJOINT: 20 steps" in out


def test_t_end_must_exceed_start():
    with pytest.raises(SystemExit) as info:
        main(["run", "--problem", "wensch", "--method", "RADAU", "--version", "DIRECT", "--t-end", "0"])
    assert info.value.code == 2

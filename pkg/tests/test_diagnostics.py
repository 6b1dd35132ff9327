"""Tests for the property suite."""
import numpy as np
import pytest

from inherent_dae.core.diagnostics import (
    PropertyResult,
    VerifyReport,
    _guarded,
    check_nonlinear_array,
    check_taylor_arithmetic,
    run_property_suite,
)
from inherent_dae.core.errors import SingularPointError
from inherent_dae.problems import catalog, pendulum


def test_property_result_summary():
    ok = PropertyResult("Taylor", True, 1e-9, 1e-6, "10 cases")
    bad = PropertyResult("Orders", False, 0.5, 0.3)
    assert ok.summary() == "✓ Taylor: 1.000e-09 (limit 1.0e-06) - 10 cases"
    assert bad.summary().startswith("❌ Orders")


def test_verify_report_summary():
    report = VerifyReport([PropertyResult("a", True, 0.0, 1.0), PropertyResult("b", False, 2.0, 1.0)])
    lines = report.summary().splitlines()
    assert lines[0] == "=== Property Suite ==="
    assert lines[-1] == "1/2 properties hold"
    assert report.failed


def test_taylor_arithmetic_check(rng):
    result = check_taylor_arithmetic(rng, cases=50)
    assert result.passed, result.summary()


def test_pendulum_array_check():
    result = check_nonlinear_array(pendulum.pendulum_dae(), pendulum.initial_value())
    assert result.passed, result.summary()


def test_numerical_failure_becomes_failed_result():
    def check():
        raise SingularPointError("zero pivot at t=0")

    result = _guarded("Singular", 1.0, check)
    assert not result.passed
    assert result.value == np.inf
    assert result.detail == "raised SingularPointError: zero pivot at t=0"


@pytest.mark.integration
def test_full_suite_holds():
    report = run_property_suite(catalog.suite_inputs(), seed=0, taylor_cases=200, congruence_cases=50)
    assert len(report.results) == 8
    assert not report.failed, report.summary()

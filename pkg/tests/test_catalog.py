"""Tests for the built-in problem catalog."""
import numpy as np
import pytest

from inherent_dae.core.errors import ConfigurationError
from inherent_dae.core.models import CharValues, IntegratorSpec, Method, ProblemSpec, Symmetry, Version
from inherent_dae.problems import catalog, pendulum, wensch


def test_catalog_order():
    assert [entry.name for entry in catalog.list_problems()] == ["wensch", "pendulum", "self3", "skew4", "indef5"]


def test_entries():
    assert catalog.get_problem("pendulum").chars == CharValues(mu=2, a=3, d=2)
    assert catalog.get_problem("pendulum").nonlinear
    assert catalog.get_problem("self3").symmetry == Symmetry.SELF_ADJOINT
    assert catalog.get_problem("indef5").chars.d == 3
    for entry in catalog.list_problems():
        assert (entry.tol is None) != (entry.n_steps is None)
        assert entry.preset


def test_summary_mentions_characteristic_values():
    line = catalog.get_problem("wensch").summary()
    assert line.startswith("wensch")
    assert "mu=0 a=1 d=1" in line
    assert "delta=-100000" in line


def test_unknown_problem():
    with pytest.raises(ConfigurationError):
        catalog.get_problem("robertson")


def test_resolve_params():
    params = catalog.resolve_params(ProblemSpec("wensch", {"delta": -10}))
    assert params == {"delta": -10.0, "eta": 0.0}
    with pytest.raises(ConfigurationError):
        catalog.resolve_params(ProblemSpec("wensch", {"gamma": 1.0}))
    with pytest.raises(ConfigurationError):
        catalog.resolve_params(ProblemSpec("pendulum", {"omega": 1.0}))


def test_nonlinear_problem_rejects_linear_versions():
    spec = IntegratorSpec(Method.GAUSS, 2, Version.ROTATED, n_steps=10)
    with pytest.raises(ConfigurationError):
        catalog.measure(ProblemSpec("pendulum"), spec, (0.0, 1.0))


def test_pendulum_reference_starts_at_zero():
    spec = IntegratorSpec(Method.DORMAND_PRINCE, 7, Version.INHERENT, tol=1e-4)
    with pytest.raises(ConfigurationError):
        catalog.measure(ProblemSpec("pendulum"), spec, (1.0, 2.0))


def test_measure_stiff_linear_problem():
    spec = IntegratorSpec(Method.IMPLICIT_EULER, 1, Version.INHERENT, tol=1e-5)
    result = catalog.measure(ProblemSpec("wensch", {"delta": -1e3}), spec)
    assert result.steps > 0
    assert result.max_error < 1e-3
    assert result.geometric_error is None


def test_measure_flow_problem():
    spec = IntegratorSpec(Method.GAUSS, 2, Version.SKEW_ADJOINT, n_steps=50)
    result = catalog.measure(ProblemSpec("skew4"), spec, (0.0, 2.0))
    assert result.steps == 50
    assert result.max_error < 1e-5
    assert result.geometric_error < 1e-8


def test_suite_inputs():
    inputs = catalog.suite_inputs()
    assert inputs.nonlinear.name == pendulum.pendulum_dae().name
    assert np.array_equal(inputs.nonlinear_x0, pendulum.initial_value())
    assert inputs.linear_chars == wensch.CHARS
    assert [version for _, _, version in inputs.structured] == [
        Version.SELF_ADJOINT, Version.SKEW_ADJOINT, Version.SKEW_ADJOINT,
    ]


@pytest.mark.integration
def test_pendulum_measurement_reports_constraint():
    spec = IntegratorSpec(Method.GAUSS_LOBATTO, 2, Version.DIRECT, n_steps=100)
    result = catalog.measure(ProblemSpec("pendulum"), spec, (0.0, 1.0))
    assert result.constraint_residual < 1e-6
    assert result.max_error < 1e-3


# rows of the flow tables on [0, 200 pi] with 1000 steps and their error bands
FLOW_BANDS = [
    ("self3", Method.GAUSS, 2, Version.SELF_ADJOINT, 0.0, 5e-7),
    ("self3", Method.GAUSS, 2, Version.ROTATED, 1e-5, 1e-2),
    ("self3", Method.DORMAND_PRINCE, 7, Version.INHERENT, 1e-2, np.inf),
    ("skew4", Method.GAUSS, 2, Version.SKEW_ADJOINT, 0.0, 5e-7),
    ("skew4", Method.GAUSS_LOBATTO, 2, Version.DIRECT, 1e-2, np.inf),
    ("indef5", Method.GAUSS, 2, Version.SKEW_ADJOINT, 0.0, 5e-7),
    ("indef5", Method.GAUSS_LOBATTO, 2, Version.DIRECT, 1e-1, np.inf),
    ("indef5", Method.DORMAND_PRINCE, 7, Version.INHERENT, 1e-1, np.inf),
    ("indef5", Method.GAUSS, 2, Version.ROTATED, 1e-1, np.inf),
]


@pytest.mark.integration
@pytest.mark.parametrize("name, method, stages, version, low, high", FLOW_BANDS)
def test_flow_table_geometric_error_bands(name, method, stages, version, low, high):
    entry = catalog.get_problem(name)
    assert entry.t_span == (0.0, 200.0 * np.pi)
    spec = IntegratorSpec(method, stages, version, n_steps=entry.n_steps)
    result = catalog.measure(ProblemSpec(name), spec)
    assert result.steps == 1000
    assert low <= result.geometric_error <= high

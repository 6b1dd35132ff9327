"""Tests for the step functions and the integration driver."""
import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from inherent_dae.core import integrate as integrate_module
from inherent_dae.core.diagnostics import check_gauss_invariants, check_orders, observed_order
from inherent_dae.core.errors import ConfigurationError, StepSizeError
from inherent_dae.core.inherent import InherentRhs
from inherent_dae.core.integrate import (
    ErrorEstimate,
    error_scale,
    fd_jacobian,
    integrate,
    step_collocation,
    step_explicit,
    step_gauss,
    step_implicit_euler,
    step_radau,
)
from inherent_dae.core.models import IntegratorSpec, Method, SolverConfig, Version
from inherent_dae.core.reduce import ReducedWindow
from inherent_dae.core.tableaux import dormand_prince, gauss, radau_iia
from inherent_dae.problems import pendulum, wensch


def _linear_rhs(rate: float) -> InherentRhs:
    return InherentRhs(
        L=lambda t, x: rate * x,
        R=lambda t, x: np.zeros(0),
        affine=lambda t: (np.array([[rate]]), np.zeros(1)),
    )


def _nonaffine_rhs(rate: float) -> InherentRhs:
    return InherentRhs(L=lambda t, x: rate * x, R=lambda t, x: np.zeros(0))


# step functions ---------------------------------------------------------------


def test_implicit_euler_step_is_exact_rational():
    x = step_implicit_euler(_linear_rhs(-2.0), 0.0, np.ones(1), 0.1)
    assert_allclose(x, [1.0 / 1.2])


def test_gauss_two_step_is_pade():
    z = 0.3
    x = step_gauss(_linear_rhs(1.0), 0.0, np.ones(1), z, 2)
    pade = (1 + z / 2 + z * z / 12) / (1 - z / 2 + z * z / 12)
    assert_allclose(x, [pade], rtol=1e-13)


def test_newton_collocation_agrees_with_linear_solve():
    x_linear = step_collocation(_linear_rhs(-1.5), 0.0, np.array([2.0]), 0.2, radau_iia(2))
    x_newton = step_collocation(_nonaffine_rhs(-1.5), 0.0, np.array([2.0]), 0.2, radau_iia(2))
    assert_allclose(x_newton, x_linear, rtol=1e-9)


def test_linear_collocation_advances_matrix_states():
    rhs = InherentRhs(
        L=lambda t, x: x,
        R=lambda t, x: np.zeros((0,) + np.shape(x)[1:]),
        affine=lambda t: (np.eye(2), np.zeros(2)),
    )
    Phi = step_collocation(rhs, 0.0, np.eye(2), 0.1, gauss(2))
    assert Phi.shape == (2, 2)
    assert_allclose(Phi, np.exp(0.1) * np.eye(2), rtol=1e-8)


def test_explicit_step_error_estimate():
    x, estimate = step_explicit(_linear_rhs(1.0), 0.0, np.ones(1), 0.1, dormand_prince(7))
    assert_allclose(x, [np.exp(0.1)], rtol=1e-8)
    assert abs(estimate.primary[0]) < 1e-7


def test_dop853_step_is_accurate():
    x, estimate = step_explicit(_linear_rhs(1.0), 0.0, np.ones(1), 0.2, dormand_prince(13))
    assert_allclose(x, [np.exp(0.2)], rtol=1e-10)
    assert estimate.secondary is not None


def test_error_norm():
    assert ErrorEstimate(np.zeros(3)).norm(np.ones(3)) == 0.0
    assert ErrorEstimate(np.zeros(2), np.zeros(2)).norm(np.ones(2)) == 0.0
    assert_allclose(ErrorEstimate(np.array([3.0, 4.0])).norm(np.ones(2)), np.sqrt(12.5))
    assert_allclose(error_scale(np.array([1.0]), np.array([-2.0]), 0.1), [0.3])


def test_fd_jacobian_of_linear_rhs():
    J, f0 = fd_jacobian(_nonaffine_rhs(3.0), 0.0, np.array([1.0, 2.0]), 1e-7)
    assert_allclose(J, 3.0 * np.eye(2), atol=1e-6)
    assert_allclose(f0, [3.0, 6.0])


def test_step_radau_dispatch(index_two):
    window = ReducedWindow(index_two.dae, index_two.chars, 0.0, order=0)
    x0, _ = index_two.solution(0.0)
    x1 = step_radau(window, 0.0, x0, 0.1, 2)
    assert_allclose(x1, index_two.solution(0.1)[0], atol=1e-10)
    with pytest.raises(ConfigurationError):
        step_radau(object(), 0.0, x0, 0.1, 2)


def test_convergence_orders():
    result = check_orders()
    assert result.passed, result.summary()


def test_order_check_covers_explicit_pairs():
    detail = check_orders().detail
    assert "DORMAND-PRINCE 7" in detail
    assert "DORMAND-PRINCE 13" in detail


def test_dormand_prince_54_converges_with_its_label_order():
    def stepper(rhs, t, x, h):
        return step_explicit(rhs, t, x, h, dormand_prince(7))[0]

    assert abs(observed_order(stepper, 1.0, (32, 64)) - 4.0) < 0.3


def test_observed_order_of_implicit_euler():
    slope = observed_order(lambda rhs, t, x, h: step_implicit_euler(rhs, t, x, h), -1.0, (50, 100))
    assert abs(slope - 1.0) < 0.1


def test_gauss_preserves_quadratic_invariants(rng):
    result = check_gauss_invariants(rng)
    assert result.passed, result.summary()


# driver -----------------------------------------------------------------------------


@pytest.mark.parametrize("version", [Version.INHERENT, Version.SPIN_STABILIZED, Version.ROTATED])
def test_oscillator_on_fixed_grid(oscillator, version):
    spec = IntegratorSpec(Method.GAUSS, 2, version, n_steps=200)
    trajectory = integrate(spec, oscillator.dae, (0.0, 2.0 * np.pi), np.array([1.0, 0.0]), chars=oscillator.chars)
    assert trajectory.steps_taken == 200
    assert trajectory.times[-1] == 2.0 * np.pi
    assert_allclose(trajectory.states[-1], [1.0, 0.0], atol=1e-6)


@pytest.mark.parametrize("stages, tol, limit", [(7, 1e-8, 5e-6), (13, 1e-10, 1e-8)])
def test_oscillator_adaptive_dormand_prince(oscillator, stages, tol, limit):
    spec = IntegratorSpec(Method.DORMAND_PRINCE, stages, Version.INHERENT, tol=tol)
    trajectory = integrate(spec, oscillator.dae, (0.0, 4.0), np.array([1.0, 0.0]), chars=oscillator.chars)
    assert np.all(np.diff(trajectory.times) > 0.0)
    assert trajectory.times[-1] == 4.0
    exact = np.stack([oscillator.solution(t)[0] for t in trajectory.times])
    assert np.max(np.abs(trajectory.states - exact)) < limit


def test_oscillator_adaptive_radau_by_step_doubling(oscillator):
    spec = IntegratorSpec(Method.RADAU, 3, Version.ROTATED, tol=1e-6)
    trajectory = integrate(spec, oscillator.dae, (0.0, 2.0), np.array([1.0, 0.0]), chars=oscillator.chars)
    assert_allclose(trajectory.states[-1], oscillator.solution(2.0)[0], atol=1e-4)


@pytest.mark.parametrize("method, stages", [(Method.GAUSS_LOBATTO, 2), (Method.RADAU, 2), (Method.IMPLICIT_EULER, 1)])
def test_oscillator_direct(oscillator, method, stages):
    spec = IntegratorSpec(method, stages, Version.DIRECT, n_steps=400)
    trajectory = integrate(spec, oscillator.dae, (0.0, 1.0), np.array([1.0, 0.0]), chars=oscillator.chars)
    limit = 1e-2 if method == Method.IMPLICIT_EULER else 1e-7
    assert_allclose(trajectory.states[-1], oscillator.solution(1.0)[0], atol=limit)


def test_characteristic_values_found_when_omitted(oscillator):
    spec = IntegratorSpec(Method.GAUSS, 1, Version.INHERENT, n_steps=10)
    trajectory = integrate(spec, oscillator.dae, (0.0, 0.1), np.array([1.0, 0.0]))
    assert trajectory.states.shape == (11, 2)


@pytest.mark.parametrize("method, stages, version", [
    (Method.RADAU, 2, Version.DIRECT),
    (Method.GAUSS_LOBATTO, 2, Version.DIRECT),
    (Method.GAUSS, 2, Version.INHERENT),
    (Method.GAUSS, 2, Version.ROTATED),
])
def test_index_two_dae(index_two, method, stages, version):
    spec = IntegratorSpec(method, stages, version, n_steps=10)
    x0, _ = index_two.solution(0.0)
    trajectory = integrate(spec, index_two.dae, (0.0, 1.0), x0, chars=index_two.chars)
    exact = np.stack([index_two.solution(t)[0] for t in trajectory.times])
    assert np.max(np.abs(trajectory.states - exact)) < 1e-8


def test_flow_columns_advance_together(oscillator):
    spec = IntegratorSpec(Method.GAUSS, 2, Version.INHERENT, n_steps=50)
    trajectory = integrate(spec, oscillator.dae, (0.0, 1.0), np.eye(2), chars=oscillator.chars)
    assert trajectory.states.shape == (51, 2, 2)
    c, s = np.cos(1.0), np.sin(1.0)
    assert_allclose(trajectory.states[-1], [[c, s], [-s, c]], atol=1e-8)


def test_invalid_spec_is_rejected(oscillator):
    spec = IntegratorSpec(Method.DORMAND_PRINCE, 7, Version.DIRECT, n_steps=10)
    with pytest.raises(ConfigurationError):
        integrate(spec, oscillator.dae, (0.0, 1.0), np.array([1.0, 0.0]), chars=oscillator.chars)


def test_empty_interval_is_rejected(oscillator):
    spec = IntegratorSpec(Method.GAUSS, 2, Version.INHERENT, n_steps=10)
    with pytest.raises(ConfigurationError):
        integrate(spec, oscillator.dae, (1.0, 1.0), np.array([1.0, 0.0]), chars=oscillator.chars)


def test_step_budget_is_enforced(oscillator):
    spec = IntegratorSpec(Method.DORMAND_PRINCE, 7, Version.INHERENT, tol=1e-10)
    config = SolverConfig(max_steps=3)
    with pytest.raises(StepSizeError) as info:
        integrate(spec, oscillator.dae, (0.0, 10.0), np.array([1.0, 0.0]), chars=oscillator.chars, config=config)
    assert info.value.steps_taken == 3



def test_large_local_error_is_logged_once(oscillator, monkeypatch, caplog):
    original = integrate_module._LinearInherentStepper.step
    calls = []

    def inflated(self, t, state, h, tol):
        new, err = original(self, t, state, h, tol)
        calls.append(t)
        return new, (50.0 if len(calls) <= 2 else err)

    monkeypatch.setattr(integrate_module._LinearInherentStepper, "step", inflated)
    spec = IntegratorSpec(Method.DORMAND_PRINCE, 7, Version.INHERENT, tol=1e-6)
    with caplog.at_level(logging.WARNING, logger="inherent_dae.core.integrate"):
        trajectory = integrate(spec, oscillator.dae, (0.0, 1.0), np.array([1.0, 0.0]), chars=oscillator.chars)
    warnings = [r for r in caplog.records if "Local error" in r.getMessage()]
    assert len(warnings) == 1
    assert trajectory.rejected >= 2
    assert trajectory.times[-1] == 1.0

@pytest.mark.integration
@pytest.mark.parametrize("version", [Version.INHERENT, Version.SPIN_STABILIZED, Version.ROTATED])
def test_stiff_linear_inherent_versions_take_large_steps(version):
    spec = IntegratorSpec(Method.IMPLICIT_EULER, 1, version, tol=1e-5)
    trajectory = integrate(spec, wensch.wensch_dae(), (0.0, 1.0), wensch.initial_value(), chars=wensch.CHARS)
    error = np.max(np.abs(trajectory.states - wensch.exact_solution(trajectory.times)))
    assert trajectory.steps_taken <= 30
    assert error <= 1e-4


@pytest.mark.integration
def test_stiff_linear_direct_euler_needs_tiny_steps():
    spec = IntegratorSpec(Method.IMPLICIT_EULER, 1, Version.DIRECT, tol=1e-5)
    config = SolverConfig(max_steps=10000)
    with pytest.raises(StepSizeError):
        integrate(spec, wensch.wensch_dae(), (0.0, 1.0), wensch.initial_value(), chars=wensch.CHARS, config=config)


@pytest.mark.integration
@pytest.mark.parametrize("stages", [7, 13])
def test_pendulum_inherent_dormand_prince(pendulum_dae, stages):
    spec = IntegratorSpec(Method.DORMAND_PRINCE, stages, Version.INHERENT, tol=1e-5)
    trajectory = integrate(spec, pendulum_dae, (0.0, 10.0), pendulum.initial_value())
    assert trajectory.times[-1] == 10.0
    assert trajectory.steps_taken <= 200
    assert pendulum.solution_error(trajectory.times, trajectory.states) <= 1e-3
    assert pendulum.constraint_residual(trajectory.states) <= 1e-4


@pytest.mark.integration
@pytest.mark.parametrize("method, stages", [(Method.GAUSS_LOBATTO, 2), (Method.RADAU, 4)])
def test_pendulum_adaptive_direct_keeps_constraint(pendulum_dae, method, stages):
    spec = IntegratorSpec(method, stages, Version.DIRECT, tol=1e-5)
    trajectory = integrate(spec, pendulum_dae, (0.0, 10.0), pendulum.initial_value())
    assert trajectory.times[-1] == 10.0
    assert pendulum.constraint_residual(trajectory.states) <= 1e-6


@pytest.mark.integration
def test_pendulum_direct_radau_keeps_constraint(pendulum_dae):
    spec = IntegratorSpec(Method.RADAU, 2, Version.DIRECT, n_steps=50)
    trajectory = integrate(spec, pendulum_dae, (0.0, 1.0), pendulum.initial_value())
    assert pendulum.constraint_residual(trajectory.states) < 1e-6
    assert pendulum.solution_error(trajectory.times, trajectory.states) < 1e-3

"""Tests for truncated Taylor arithmetic."""
from math import factorial

import numpy as np
import pytest
from numpy.testing import assert_allclose

from inherent_dae.core.errors import ShapeError, SingularPointError
from inherent_dae.core.taylor import (
    TaylorArray,
    arith,
    block,
    cos,
    exp,
    hstack,
    inv,
    mat_arith,
    max_abs,
    sin,
    solve,
    sqrt,
    taylor_lift,
    vstack,
)


def test_variable_and_constant():
    t = TaylorArray.variable(2.0, 3)
    assert_allclose(t.coeffs, [2.0, 1.0, 0.0, 0.0])
    c = TaylorArray.constant(np.eye(2), 2)
    assert c.shape == (2, 2)
    assert c.order == 2
    assert_allclose(c.coefficient(1), 0.0)


def test_order_zero_variable_has_no_slope():
    assert_allclose(TaylorArray.variable(0.5, 0).coeffs, [0.5])


def test_polynomial_product():
    t = TaylorArray.variable(0.0, 2)
    p = (1.0 + t) * (1.0 - t)
    assert_allclose(p.coeffs, [1.0, 0.0, -1.0])


def test_geometric_series_by_division():
    t = TaylorArray.variable(0.0, 4)
    assert_allclose((1.0 / (1.0 - t)).coeffs, np.ones(5))


def test_sqrt_coefficients():
    t = TaylorArray.variable(0.0, 3)
    assert_allclose(sqrt(1.0 + t).coeffs, [1.0, 0.5, -0.125, 0.0625])


def test_exp_coefficients():
    t = TaylorArray.variable(0.0, 5)
    assert_allclose(exp(t).coeffs, [1.0 / factorial(k) for k in range(6)])


def test_sin_cos_coefficients():
    t = TaylorArray.variable(0.0, 5)
    assert_allclose(sin(t).coeffs, [0.0, 1.0, 0.0, -1.0 / 6.0, 0.0, 1.0 / 120.0], atol=1e-15)
    assert_allclose(cos(t).coeffs, [1.0, 0.0, -0.5, 0.0, 1.0 / 24.0, 0.0], atol=1e-15)


def test_pythagoras_holds_at_every_order():
    t = TaylorArray.variable(0.7, 6)
    s, c = sin(3.0 * t), cos(3.0 * t)
    identity = s * s + c * c
    assert_allclose(identity.coeffs, [1.0] + [0.0] * 6, atol=1e-13)


def test_derivative_and_truncate():
    e = exp(TaylorArray.variable(0.0, 3))
    assert_allclose(e.derivative().coeffs, [1.0, 1.0, 0.5])
    assert_allclose(e.derivative_value(2), 1.0)
    assert e.truncate(1).order == 1


def test_evaluate_sums_series():
    t = TaylorArray.variable(1.0, 2)
    square = t * t
    assert_allclose(square.evaluate(0.5), 2.25)


def test_matrix_times_scalar_broadcasts():
    t = TaylorArray.variable(0.0, 1)
    M = t * np.array([[1.0, 2.0], [3.0, 4.0]]) + np.eye(2)
    assert M.shape == (2, 2)
    assert_allclose(M.value, np.eye(2))
    assert_allclose(M.derivative_value(1), [[1.0, 2.0], [3.0, 4.0]])


def test_ndarray_on_the_left_dispatches_to_taylor():
    t = TaylorArray.variable(0.0, 1)
    M = t * np.eye(2) + np.eye(2)
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    result = P @ M
    assert isinstance(result, TaylorArray)
    assert_allclose(result.value, P)


def test_solve_matches_finite_differences():
    A0 = np.array([[4.0, 1.0], [0.5, 3.0]])
    A1 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    b0 = np.array([1.0, 2.0])

    def solution(t):
        return np.linalg.solve(A0 + np.sin(t) * A1, b0 * np.exp(t))

    tau = TaylorArray.variable(0.3, 2)
    exact = solve(sin(tau) * A1 + A0, exp(tau) * b0)
    oracle = taylor_lift(solution, 0.3, 2)
    assert max_abs(exact - oracle) < 1e-6


def test_inverse_at_every_slice():
    t = TaylorArray.variable(0.0, 3)
    A = t * np.array([[0.0, 1.0], [2.0, 0.0]]) + np.array([[3.0, 0.0], [1.0, 2.0]])
    product = A @ inv(A)
    assert_allclose(product.coeffs, TaylorArray.eye(2, 3).coeffs, atol=1e-14)


def test_stacking_helpers():
    t = TaylorArray.variable(0.0, 1)
    u = t * np.ones(2)
    w = hstack([TaylorArray.eye(2, 1), np.zeros((2, 1))], 1)
    assert w.shape == (2, 3)
    assert vstack([u, np.ones(1)], 1).shape == (3,)
    B = block([[TaylorArray.eye(2, 1), np.zeros((2, 1))], [np.zeros((1, 2)), np.ones((1, 1))]], 1)
    assert_allclose(B.value, np.eye(3))


def test_arith_and_mat_arith_dispatch():
    t = TaylorArray.variable(0.0, 2)
    assert_allclose(arith("div", 1.0 + t, 1.0 + t).coeffs, [1.0, 0.0, 0.0], atol=1e-15)
    M = mat_arith("scale", TaylorArray.eye(2, 2), t)
    assert_allclose(M.derivative_value(1), np.eye(2))
    assert mat_arith("transpose", hstack([TaylorArray.eye(2, 2), np.zeros((2, 1))], 2)).shape == (3, 2)


@pytest.mark.parametrize("op", ["add", "mul"])
def test_arith_rejects_mixed_orders(op):
    with pytest.raises(ShapeError):
        arith(op, TaylorArray.variable(0.0, 1), TaylorArray.variable(0.0, 2))


def test_mat_arith_rejects_nonconformable_shapes():
    with pytest.raises(ShapeError):
        mat_arith("matmul", TaylorArray.eye(2, 1), TaylorArray.eye(3, 1))


def test_division_by_zero_value_raises():
    t = TaylorArray.variable(0.0, 2)
    with pytest.raises(SingularPointError):
        1.0 / t


def test_sqrt_of_nonpositive_value_raises():
    with pytest.raises(SingularPointError):
        sqrt(TaylorArray.variable(-1.0, 1))


def test_singular_solve_raises():
    with pytest.raises(SingularPointError):
        solve(TaylorArray.constant(np.ones((2, 2)), 1), TaylorArray.constant(np.ones(2), 1))


def test_derivative_of_order_zero_raises():
    with pytest.raises(ShapeError):
        TaylorArray.variable(0.0, 0).derivative()


def test_truncate_cannot_raise_order():
    with pytest.raises(ShapeError):
        TaylorArray.variable(0.0, 1).truncate(2)

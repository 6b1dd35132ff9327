"""Tests for the Runge-Kutta coefficient tables."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from inherent_dae.core.errors import ConfigurationError
from inherent_dae.core.tableaux import (
    dormand_prince,
    gauss,
    gauss_nodes,
    lagrange_matrices,
    lobatto_nodes,
    radau_iia,
    radau_nodes,
)


@pytest.mark.parametrize("stages", [7, 13])
def test_dormand_prince_consistency(stages):
    tableau = dormand_prince(stages)
    assert tableau.explicit
    assert tableau.stages == stages
    assert_allclose(tableau.b.sum(), 1.0)
    assert_allclose(tableau.A.sum(axis=1), tableau.c, atol=1e-12)
    assert_allclose(tableau.error.sum(), 0.0, atol=1e-12)


def test_dormand_prince_54_orders():
    tableau = dormand_prince(7)
    assert tableau.order == 4
    for k in range(1, 6):
        assert_allclose(tableau.b @ tableau.c ** (k - 1), 1.0 / k, atol=1e-12)


def test_dormand_prince_54_advances_with_fourth_order_weights():
    tableau = dormand_prince(7)
    weights = tableau.weights
    for k in range(1, 5):
        assert_allclose(weights @ tableau.c ** (k - 1), 1.0 / k, atol=1e-12)
    assert abs(weights @ tableau.c**4 - 1.0 / 5) > 1e-6
    assert_allclose(dormand_prince(13).weights, dormand_prince(13).b)


def test_dormand_prince_rejects_other_sizes():
    with pytest.raises(ConfigurationError):
        dormand_prince(5)


@pytest.mark.parametrize("s", [1, 2, 3])
def test_gauss_quadrature_orders(s):
    tableau = gauss(s)
    assert not tableau.explicit
    assert tableau.order == 2 * s
    for k in range(1, 2 * s + 1):
        assert_allclose(tableau.b @ tableau.c ** (k - 1), 1.0 / k, atol=1e-12)
    # collocation: stage integrals of c^(k-1) are exact up to k = s
    for k in range(1, s + 1):
        assert_allclose(tableau.A @ tableau.c ** (k - 1), tableau.c**k / k, atol=1e-12)


def test_radau_nodes_end_at_one():
    for s in (1, 2, 3, 4):
        nodes = radau_nodes(s)
        assert nodes.size == s
        assert_allclose(nodes[-1], 1.0)
    assert_allclose(radau_nodes(2), [1.0 / 3.0, 1.0])


def test_radau_one_is_implicit_euler():
    tableau = radau_iia(1)
    assert_allclose(tableau.A, [[1.0]])
    assert_allclose(tableau.b, [1.0])
    assert tableau.order == 1


def test_radau_stiff_accuracy():
    tableau = radau_iia(3)
    assert_allclose(tableau.A[-1], tableau.b, atol=1e-12)


def test_gauss_nodes_are_symmetric():
    nodes = gauss_nodes(3)
    assert_allclose(nodes + nodes[::-1], 1.0)
    assert_allclose(nodes[1], 0.5)


def test_lobatto_nodes():
    assert_allclose(lobatto_nodes(2), [0.0, 1.0])
    assert_allclose(lobatto_nodes(3), [0.0, 0.5, 1.0], atol=1e-15)
    with pytest.raises(ConfigurationError):
        lobatto_nodes(1)


def test_lagrange_matrices():
    nodes = lobatto_nodes(3)
    V, D = lagrange_matrices(nodes, nodes)
    assert_allclose(V, np.eye(3), atol=1e-12)
    # derivative of the interpolant of t^2 is 2t
    assert_allclose(D @ nodes**2, 2.0 * nodes, atol=1e-12)

"""Shared fixtures for the test suite."""
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
import pytest

from inherent_dae.core.darray import LinearDae
from inherent_dae.core.models import CharValues, SolverConfig
from inherent_dae.core.taylor import TaylorArray, sin
from inherent_dae.problems import flows, pendulum, wensch


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def config():
    return SolverConfig()


@pytest.fixture
def mild_wensch():
    """Non-stiff member of the stiff linear family with a nonzero eta."""
    return wensch.wensch_dae(delta=-3.0, eta=0.5)


@pytest.fixture
def pendulum_dae():
    return pendulum.pendulum_dae()


@pytest.fixture(params=["self3", "skew4", "indef5"])
def flow_name(request):
    return request.param


@pytest.fixture
def flow_definition(flow_name):
    return flows.DEFINITIONS[flow_name]


@dataclass
class KnownSolution:
    """Linear DAE with its characteristic values and exact solution t -> (x, x')"""
    dae: LinearDae
    chars: CharValues
    solution: Callable[[float], Tuple[np.ndarray, np.ndarray]]


@pytest.fixture
def index_two():
    """
    x1' = x3 + sin t,  x2' = x1,  0 = x1 + t.

    The hidden constraint x3 = -1 - sin t leaves one differential variable.
    """

    def provider(tau):
        E = TaylorArray.constant(np.diag([1.0, 1.0, 0.0]), tau.order)
        A = TaylorArray.constant(np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), tau.order)
        zero = TaylorArray.zeros((), tau.order)
        f = TaylorArray(np.stack([sin(tau).coeffs, zero.coeffs, tau.coeffs], axis=-1))
        return E, A, f

    def solution(t):
        x = np.array([-t, -0.5 * t * t, -1.0 - np.sin(t)])
        xdot = np.array([-1.0, -t, -np.cos(t)])
        return x, xdot

    return KnownSolution(LinearDae(n=3, provider=provider, name="index two"), CharValues(mu=1, a=2, d=1), solution)


@pytest.fixture
def oscillator():
    """x' = (x2, -x1) written as a DAE with E = I."""

    def provider(tau):
        A = TaylorArray.constant(np.array([[0.0, 1.0], [-1.0, 0.0]]), tau.order)
        return TaylorArray.eye(2, tau.order), A, TaylorArray.zeros(2, tau.order)

    def solution(t):
        x = np.array([np.cos(t), -np.sin(t)])
        return x, np.array([-np.sin(t), -np.cos(t)])

    return KnownSolution(LinearDae(n=2, provider=provider, name="oscillator"), CharValues(mu=0, a=0, d=2), solution)

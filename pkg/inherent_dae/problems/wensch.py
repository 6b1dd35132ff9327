"""
Stiff linear test DAE whose direct implicit Euler discretization is explicit
Euler on its inherent ODE.

    [d-1  d t] x' = [-e(d-1)  -e d t ] x + f(t)
    [ 0    0 ]      [  d-1    d t - 1]

with d = delta != 1 and e = eta. f is manufactured so that
x1(t) = x2(t) = exp(-t).
"""
from typing import Dict

import numpy as np

from ..core.darray import LinearDae
from ..core.errors import ConfigurationError
from ..core.models import CharValues
from ..core.taylor import TaylorArray, exp

DEFAULTS: Dict[str, float] = {"delta": -1e5, "eta": 0.0}
CHARS = CharValues(mu=0, a=1, d=1)


def wensch_dae(delta: float = DEFAULTS["delta"], eta: float = DEFAULTS["eta"]) -> LinearDae:
    """
    Build the DAE for parameters delta and eta.

    Raises:
        ConfigurationError: If delta == 1 (the pair is singular)
    """
    if delta == 1.0:
        raise ConfigurationError("delta must differ from 1")
    slope_E = np.array([[0.0, delta], [0.0, 0.0]])
    base_E = np.array([[delta - 1.0, 0.0], [0.0, 0.0]])
    slope_A = np.array([[0.0, -eta * delta], [0.0, delta]])
    base_A = np.array([[-eta * (delta - 1.0), 0.0], [delta - 1.0, -1.0]])

    def provider(tau: TaylorArray):
        E = tau * slope_E + base_E
        A = tau * slope_A + base_A
        decay = exp(-tau)
        # f = E x' - A x with x = exp(-t) (1, 1)
        f1 = (eta - 1.0) * (tau * delta + (delta - 1.0)) * decay
        f2 = -(tau * delta + (delta - 2.0)) * decay
        f = TaylorArray(np.stack([f1.coeffs, f2.coeffs], axis=-1))
        return E, A, f

    return LinearDae(n=2, provider=provider, name="wensch")


def exact_solution(t) -> np.ndarray:
    """x(t) = exp(-t) (1, 1), shape (len(t), 2) for array input."""
    decay = np.exp(-np.asarray(t, dtype=float))
    return np.stack([decay, decay], axis=-1)


def initial_value() -> np.ndarray:
    return np.ones(2)

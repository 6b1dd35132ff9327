"""
Pendulum of unit length and mass in Cartesian coordinates.

    x3' = x1,  x4' = x2,  -x1' = 2 x3 x5,  -x2' = 1 + 2 x4 x5,  0 = x3^2 + x4^2 - 1

The derivative array is assembled analytically: the i-th time derivative of
each equation follows from the Leibniz rule on the jet (x, x', ..., x^(l+1)),
so F_l and its Jacobians are exact for any level l.
"""
from functools import lru_cache
from math import comb

import numpy as np
from scipy.integrate import solve_ivp

from ..core.darray import NonlinearDae
from ..core.models import CharValues, Symmetry

N = 5
CHARS = CharValues(mu=2, a=3, d=2)


def _jet(x: np.ndarray, y: np.ndarray, level: int) -> np.ndarray:
    """Rows k = 0..level+1 hold x^(k)."""
    return np.vstack([x, np.asarray(y, dtype=float).reshape(level + 1, N)])


def derivative_array(level: int, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """F_level stacked by derivative order, each block in equation order."""
    z = _jet(x, y, level)
    blocks = []
    for i in range(level + 1):
        prod35 = sum(comb(i, k) * z[k, 2] * z[i - k, 4] for k in range(i + 1))
        prod45 = sum(comb(i, k) * z[k, 3] * z[i - k, 4] for k in range(i + 1))
        norm = sum(comb(i, k) * (z[k, 2] * z[i - k, 2] + z[k, 3] * z[i - k, 3]) for k in range(i + 1))
        first = 1.0 if i == 0 else 0.0
        blocks.append([
            z[i + 1, 2] - z[i, 0],
            z[i + 1, 3] - z[i, 1],
            -z[i + 1, 0] - 2.0 * prod35,
            -z[i + 1, 1] - first - 2.0 * prod45,
            first - norm,
        ])
    return np.asarray(blocks, dtype=float).ravel()


def _jet_jacobian(level: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d F_level / d(x, y) with columns ordered like the jet."""
    z = _jet(x, y, level)
    J = np.zeros(((level + 1) * N, (level + 2) * N))

    def col(order: int, comp: int) -> int:
        return order * N + comp

    for i in range(level + 1):
        r = i * N
        J[r, col(i + 1, 2)] = 1.0
        J[r, col(i, 0)] = -1.0
        J[r + 1, col(i + 1, 3)] = 1.0
        J[r + 1, col(i, 1)] = -1.0
        J[r + 2, col(i + 1, 0)] = -1.0
        J[r + 3, col(i + 1, 1)] = -1.0
        for m in range(i + 1):
            c = comb(i, m)
            J[r + 2, col(m, 2)] += -2.0 * c * z[i - m, 4]
            J[r + 2, col(m, 4)] += -2.0 * c * z[i - m, 2]
            J[r + 3, col(m, 3)] += -2.0 * c * z[i - m, 4]
            J[r + 3, col(m, 4)] += -2.0 * c * z[i - m, 3]
            J[r + 4, col(m, 2)] += -2.0 * c * z[i - m, 2]
            J[r + 4, col(m, 3)] += -2.0 * c * z[i - m, 3]
    return J


def M_of(level: int, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return _jet_jacobian(level, x, y)[:, N:]


def N_of(level: int, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    J = _jet_jacobian(level, x, y)
    out = np.zeros((J.shape[0], J.shape[1] - N))
    out[:, :N] = -J[:, :N]
    return out


def residual(t: float, x: np.ndarray, xdot: np.ndarray) -> np.ndarray:
    return derivative_array(0, t, x, xdot)


def pendulum_dae() -> NonlinearDae:
    return NonlinearDae(
        n=N,
        mu=CHARS.mu,
        a=CHARS.a,
        d=CHARS.d,
        F=residual,
        F_array=derivative_array,
        M_of=M_of,
        N_of=N_of,
        name="pendulum",
        symmetry=Symmetry.SELF_ADJOINT,
    )


def initial_value() -> np.ndarray:
    return np.array([0.0, 0.0, 1.0, 0.0, 0.0])


def constraint_residual(states: np.ndarray) -> float:
    """max |x3^2 + x4^2 - 1| over the given states."""
    states = np.atleast_2d(states)
    return float(np.max(np.abs(states[:, 2] ** 2 + states[:, 3] ** 2 - 1.0)))


def from_angle(theta: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Cartesian state of the angle theta (x3 = cos, x4 = sin) and its rate."""
    s, c = np.sin(theta), np.cos(theta)
    return np.stack([-s * omega, c * omega, c, s, 0.5 * (omega**2 - s)], axis=-1)


@lru_cache(maxsize=8)
def _reference(t_end: float, tol: float):
    return solve_ivp(
        lambda t, u: [u[1], -np.cos(u[0])],
        (0.0, t_end),
        [0.0, 0.0],
        method="Radau",
        rtol=tol,
        atol=tol,
        dense_output=True,
    )


def reference_solution(times: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """
    Tight-tolerance reference from the angle equation theta'' = -cos(theta).

    Args:
        times: Output times in [0, max(times)]
        tol: rtol = atol of the reference run

    Returns:
        States of shape (len(times), 5)
    """
    times = np.asarray(times, dtype=float)
    sol = _reference(float(max(times.max(), 1e-12)), tol)
    theta, omega = sol.sol(times)
    return from_angle(theta, omega)


def solution_error(times: np.ndarray, states: np.ndarray) -> float:
    """Max-abs deviation from the reference over all components and times."""
    return float(np.max(np.abs(np.asarray(states) - reference_solution(times))))


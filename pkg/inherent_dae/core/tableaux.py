"""
Runge-Kutta coefficient tables.

Collocation tables are generated from their nodes: with V the Vandermonde
matrix of the nodes, the Lagrange basis has monomial coefficients V^{-1} and
A, b follow by integrating the monomials. Dormand-Prince tables are fixed.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy.integrate import DOP853

from .errors import ConfigurationError


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients (A, b, c) with an optional embedded error pair"""
    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int
    error: Optional[np.ndarray] = None  # b - b_hat over all stages (FSAL stage included)
    error_low: Optional[np.ndarray] = None  # second estimator of the 8(5,3) pair
    advance_embedded: bool = False  # step with b - error, the pair's lower-order solution

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def weights(self) -> np.ndarray:
        """Weights the step advances with."""
        if self.advance_embedded and self.error is not None:
            return self.b - self.error
        return self.b

    @property
    def explicit(self) -> bool:
        return bool(np.allclose(np.triu(self.A), 0.0))


# Dormand-Prince ------------------------------------------------------------


def _dormand_prince_54() -> ButcherTableau:
    A = np.zeros((7, 7))
    A[1, :1] = [1 / 5]
    A[2, :2] = [3 / 40, 9 / 40]
    A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
    A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
    A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
    A[6, :6] = [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
    b = A[6].copy()
    c = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
    error = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
    # the 4th-order solution is propagated, as the order label says
    return ButcherTableau("DORMAND-PRINCE 5(4)", A, b, c, order=4, error=error, advance_embedded=True)


def _dormand_prince_87() -> ButcherTableau:
    s = DOP853.n_stages
    A = np.zeros((s + 1, s + 1))
    A[:s, :s] = DOP853.A
    A[s, :s] = DOP853.B
    b = np.append(DOP853.B, 0.0)
    c = np.append(DOP853.C, 1.0)
    return ButcherTableau(
        "DORMAND-PRINCE 8(7)", A, b, c, order=7, error=np.asarray(DOP853.E5), error_low=np.asarray(DOP853.E3),
    )


@lru_cache(maxsize=None)
def dormand_prince(stages: int) -> ButcherTableau:
    """
    Embedded Dormand-Prince pair with 7 or 13 stages (last stage FSAL).

    Raises:
        ConfigurationError: For any other stage count
    """
    if stages == 7:
        return _dormand_prince_54()
    if stages == 13:
        return _dormand_prince_87()
    raise ConfigurationError(f"DORMAND-PRINCE pairs have 7 or 13 stages, got {stages}")


# collocation -----------------------------------------------------------------


def gauss_nodes(s: int) -> np.ndarray:
    x, _ = legendre.leggauss(s)
    return (x + 1.0) / 2.0


def radau_nodes(s: int) -> np.ndarray:
    """Right Radau points: roots of P_s - P_{s-1} mapped to [0, 1] (last node is 1)."""
    poly = legendre.Legendre.basis(s) - legendre.Legendre.basis(s - 1)
    x = np.sort(np.real(poly.roots()))
    x[-1] = 1.0
    return (x + 1.0) / 2.0


def lobatto_nodes(m: int) -> np.ndarray:
    """m Lobatto points on [0, 1]: both endpoints and the roots of P_{m-1}'."""
    if m < 2:
        raise ConfigurationError(f"Lobatto rules need at least 2 nodes, got {m}")
    inner = np.sort(np.real(legendre.Legendre.basis(m - 1).deriv().roots())) if m > 2 else np.zeros(0)
    x = np.concatenate([[-1.0], inner, [1.0]])
    return (x + 1.0) / 2.0


def lagrange_matrices(nodes: np.ndarray, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Values and derivatives of the Lagrange basis on `nodes` at `points`.

    Returns:
        Tuple (V, D) with V[p, j] = l_j(points[p]) and D[p, j] = l_j'(points[p])
    """
    nodes = np.asarray(nodes, dtype=float)
    points = np.asarray(points, dtype=float)
    m = nodes.size
    coeffs = np.linalg.inv(np.vander(nodes, m, increasing=True))
    powers = np.vander(points, m, increasing=True)
    k = np.arange(m)
    dpowers = np.zeros_like(powers)
    dpowers[:, 1:] = k[1:] * powers[:, :-1]
    return powers @ coeffs, dpowers @ coeffs


def collocation_tableau(nodes: np.ndarray, name: str, order: int) -> ButcherTableau:
    """Collocation Runge-Kutta table of the given nodes."""
    c = np.asarray(nodes, dtype=float)
    s = c.size
    coeffs = np.linalg.inv(np.vander(c, s, increasing=True))
    k = np.arange(1, s + 1)
    integrals = c[:, None] ** k / k
    A = integrals @ coeffs
    b = (1.0 / k) @ coeffs
    return ButcherTableau(name, A, b, c, order=order)


@lru_cache(maxsize=None)
def gauss(s: int) -> ButcherTableau:
    return collocation_tableau(gauss_nodes(s), f"GAUSS {s}", order=2 * s)


@lru_cache(maxsize=None)
def radau_iia(s: int) -> ButcherTableau:
    return collocation_tableau(radau_nodes(s), f"RADAU IIA {s}", order=2 * s - 1)

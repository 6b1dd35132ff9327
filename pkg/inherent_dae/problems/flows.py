"""
Homogeneous linear DAEs with a known quadratic-group flow.

Each problem is built from a constant pair (E_hat, A_hat) and the mixing
matrix Q(t) = I + s(t) P, P the tridiagonal pattern of ones off the
diagonal and s(t) = sin(omega t) / 2:

    E = Q^T E_hat Q,    A = Q^T A_hat Q - Q^T E_hat Q'

In x_hat = Q x the DAE is E_hat x_hat' = A_hat x_hat, so the leading d
components of x_hat carry a flow in the group of the leading block of E_hat.
"""
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np
from scipy.linalg import block_diag, expm

from ..core.darray import LinearDae
from ..core.errors import ConfigurationError
from ..core.models import CharValues, Symmetry
from ..core.smoothfact import signature_matrix, symplectic_unit
from ..core.taylor import TaylorArray, sin

DEFAULTS: Dict[str, float] = {"omega": 1.0}

_ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class FlowDefinition:
    """Constant pair in the flow coordinates and the group it preserves"""
    name: str
    E_hat: np.ndarray
    A_hat: np.ndarray
    symmetry: Symmetry
    chars: CharValues
    X: np.ndarray  # group matrix of the leading d x d block
    p: int = 0
    q: int = 0

    @property
    def n(self) -> int:
        return self.E_hat.shape[0]

    @property
    def d(self) -> int:
        return self.chars.d

    def generator(self) -> np.ndarray:
        """B_hat with x_hat_1' = B_hat x_hat_1."""
        d = self.d
        return np.linalg.solve(self.E_hat[:d, :d], self.A_hat[:d, :d])


DEFINITIONS: Dict[str, FlowDefinition] = {
    "self3": FlowDefinition(
        name="self3",
        E_hat=block_diag(_ROTATION, np.zeros((1, 1))),
        A_hat=np.eye(3),
        symmetry=Symmetry.SELF_ADJOINT,
        chars=CharValues(mu=0, a=1, d=2),
        X=symplectic_unit(1),
    ),
    "skew4": FlowDefinition(
        name="skew4",
        E_hat=np.diag([1.0, 1.0, 0.0, 0.0]),
        A_hat=block_diag(_ROTATION, _ROTATION),
        symmetry=Symmetry.SKEW_ADJOINT,
        chars=CharValues(mu=0, a=2, d=2),
        X=signature_matrix(2, 0),
        p=2,
        q=0,
    ),
    "indef5": FlowDefinition(
        name="indef5",
        E_hat=np.diag([1.0, 1.0, -1.0, 0.0, 0.0]),
        A_hat=block_diag(_ROTATION, np.zeros((1, 1)), _ROTATION),
        symmetry=Symmetry.SKEW_ADJOINT,
        chars=CharValues(mu=0, a=2, d=3),
        X=signature_matrix(2, 1),
        p=2,
        q=1,
    ),
}


def _pattern(n: int) -> np.ndarray:
    return np.eye(n, k=1) + np.eye(n, k=-1)


def mixing_matrix(n: int, omega: float) -> Callable[[TaylorArray], TaylorArray]:
    """tau -> Q(tau) = I + sin(omega tau) / 2 * P in Taylor arithmetic."""
    pattern = _pattern(n)

    def Q(tau: TaylorArray) -> TaylorArray:
        return 0.5 * sin(omega * tau) * pattern + np.eye(n)

    return Q


def to_hat_map(n: int, omega: float) -> Callable[[float], np.ndarray]:
    """t -> Q(t), so that x_hat = Q(t) x."""
    pattern = _pattern(n)
    return lambda t: np.eye(n) + 0.5 * np.sin(omega * t) * pattern


def flow_dae(name: str, omega: float = DEFAULTS["omega"]) -> LinearDae:
    """
    Build one of the constructed flow problems.

    Raises:
        ConfigurationError: For an unknown name
    """
    if name not in DEFINITIONS:
        raise ConfigurationError(f"Unknown flow problem '{name}' (choose from {', '.join(DEFINITIONS)})")
    definition = DEFINITIONS[name]
    n = definition.n
    Q_of = mixing_matrix(n, omega)
    E_hat, A_hat = definition.E_hat, definition.A_hat

    def provider(tau: TaylorArray):
        order = tau.order
        # one extra order so Q' is exact to the requested order
        Q_ext = Q_of(TaylorArray.variable(float(tau.value), order + 1))
        Q, dQ = Q_ext.truncate(order), Q_ext.derivative()
        QT = Q.T
        E = QT @ E_hat @ Q
        A = QT @ A_hat @ Q - QT @ E_hat @ dQ
        return E, A, TaylorArray.zeros(n, order)

    return LinearDae(
        n=n, provider=provider, symmetry=definition.symmetry,
        p=definition.p if definition.symmetry == Symmetry.SKEW_ADJOINT else None,
        q=definition.q if definition.symmetry == Symmetry.SKEW_ADJOINT else None,
        name=name,
    )


def exact_flow(name: str, times: np.ndarray) -> np.ndarray:
    """Flow of the leading block in x_hat coordinates, shape (len(times), d, d)."""
    B = DEFINITIONS[name].generator()
    return np.stack([expm(t * B) for t in np.asarray(times, dtype=float)])

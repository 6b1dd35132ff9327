"""
Flows of homogeneous linear DAEs and their distance from a quadratic group.

Pure functions over integrate() - the flow columns share one fixed grid and
are advanced together as a matrix state.
"""
import logging
from typing import Callable, Optional, Tuple

import numpy as np

from .darray import LinearDae
from .errors import ConfigurationError, ShapeError
from .integrate import integrate
from .models import CharValues, FlowReport, IntegratorSpec, SolverConfig
from .smoothfact import signature_matrix, symplectic_unit

logger = logging.getLogger(__name__)

__all__ = ["geometric_error", "propagate_flow", "signature_matrix", "symplectic_unit"]


def geometric_error(Phi: np.ndarray, X: np.ndarray) -> float:
    """
    Max-abs entry of Phi^T X Phi - X.

    Args:
        Phi: d x d flow matrix
        X: d x d group-defining matrix (J, S or any other)

    Returns:
        Geometric error as a float
    """
    Phi = np.asarray(Phi, dtype=float)
    X = np.asarray(X, dtype=float)
    if Phi.shape != X.shape:
        raise ShapeError(f"Flow of shape {Phi.shape} does not match group matrix {X.shape}")
    return float(np.max(np.abs(Phi.T @ X @ Phi - X), initial=0.0))


def propagate_flow(
    dae: LinearDae,
    spec: IntegratorSpec,
    t_span: Tuple[float, float],
    X: np.ndarray,
    to_hat: Optional[Callable[[float], np.ndarray]] = None,
    x0: Optional[np.ndarray] = None,
    chars: Optional[CharValues] = None,
    config: Optional[SolverConfig] = None,
) -> FlowReport:
    """
    Integrate the d flow columns of a homogeneous DAE on a fixed grid.

    States are read in the coordinates x_hat = to_hat(t) x, whose leading d
    components carry the flow; column i starts from x_hat_1 = e_i.

    Args:
        dae: Homogeneous linear DAE
        spec: Fixed-grid integrator
        t_span: (t0, t_end)
        X: d x d group-defining matrix
        to_hat: t -> n x n map into the flow coordinates (identity when omitted)
        x0: n x d initial states (defaults to to_hat(t0)^{-1} [I_d; 0])
        chars: Characteristic values of the DAE
        config: Solver configuration

    Returns:
        FlowReport with Phi[0] = I_d and the geometric error on the grid

    Raises:
        ConfigurationError: If the spec is adaptive
    """
    if spec.adaptive:
        raise ConfigurationError("Flow columns share a fixed grid; give n_steps, not tol")
    X = np.asarray(X, dtype=float)
    n, d = dae.n, X.shape[0]
    if to_hat is None:
        to_hat = lambda t: np.eye(n)  # noqa: E731
    t0 = float(t_span[0])
    if x0 is None:
        x0 = np.linalg.solve(to_hat(t0), np.eye(n)[:, :d])
    trajectory = integrate(spec, dae, t_span, x0, chars=chars, config=config)
    Phi = np.stack([(to_hat(t) @ state)[:d] for t, state in zip(trajectory.times, trajectory.states)])
    Phi[0] = np.eye(d)
    errors = np.array([geometric_error(P, X) for P in Phi])
    logger.debug("Flow of '%s': max geometric error %.3e", dae.name, errors.max())
    return FlowReport(
        times=trajectory.times,
        Phi=Phi,
        X=X,
        errors=errors,
        max_error=float(errors.max()),
        steps_taken=trajectory.steps_taken,
    )

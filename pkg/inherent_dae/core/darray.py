"""
Derivative arrays of linear and nonlinear DAEs.

For E(t)x' = A(t)x + f(t) the level-mu array stacks the DAE and its first mu
time derivatives as M_mu y = N_mu x + g_mu with y = (x', x'', ..., x^(mu+1)).
Block (i, j) of M is C(i,j) E^(i-j) - C(i,j+1) A^(i-j-1); the first block
column of N stacks A, A', A'', ... and g stacks f, f', f'', ...
"""
import logging
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Iterable, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, ShapeError
from .models import Symmetry
from .taylor import TaylorArray

logger = logging.getLogger(__name__)

# tau -> (E, A, f), each a TaylorArray of tau's order
Provider = Callable[[TaylorArray], Tuple[TaylorArray, TaylorArray, TaylorArray]]


@dataclass
class LinearDae:
    """
    Linear time-varying DAE E(t)x' = A(t)x + f(t).

    The provider is evaluated on a Taylor time variable and must return
    E, A, f with exact coefficients up to that variable's order. Building the
    level-mu array for an order-K window needs order mu + K.
    """
    n: int
    provider: Provider
    symmetry: Symmetry = Symmetry.NONE
    p: Optional[int] = None
    q: Optional[int] = None
    name: str = ""

    def coefficients(self, t: float, order: int) -> Tuple[TaylorArray, TaylorArray, TaylorArray]:
        """
        Taylor coefficients of E, A and f at t.

        Raises:
            ShapeError: If the provider returns wrong shapes or too low an order
        """
        E, A, f = self.provider(TaylorArray.variable(t, order))
        for label, value, shape in (("E", E, (self.n, self.n)), ("A", A, (self.n, self.n)), ("f", f, (self.n,))):
            if value.shape != shape:
                raise ShapeError(f"Provider of '{self.name}' returned {label} with shape {value.shape}, expected {shape}")
            if value.order < order:
                raise ShapeError(
                    f"Provider of '{self.name}' returned {label} to order {value.order}, need {order}"
                )
        return E.truncate(order), A.truncate(order), f.truncate(order)

    def symmetry_defect(self, t: float) -> float:
        """Max-abs violation of the declared symmetry relations at t (0 for NONE)."""
        E, A, _ = self.coefficients(t, 1)
        E0, A0, dE = E.value, A.value, E.derivative_value(1)
        if self.symmetry == Symmetry.SELF_ADJOINT:
            defects = (E0.T + E0, A0.T - A0 - dE)
        elif self.symmetry == Symmetry.SKEW_ADJOINT:
            defects = (E0.T - E0, A0.T + A0 + dE)
        else:
            return 0.0
        return float(max(np.max(np.abs(d)) for d in defects))

    def check_symmetry(self, samples: Iterable[float], tol: float = 1e-10) -> None:
        """
        Validate the symmetry tag at the sample times.

        Raises:
            ConfigurationError: If a relation fails by more than tol
        """
        for t in samples:
            defect = self.symmetry_defect(t)
            if defect > tol:
                raise ConfigurationError(
                    f"'{self.name}' is tagged {self.symmetry.value} but violates it by {defect:.3e} at t={t}"
                )


@dataclass
class DerivativeArrayLinear:
    """M_mu, N_mu, g_mu as Taylor values at one time point"""
    mu: int
    n: int
    M: TaylorArray  # (mu+1)n x (mu+1)n
    N: TaylorArray  # (mu+1)n x (mu+1)n, first block column only
    g: TaylorArray  # (mu+1)n

    @property
    def order(self) -> int:
        return self.M.order

    def leading(self, level: int) -> "DerivativeArrayLinear":
        """Leading blocks of a lower level; equal to building that level directly."""
        if level > self.mu:
            raise ShapeError(f"Cannot restrict level {self.mu} to {level}")
        size = (level + 1) * self.n
        return DerivativeArrayLinear(
            mu=level,
            n=self.n,
            M=self.M[:size, :size],
            N=self.N[:size, :size],
            g=self.g[:size],
        )

    def N_first(self) -> TaylorArray:
        """N_mu [I_n 0 ... 0]^T (the only nonzero block column)."""
        return self.N[:, : self.n]


def _series_derivatives(x: TaylorArray, count: int, order: int):
    """x, x', ..., x^(count) as Taylor series truncated to `order`."""
    out = []
    current = x
    for k in range(count + 1):
        out.append(current.truncate(order))
        if k < count:
            current = current.derivative()
    return out


def build_linear_array(dae: LinearDae, mu: int, t: float, order: int = 1) -> DerivativeArrayLinear:
    """
    Assemble the level-mu derivative array at t with Taylor order K.

    Args:
        dae: Linear DAE whose provider supplies coefficients to order mu + K
        mu: Level of the array
        t: Expansion point
        order: Taylor order K of the assembled blocks

    Returns:
        DerivativeArrayLinear with blocks per the binomial formula
    """
    if mu < 0:
        raise ShapeError(f"Level must be nonnegative, got {mu}")
    n = dae.n
    E, A, f = dae.coefficients(t, mu + order)
    dE = _series_derivatives(E, mu, order)
    dA = _series_derivatives(A, mu, order)
    df = _series_derivatives(f, mu, order)
    size = (mu + 1) * n
    M = np.zeros((order + 1, size, size))
    N = np.zeros((order + 1, size, size))
    for i in range(mu + 1):
        rows = slice(i * n, (i + 1) * n)
        N[:, rows, :n] = dA[i].coeffs
        for j in range(i + 1):
            blk = comb(i, j) * dE[i - j].coeffs
            if j < i:
                blk = blk - comb(i, j + 1) * dA[i - j - 1].coeffs
            M[:, rows, j * n:(j + 1) * n] = blk
    g = np.concatenate([d.coeffs for d in df], axis=1)
    return DerivativeArrayLinear(mu=mu, n=n, M=TaylorArray(M), N=TaylorArray(N), g=TaylorArray(g))


def shift_derivatives(next_array: DerivativeArrayLinear) -> Tuple[TaylorArray, TaylorArray, TaylorArray]:
    """
    Time derivatives of the level-mu array from the level-(mu+1) array.

    Uses dM[i,j] = M'[i+1,j] - M'[i,j-1] + N'[i,j], dN[i] = N'[i+1] and
    dg[i] = g'[i+1] on the leading (mu+1)n rows and columns, where primes
    denote blocks of the level-(mu+1) array. Coefficient slices carry over,
    so an order-K input yields derivatives as order-K series.

    Returns:
        Tuple of (dM_mu, dN_mu, dg_mu)
    """
    n = next_array.n
    mu = next_array.mu - 1
    if mu < 0:
        raise ShapeError("Shift relations need an array of level at least 1")
    size = (mu + 1) * n
    M1, N1, g1 = next_array.M.coeffs, next_array.N.coeffs, next_array.g.coeffs
    dM = M1[:, n:size + n, :size].copy()
    dM[:, :, n:] -= M1[:, :size, :size - n]
    dM += N1[:, :size, :size]
    dN = N1[:, n:size + n, :size].copy()
    dg = g1[:, n:size + n].copy()
    return TaylorArray(dM), TaylorArray(dN), TaylorArray(dg)


# nonlinear ---------------------------------------------------------------


@dataclass
class NonlinearDae:
    """
    Nonlinear DAE F(t, x, x') = 0 with a user-supplied derivative array.

    F_array(l, t, x, y) evaluates F_l with y = (x', ..., x^(l+1)); M_of and
    N_of return the Jacobian with respect to y and minus the Jacobian with
    respect to x (padded with zero columns to the width of M).
    """
    n: int
    mu: int
    a: int
    d: int
    F: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    F_array: Callable[[int, float, np.ndarray, np.ndarray], np.ndarray]
    M_of: Callable[[int, float, np.ndarray, np.ndarray], np.ndarray]
    N_of: Callable[[int, float, np.ndarray, np.ndarray], np.ndarray]
    name: str = ""
    symmetry: Symmetry = Symmetry.NONE

    def __post_init__(self):
        if self.a + self.d != self.n:
            raise ConfigurationError(f"a + d = {self.a + self.d} differs from n = {self.n}")

    def jacobians(self, t: float, x: np.ndarray, xdot: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(F_x', F_x) at a point, from the level-0 array."""
        return self.M_of(0, t, x, xdot), -self.N_of(0, t, x, xdot)


@dataclass
class NonlinearArrayReport:
    """Finite-difference consistency of a nonlinear derivative array"""
    level: int
    residual_mismatch: float  # |F_array(0) - F|
    M_deviation: float
    N_deviation: float
    details: dict = field(default_factory=dict)

    @property
    def max_deviation(self) -> float:
        return max(self.residual_mismatch, self.M_deviation, self.N_deviation)


def _central_jacobian(fun: Callable[[np.ndarray], np.ndarray], z: np.ndarray, step: float) -> np.ndarray:
    columns = []
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = step
        columns.append((fun(z + e) - fun(z - e)) / (2.0 * step))
    return np.stack(columns, axis=1)


def verify_nonlinear_array(
    dae: NonlinearDae,
    t: float,
    x: np.ndarray,
    y: np.ndarray,
    level: Optional[int] = None,
    step: float = 1e-7,
) -> NonlinearArrayReport:
    """
    Compare M_of and N_of with central differences of F_array at one point.

    Args:
        dae: Nonlinear DAE with its derivative array
        t: Time
        x: State
        y: Derivative unknowns of length (level+1)n
        level: Array level (defaults to mu + 1)
        step: Difference step

    Returns:
        NonlinearArrayReport with max-abs deviations
    """
    level = dae.mu + 1 if level is None else level
    n = dae.n
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    residual = np.max(np.abs(dae.F_array(0, t, x, y[:n]) - dae.F(t, x, y[:n])))
    M_fd = _central_jacobian(lambda v: dae.F_array(level, t, x, v), y, step)
    Fx_fd = _central_jacobian(lambda v: dae.F_array(level, t, v, y), x, step)
    M = dae.M_of(level, t, x, y)
    N = dae.N_of(level, t, x, y)
    M_dev = float(np.max(np.abs(M - M_fd)))
    N_dev = float(max(np.max(np.abs(N[:, :n] + Fx_fd)), np.max(np.abs(N[:, n:]), initial=0.0)))
    logger.debug("Array check of '%s' at level %d: M %.2e, N %.2e", dae.name, level, M_dev, N_dev)
    return NonlinearArrayReport(level=level, residual_mismatch=float(residual), M_deviation=M_dev, N_deviation=N_dev)


def linear_as_nonlinear(dae: LinearDae, mu: int, a: int, d: int) -> NonlinearDae:
    """Wrap a linear DAE in the nonlinear interface (arrays built at order 0)."""

    def F(t, x, xdot):
        E, A, f = dae.coefficients(t, 0)
        return E.value @ xdot - A.value @ x - f.value

    def F_array(level, t, x, y):
        arr = build_linear_array(dae, level, t, 0)
        return arr.M.value @ y - arr.N_first().value @ x - arr.g.value

    def M_of(level, t, x, y):
        return build_linear_array(dae, level, t, 0).M.value

    def N_of(level, t, x, y):
        return build_linear_array(dae, level, t, 0).N.value

    return NonlinearDae(
        n=dae.n, mu=mu, a=a, d=d, F=F, F_array=F_array, M_of=M_of, N_of=N_of,
        name=dae.name, symmetry=dae.symmetry,
    )

"""
Inherent ODE of a reduced DAE.

A transformation x = Q(t)[x1; x2] splits the reduced DAE into a d-dimensional
ODE x1' = L(t, x1) and an algebraic recovery x2 = R(t, x1). The strategies
below fix Q on one window; linear problems yield the affine form
x1' = B(t) x1 + c(t), nonlinear ones are evaluated pointwise by Gauss-Newton
on the level-(mu+1) derivative array.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import lstsq, lu_factor, lu_solve, null_space, qr

from .darray import NonlinearDae
from .errors import (
    ConfigurationError,
    ConvergenceError,
    RankDeficiencyError,
    ShapeError,
    SingularPointError,
)
from .models import QStrategy, SolverConfig, Structure, Symmetry, Version
from .reduce import ReducedWindow
from .smoothfact import (
    complete_to_basis,
    congruence_to_j,
    congruence_to_s,
    frozen_qr,
)
from .taylor import TaylorArray, hstack, solve

logger = logging.getLogger(__name__)


@dataclass
class QWindow:
    """Transformation Q(t) = [Q1 Q2] fixed on a window starting at t0"""
    t0: float
    d: int
    a: int
    kind: Version
    evaluate: Callable[[float], TaylorArray]  # t -> order-1 Q
    rows: Optional[Callable[[float], TaylorArray]] = None  # Z1 override for the differential rows
    structure: Structure = Structure.NONE
    target: Optional[np.ndarray] = None  # leading block of Q^T E Q

    def Q(self, t: float) -> TaylorArray:
        return self.evaluate(t)

    @property
    def split(self) -> Tuple[int, int]:
        return self.d, self.a


@dataclass
class InherentRhs:
    """x1' = L(t, x1) and x2 = R(t, x1); affine(t) -> (B, c) when linear"""
    L: Callable[[float, np.ndarray], np.ndarray]
    R: Callable[[float, np.ndarray], np.ndarray]
    structure: Structure = Structure.NONE
    affine: Optional[Callable[[float], Tuple[np.ndarray, np.ndarray]]] = None

    @property
    def linear(self) -> bool:
        return self.affine is not None


def _first_order(x: TaylorArray) -> TaylorArray:
    if x.order < 1:
        raise ShapeError("Q construction needs Taylor order at least 1")
    return x.truncate(1)


def _column_add(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    """M + v with v added to every column when M holds several states."""
    return M + (v[:, None] if M.ndim == 2 else v)


# Q strategies -------------------------------------------------------------


def _rotated_q(reduced: ReducedWindow, rank_tol: float):
    """Q from a frozen QR of E1^T so that E1 Q2 = 0."""
    first = frozen_qr(_first_order(reduced.blocks(reduced.t0).E1.T), rank_tol=rank_tol)
    decisions = first.decisions

    def evaluate(t: float) -> TaylorArray:
        if t == reduced.t0:
            return first.Q
        return frozen_qr(_first_order(reduced.blocks(t).E1.T), decisions, rank_tol).Q

    return evaluate


def _congruence_q(reduced: ReducedWindow, kind: Version, config: SolverConfig):
    """Q = [base W, completion of base] with W^T base^T E base W = J or S."""
    dae = reduced.dae
    expected = Symmetry.SELF_ADJOINT if kind == Version.SELF_ADJOINT else Symmetry.SKEW_ADJOINT
    if dae.symmetry != expected:
        raise ConfigurationError(
            f"{kind.value} needs a {expected.value} problem, '{dae.name}' is {dae.symmetry.value}"
        )
    state: Dict[str, object] = {}

    def build(t: float):
        blocks = reduced.blocks(t)
        base = _first_order(blocks.base)
        E = _first_order(blocks.E)
        Ebar = base.T @ E @ base
        if kind == Version.SELF_ADJOINT:
            result = congruence_to_j(Ebar, state.get("cong"), config.pivot_tol)
        else:
            p, q = dae.p, dae.q
            if p is None or q is None:
                lam = np.linalg.eigvalsh(0.5 * (Ebar.value + Ebar.value.T))
                p, q = int(np.sum(lam > 0)), int(np.sum(lam < 0))
            result = congruence_to_s(Ebar, p, q, state.get("cong"), config.pivot_tol)
        completion, comp_decisions = complete_to_basis(base, state.get("comp"))
        if "cong" not in state:
            state["cong"], state["comp"], state["target"] = result.decisions, comp_decisions, result.target
        Q1 = base @ result.W
        return hstack([Q1, completion], 1), Q1

    cache: Dict[float, tuple] = {}

    def lookup(t: float):
        if t not in cache:
            cache[t] = build(t)
        return cache[t]

    lookup(reduced.t0)
    structure = Structure.HAMILTONIAN if kind == Version.SELF_ADJOINT else Structure.GENERALIZED_ORTHOGONAL
    return (lambda t: lookup(t)[0]), (lambda t: lookup(t)[1]), structure, state["target"]


def _prescribed_q(strategy: QStrategy, n: int):
    def evaluate(t: float) -> TaylorArray:
        Q = strategy.prescribed(t)
        if not isinstance(Q, TaylorArray) or Q.shape != (n, n):
            raise ShapeError(f"Prescribed Q must be an {n}x{n} TaylorArray")
        return _first_order(Q)

    return evaluate


def _check_solvability(window: QWindow, reduced: ReducedWindow, pivot_tol: float) -> None:
    """A2 Q2 must be nonsingular at the window start."""
    if window.a == 0:
        return
    blocks = reduced.blocks(window.t0)
    A22 = blocks.A2.value @ window.Q(window.t0).value[:, window.d:]
    s = np.linalg.svd(A22, compute_uv=False)
    if s[-1] <= pivot_tol * max(s[0], 1.0):
        raise SingularPointError(
            f"Algebraic block A2 Q2 is singular at t={window.t0} (sigma_min {s[-1]:.3e})"
        )


def choose_q(
    strategy: QStrategy,
    reduced: ReducedWindow,
    t0: Optional[float] = None,
    h: float = 0.0,
    config: Optional[SolverConfig] = None,
) -> QWindow:
    """
    Fix Q on the window of a reduced DAE.

    Args:
        strategy: Which transformation to build
        reduced: Reduced DAE frozen at the window start
        t0: Window start (defaults to the reduced window's)
        h: Window length, informational
        config: Solver configuration

    Raises:
        ConfigurationError: On a symmetry mismatch
        SingularPointError: If the solvability condition fails at t0
    """
    config = config or SolverConfig()
    t0 = reduced.t0 if t0 is None else t0
    if t0 != reduced.t0:
        raise ConfigurationError(f"Window start {t0} differs from the reduced window's {reduced.t0}")
    chars = reduced.chars
    kind = strategy.kind
    rows = None
    structure = Structure.NONE
    target = None
    if kind == Version.ROTATED:
        evaluate = _rotated_q(reduced, config.rank_tol)
    elif kind in (Version.INHERENT, Version.SPIN_STABILIZED):
        Q0 = _rotated_q(reduced, config.rank_tol)(t0)
        if kind == Version.INHERENT:
            frozen = TaylorArray.constant(Q0.value, 1)

            def evaluate(t: float) -> TaylorArray:
                return frozen
        else:
            value, slope = Q0.value.copy(), Q0.derivative_value(1).copy()

            def evaluate(t: float) -> TaylorArray:
                return TaylorArray(np.stack([value + (t - t0) * slope, slope]))
    elif kind in (Version.SELF_ADJOINT, Version.SKEW_ADJOINT):
        evaluate, rows, structure, target = _congruence_q(reduced, kind, config)
    elif kind == Version.PRESCRIBED:
        evaluate = _prescribed_q(strategy, reduced.dae.n)
    else:
        raise ConfigurationError(f"{kind.value} does not fix an inherent ODE")
    window = QWindow(
        t0=t0, d=chars.d, a=chars.a, kind=kind, evaluate=evaluate, rows=rows,
        structure=structure, target=target,
    )
    _check_solvability(window, reduced, config.pivot_tol)
    logger.debug("Fixed Q by %s on window at t=%.6g (h=%.3g)", kind.value, t0, h)
    return window


# linear inherent ODE -------------------------------------------------------


@dataclass
class TransformedBlocks:
    """Affine inherent ODE data at one time point"""
    Q: np.ndarray
    B: np.ndarray
    c: np.ndarray
    P: np.ndarray  # x2 = P x1 + p0
    p0: np.ndarray
    E11: np.ndarray


def _lu(M: np.ndarray, pivot_tol: float, label: str, t: float):
    lu, piv = lu_factor(M, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.size and diag.min() <= pivot_tol * max(diag.max(), 1.0):
        raise SingularPointError(f"{label} is singular at t={t} (pivot {diag.min():.3e})")
    return lu, piv


class InherentWindow:
    """
    Affine inherent ODE x1' = B(t) x1 + c(t) of a linear DAE on one window.

    Eliminates x2 = P x1 + p0 from the transformed reduced DAE; the
    derivative of the elimination comes from the Taylor slices of A2 Q.
    """

    def __init__(self, reduced: ReducedWindow, qwindow: QWindow, config: Optional[SolverConfig] = None):
        self.reduced = reduced
        self.qwindow = qwindow
        self.config = config or SolverConfig()
        self.d, self.a = qwindow.split
        self._cache: Dict[float, TransformedBlocks] = {}

    @property
    def t0(self) -> float:
        return self.qwindow.t0

    @property
    def structure(self) -> Structure:
        return self.qwindow.structure

    def transformed(self, t: float) -> TransformedBlocks:
        cached = self._cache.get(t)
        if cached is not None:
            return cached
        d, a = self.d, self.a
        tol = self.config.pivot_tol
        blocks = self.reduced.blocks(t)
        if self.qwindow.rows is not None:
            blocks = blocks.with_rows(self.qwindow.rows(t))
        Q = self.qwindow.Q(t)
        Q1, Q2 = Q[:, :d], Q[:, d:]
        dQ = Q.derivative_value(1)
        E1, A1 = blocks.E1.value, blocks.A1.value
        E11 = E1 @ Q1.value
        E12 = E1 @ Q2.value
        A11 = A1 @ Q1.value - E1 @ dQ[:, :d]
        A12 = A1 @ Q2.value - E1 @ dQ[:, d:]
        f1 = blocks.f1.value
        if a:
            A2, f2 = _first_order(blocks.A2), _first_order(blocks.f2)
            A22 = A2 @ Q2
            _lu(A22.value, tol, "A2 Q2", t)
            P = solve(A22, -(A2 @ Q1), 0.0)
            p0 = solve(A22, -f2, 0.0)
            P_val, dP = P.value, P.derivative_value(1)
            p_val, dp = p0.value, p0.derivative_value(1)
        else:
            P_val = dP = np.zeros((0, d))
            p_val = dp = np.zeros(0)
        G = E11 + E12 @ P_val
        factor = _lu(G, tol, "E11 + E12 P", t)
        B = lu_solve(factor, A11 + A12 @ P_val - E12 @ dP, check_finite=False)
        c = lu_solve(factor, A12 @ p_val + f1 - E12 @ dp, check_finite=False)
        cached = TransformedBlocks(Q=Q.value, B=B, c=c, P=P_val, p0=p_val, E11=E11)
        self._cache[t] = cached
        return cached

    def affine(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        tb = self.transformed(t)
        return tb.B, tb.c

    def L(self, t: float, x1: np.ndarray) -> np.ndarray:
        tb = self.transformed(t)
        return _column_add(tb.B @ x1, tb.c)

    def R(self, t: float, x1: np.ndarray) -> np.ndarray:
        tb = self.transformed(t)
        return _column_add(tb.P @ x1, tb.p0)

    def project(self, t: float, x: np.ndarray) -> np.ndarray:
        """x1 = [I 0] Q(t)^{-1} x."""
        return np.linalg.solve(self.transformed(t).Q, x)[: self.d]

    def lift(self, t: float, x1: np.ndarray) -> np.ndarray:
        """x = Q(t) [x1; R(t, x1)]."""
        return self.transformed(t).Q @ np.concatenate([x1, self.R(t, x1)], axis=0)

    def consistent(self, t: float, x: np.ndarray) -> np.ndarray:
        """Keep the x1 part of x and recompute x2 from the constraints."""
        return self.lift(t, self.project(t, x))

    def structure_defect(self, t: float) -> float:
        """Departure of B(t) from the Lie algebra of the window's target form."""
        B = self.transformed(t).B
        if self.structure == Structure.NONE or self.qwindow.target is None:
            return 0.0
        XB = self.qwindow.target @ B
        if self.structure == Structure.HAMILTONIAN:
            return float(np.max(np.abs(XB - XB.T)))
        return float(np.max(np.abs(XB + XB.T)))

    def rhs(self) -> InherentRhs:
        return InherentRhs(L=self.L, R=self.R, structure=self.structure, affine=self.affine)


def inherent_rhs_linear(window: InherentWindow, t: float, x1: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(x1', x2) of the affine inherent ODE at t."""
    return window.L(t, x1), window.R(t, x1)


def make_linear_window(
    dae,
    chars,
    strategy: QStrategy,
    t0: float,
    h: float = 0.0,
    config: Optional[SolverConfig] = None,
) -> InherentWindow:
    config = config or SolverConfig()
    reduced = ReducedWindow(dae, chars, t0, config)
    return InherentWindow(reduced, choose_q(strategy, reduced, t0, h, config), config)


# nonlinear inherent ODE -----------------------------------------------------


@dataclass
class GaussNewtonResult:
    """Solution of F_{mu+1}(t, x, y) = 0, [I 0] Q^{-1} x = x1"""
    x: np.ndarray
    y: np.ndarray  # (x', x'', ...)
    residuals: List[float]
    jacobian: np.ndarray

    @property
    def xdot(self) -> np.ndarray:
        return self.y[: self.x.size]

    @property
    def w(self) -> np.ndarray:
        return self.y[self.x.size:]

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])


def minimum_norm_gauss_newton(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    z0: np.ndarray,
    tol: float,
    max_iter: int,
    label: str = "Gauss-Newton",
) -> Tuple[np.ndarray, List[float], np.ndarray]:
    """
    Gauss-Newton with minimum-norm steps for underdetermined systems.

    Returns:
        Tuple of (solution, residual inf-norm history, last Jacobian)

    Raises:
        RankDeficiencyError: If the Jacobian loses full row rank
        ConvergenceError: If tol is not reached within max_iter iterations
    """
    z = np.array(z0, dtype=float)
    history: List[float] = []
    J = np.zeros((0, z.size))
    for it in range(max_iter + 1):
        r = residual(z)
        history.append(float(np.max(np.abs(r), initial=0.0)))
        J = jacobian(z)
        if history[-1] <= tol:
            logger.debug("%s converged in %d iterations (%.2e)", label, it, history[-1])
            return z, history, J
        if it == max_iter:
            break
        step, _, rank, _ = lstsq(J, -r, lapack_driver="gelsy")
        if rank < J.shape[0]:
            raise RankDeficiencyError(
                f"{label} Jacobian has rank {rank} < {J.shape[0]} rows at iteration {it}"
            )
        z = z + step
    raise ConvergenceError(
        f"{label} did not reach {tol:.1e} in {max_iter} iterations (last {history[-1]:.3e})",
        residuals=history,
    )


def gauss_newton_eval(
    dae: NonlinearDae,
    window: QWindow,
    t: float,
    x1: np.ndarray,
    guess: np.ndarray,
    config: Optional[SolverConfig] = None,
) -> GaussNewtonResult:
    """
    Solve F_{mu+1}(t, x, y) = 0 together with [I_d 0] Q(t)^{-1} x = x1.

    Args:
        dae: Nonlinear DAE with its derivative array
        window: Fixed Q on the current window
        t: Time
        x1: Inherent variables
        guess: Starting point (x, y) with y = (x', ..., x^(mu+2))
        config: Tolerance and iteration budget

    Returns:
        GaussNewtonResult at the minimum-norm fixed point
    """
    config = config or SolverConfig()
    n, d = dae.n, dae.d
    level = dae.mu + 1
    Pd = np.linalg.solve(window.Q(t).value, np.eye(n))[:d]
    guess = np.asarray(guess, dtype=float)

    def residual(z):
        x, y = z[:n], z[n:]
        return np.concatenate([dae.F_array(level, t, x, y), Pd @ x - x1])

    def jacobian(z):
        x, y = z[:n], z[n:]
        M = dae.M_of(level, t, x, y)
        Fx = -dae.N_of(level, t, x, y)[:, :n]
        return np.block([[Fx, M], [Pd, np.zeros((d, M.shape[1]))]])

    tol = config.gn_tol * (1.0 + np.max(np.abs(guess), initial=0.0))
    z, history, J = minimum_norm_gauss_newton(
        residual, jacobian, guess, tol, config.gn_max_iter, f"Gauss-Newton at t={t:.6g}"
    )
    return GaussNewtonResult(x=z[:n], y=z[n:], residuals=history, jacobian=J)


def extract_inherent(window: QWindow, t: float, x: np.ndarray, xdot: np.ndarray, d: int):
    """L = [I 0] Q^{-1}(x' - Q' Q^{-1} x) and R = [0 I] Q^{-1} x."""
    Q = window.Q(t)
    Qinv_x = np.linalg.solve(Q.value, x)
    L = np.linalg.solve(Q.value, xdot - Q.derivative_value(1) @ Qinv_x)[:d]
    return L, Qinv_x[d:]


def consistent_derivatives(
    dae: NonlinearDae,
    t: float,
    x: np.ndarray,
    config: Optional[SolverConfig] = None,
    y0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Derivative unknowns y with F_{mu+1}(t, x, y) = 0 for a consistent x.

    Raises:
        ConvergenceError: If x is not consistent (no y solves the array)
    """
    config = config or SolverConfig()
    n = dae.n
    level = dae.mu + 1
    x = np.asarray(x, dtype=float)
    y = np.zeros((level + 1) * n) if y0 is None else np.asarray(y0, dtype=float)
    residual = lambda v: dae.F_array(level, t, x, v)  # noqa: E731
    jacobian = lambda v: dae.M_of(level, t, x, v)  # noqa: E731
    # M alone is rank deficient; take least-squares steps and watch the residual
    history: List[float] = []
    for it in range(config.gn_max_iter + 1):
        r = residual(y)
        history.append(float(np.max(np.abs(r))))
        if history[-1] <= config.gn_tol * (1.0 + np.max(np.abs(x))):
            return y
        if it == config.gn_max_iter:
            break
        step = lstsq(jacobian(y), -r, lapack_driver="gelsy")[0]
        y = y + step
    raise ConvergenceError(
        f"No consistent derivatives for x at t={t} (residual {history[-1]:.3e})", residuals=history
    )


def nonlinear_projectors(
    dae: NonlinearDae, t: float, x: np.ndarray, y: np.ndarray, rank_tol: float = 1e-8
) -> Tuple[np.ndarray, np.ndarray]:
    """
    (Z1, T2) from the Jacobians of F_mu at a consistent point, in plain arithmetic.

    Raises:
        RankDeficiencyError: If the ranks differ from the declared (a, d)
    """
    n, mu, a, d = dae.n, dae.mu, dae.a, dae.d
    yy = y[: (mu + 1) * n]
    M = dae.M_of(mu, t, x, yy)
    Fx = -dae.N_of(mu, t, x, yy)[:, :n]
    Z2 = null_space(M.T, rcond=rank_tol)
    if Z2.shape[1] != a:
        raise RankDeficiencyError(f"Corank of M_{mu} is {Z2.shape[1]} at t={t}, expected {a}")
    T2 = null_space(Z2.T @ Fx, rcond=rank_tol)
    if T2.shape[1] != d:
        raise RankDeficiencyError(f"Kernel of A2 has dimension {T2.shape[1]} at t={t}, expected {d}")
    Fxd = dae.M_of(0, t, x, y[:n])
    Z1 = qr(Fxd @ T2, mode="economic")[0]
    return Z1, T2


def nonlinear_rotated_q(dae: NonlinearDae, t: float, x: np.ndarray, y: np.ndarray, rank_tol: float = 1e-8) -> np.ndarray:
    """Q0 with E1 Q2 = 0, E1 = Z1^T F_x'."""
    Z1, _ = nonlinear_projectors(dae, t, x, y, rank_tol)
    Fxd = dae.M_of(0, t, x, y[: dae.n])
    return qr((Z1.T @ Fxd).T)[0]


def choose_q_nonlinear(
    strategy: QStrategy,
    dae: NonlinearDae,
    t0: float,
    x: np.ndarray,
    y: np.ndarray,
    config: Optional[SolverConfig] = None,
) -> QWindow:
    """
    INHERENT (frozen Q0) or PRESCRIBED Q for a nonlinear DAE.

    Raises:
        ConfigurationError: For strategies that rely on linear structure
    """
    config = config or SolverConfig()
    if strategy.kind == Version.INHERENT:
        frozen = TaylorArray.constant(nonlinear_rotated_q(dae, t0, x, y, config.rank_tol), 1)

        def evaluate(t: float) -> TaylorArray:
            return frozen
    elif strategy.kind == Version.PRESCRIBED:
        evaluate = _prescribed_q(strategy, dae.n)
    else:
        raise ConfigurationError(
            f"{strategy.kind.value} needs a linear DAE; nonlinear problems accept INHERENT or PRESCRIBED"
        )
    return QWindow(t0=t0, d=dae.d, a=dae.a, kind=strategy.kind, evaluate=evaluate)


class NonlinearInherentWindow:
    """
    Inherent ODE of a nonlinear DAE on one window.

    Every evaluation runs Gauss-Newton warm-started from the previous
    solution, so evaluations within a step stay in the convergence basin.
    """

    def __init__(self, dae: NonlinearDae, qwindow: QWindow, z0: np.ndarray, config: Optional[SolverConfig] = None):
        self.dae = dae
        self.qwindow = qwindow
        self.config = config or SolverConfig()
        self.d = dae.d
        self.z = np.asarray(z0, dtype=float)
        self.last: Optional[GaussNewtonResult] = None

    @property
    def t0(self) -> float:
        return self.qwindow.t0

    @property
    def structure(self) -> Structure:
        return Structure.NONE

    def solve(self, t: float, x1: np.ndarray) -> GaussNewtonResult:
        result = gauss_newton_eval(self.dae, self.qwindow, t, x1, self.z, self.config)
        self.z = result.z
        self.last = result
        return result

    def L(self, t: float, x1: np.ndarray) -> np.ndarray:
        result = self.solve(t, x1)
        return extract_inherent(self.qwindow, t, result.x, result.xdot, self.d)[0]

    def R(self, t: float, x1: np.ndarray) -> np.ndarray:
        result = self.solve(t, x1)
        return extract_inherent(self.qwindow, t, result.x, result.xdot, self.d)[1]

    def project(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.qwindow.Q(t).value, x)[: self.d]

    def lift(self, t: float, x1: np.ndarray) -> np.ndarray:
        return self.solve(t, x1).x

    def rhs(self) -> InherentRhs:
        return InherentRhs(L=self.L, R=self.R)

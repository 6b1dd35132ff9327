"""
Time stepping for inherent ODEs and for reduced DAEs.

ODE versions integrate x1' = L(t, x1) on a window fixed at the step start and
lift the result back with x = Q [x1; R(t, x1)]. DIRECT collocates the reduced
DAE itself. Explicit pairs estimate their error from the embedded solution,
implicit schemes by step doubling.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .darray import LinearDae, NonlinearDae
from .errors import (
    ConfigurationError,
    ConvergenceError,
    InherentDaeError,
    ShapeError,
    SingularPointError,
    StepSizeError,
)
from .inherent import (
    InherentRhs,
    NonlinearInherentWindow,
    choose_q_nonlinear,
    consistent_derivatives,
    make_linear_window,
    minimum_norm_gauss_newton,
    nonlinear_projectors,
)
from .models import CharValues, IntegratorSpec, Method, SolverConfig, Trajectory, Version
from .reduce import ReducedWindow, characteristic_values
from .tableaux import (
    ButcherTableau,
    dormand_prince,
    gauss,
    gauss_nodes,
    lagrange_matrices,
    lobatto_nodes,
    radau_iia,
    radau_nodes,
)

logger = logging.getLogger(__name__)

MIN_STEP_FRACTION = 1e-14  # of the integration span
INITIAL_STEP_FRACTION = 0.01

# nodes on [0, 1]: (polynomial basis, differential points, algebraic points)
Nodes = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass
class ErrorEstimate:
    """Local error estimate of one step (second estimator for the 8(5,3) pair)"""
    primary: np.ndarray
    secondary: Optional[np.ndarray] = None

    def norm(self, scale: np.ndarray) -> float:
        e = self.primary / scale
        if self.secondary is None:
            return float(np.sqrt(np.mean(e**2)))
        e_sq = float(np.sum(e**2))
        low_sq = float(np.sum((self.secondary / scale) ** 2))
        if e_sq == 0.0 and low_sq == 0.0:
            return 0.0
        return e_sq / float(np.sqrt((e_sq + 0.01 * low_sq) * e.size))


def error_scale(x_old: np.ndarray, x_new: np.ndarray, tol: float) -> np.ndarray:
    """atol + rtol * max(|x_old|, |x_new|) with atol = rtol = tol."""
    return tol + tol * np.maximum(np.abs(x_old), np.abs(x_new))


def _factor(matrix: np.ndarray, t: float, label: str):
    lu, piv = lu_factor(matrix, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.size and diag.min() <= 1e-14 * max(diag.max(), 1.0):
        raise SingularPointError(f"{label} is singular at t={t} (pivot {diag.min():.3e})")
    return lu, piv


# ODE steps -------------------------------------------------------------------


def step_explicit(
    rhs: InherentRhs, t: float, x1: np.ndarray, h: float, tableau: ButcherTableau
) -> Tuple[np.ndarray, ErrorEstimate]:
    """
    One step of an explicit (embedded) Runge-Kutta pair.

    Returns:
        Tuple of (x1 at t + h, error estimate of the step)
    """
    x1 = np.asarray(x1, dtype=float)
    stages = []
    for i in range(tableau.stages):
        incr = np.zeros_like(x1)
        for j in range(i):
            if tableau.A[i, j] != 0.0:
                incr = incr + tableau.A[i, j] * stages[j]
        stages.append(np.asarray(rhs.L(t + tableau.c[i] * h, x1 + h * incr), dtype=float))
    K = np.stack(stages)
    x_next = x1 + h * np.tensordot(tableau.weights, K, axes=1)
    if tableau.error is None:
        return x_next, ErrorEstimate(np.zeros_like(x1))
    secondary = None if tableau.error_low is None else h * np.tensordot(tableau.error_low, K, axes=1)
    return x_next, ErrorEstimate(h * np.tensordot(tableau.error, K, axes=1), secondary)


def _collocation_linear(rhs: InherentRhs, t: float, x1: np.ndarray, h: float, tableau: ButcherTableau) -> np.ndarray:
    d = x1.shape[0]
    s = tableau.stages
    cols = x1.reshape(d, -1)
    system = np.eye(s * d)
    right = np.zeros((s * d, cols.shape[1]))
    for i in range(s):
        B, c = rhs.affine(t + tableau.c[i] * h)
        rows = slice(i * d, (i + 1) * d)
        for j in range(s):
            system[rows, j * d:(j + 1) * d] -= h * tableau.A[i, j] * B
        right[rows] = B @ cols + c[:, None]
    K = lu_solve(_factor(system, t, f"{tableau.name} stage matrix"), right, check_finite=False)
    K = K.reshape(s, d, -1)
    return (cols + h * np.tensordot(tableau.b, K, axes=1)).reshape(x1.shape)


def fd_jacobian(rhs: InherentRhs, t: float, x1: np.ndarray, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """Forward-difference Jacobian of L at (t, x1); returns (J, L(t, x1))."""
    f0 = np.asarray(rhs.L(t, x1), dtype=float)
    J = np.empty((f0.size, x1.size))
    for k in range(x1.size):
        dx = step * (1.0 + abs(x1[k]))
        shifted = x1.copy()
        shifted[k] += dx
        J[:, k] = (np.asarray(rhs.L(t, shifted)) - f0) / dx
    return J, f0


def _collocation_newton(
    rhs: InherentRhs, t: float, x1: np.ndarray, h: float, tableau: ButcherTableau, config: SolverConfig
) -> np.ndarray:
    if x1.ndim != 1:
        raise ShapeError("Nonlinear collocation advances one state vector at a time")
    d, s = x1.size, tableau.stages
    J, f0 = fd_jacobian(rhs, t, x1, config.fd_step)
    lu = _factor(np.eye(s * d) - h * np.kron(tableau.A, J), t, f"{tableau.name} Newton matrix")
    K = np.tile(f0, (s, 1))
    # L is itself evaluated by Gauss-Newton, so the stage tolerance cannot undercut it
    tol = max(config.newton_tol, 10.0 * config.gn_tol)
    history = []
    for _ in range(config.newton_max_iter):
        Y = x1 + h * (tableau.A @ K)
        G = K - np.stack([np.asarray(rhs.L(t + tableau.c[i] * h, Y[i])) for i in range(s)])
        delta = lu_solve(lu, -G.ravel(), check_finite=False).reshape(s, d)
        K = K + delta
        history.append(float(np.max(np.abs(delta))))
        if history[-1] <= tol * (1.0 + np.max(np.abs(K))):
            return x1 + h * (tableau.b @ K)
    raise ConvergenceError(
        f"{tableau.name} stage Newton did not converge at t={t} (last update {history[-1]:.3e})",
        residuals=history,
    )


def step_collocation(
    rhs: InherentRhs,
    t: float,
    x1: np.ndarray,
    h: float,
    tableau: ButcherTableau,
    config: Optional[SolverConfig] = None,
) -> np.ndarray:
    """
    One step of an implicit collocation method on x1' = L(t, x1).

    Affine right-hand sides are solved directly (several states at once);
    nonlinear ones by Newton with a finite-difference Jacobian of L taken
    at the step start.
    """
    config = config or SolverConfig()
    x1 = np.asarray(x1, dtype=float)
    if rhs.linear:
        return _collocation_linear(rhs, t, x1, h, tableau)
    return _collocation_newton(rhs, t, x1, h, tableau, config)


def step_gauss(
    rhs: InherentRhs, t: float, x1: np.ndarray, h: float, s: int, config: Optional[SolverConfig] = None
) -> np.ndarray:
    """s-stage Gauss collocation step (order 2s)."""
    return step_collocation(rhs, t, x1, h, gauss(s), config)


# DIRECT collocation of the reduced DAE ------------------------------------------


def radau_points(s: int) -> Nodes:
    c = radau_nodes(s)
    return np.concatenate([[0.0], c]), c, c


def gauss_lobatto_points(s: int) -> Nodes:
    """Differential part at s Gauss nodes, constraints at the Lobatto nodes after 0."""
    lob = lobatto_nodes(s + 1)
    return lob, gauss_nodes(s), lob[1:]


def collocate_reduced(
    window: ReducedWindow, t: float, x: np.ndarray, h: float, nodes: Nodes
) -> np.ndarray:
    """
    Collocation step of E1 x' = A1 x + f1, 0 = A2 x + f2 over [t, t + h].

    The solution is the polynomial interpolating x at the basis nodes (the
    first one is the step start); the differential rows are imposed at the
    differential points and the constraints at the algebraic points.
    """
    basis, diff_points, alg_points = nodes
    n = window.dae.n
    d, a = window.chars.d, window.chars.a
    s = basis.size - 1
    x = np.asarray(x, dtype=float)
    cols = x.reshape(n, -1)
    Vd, Dd = lagrange_matrices(basis, diff_points)
    Va, _ = lagrange_matrices(basis, alg_points)
    system = np.zeros((s * n, s * n))
    right = np.zeros((s * n, cols.shape[1]))
    row = 0
    for p, tau in enumerate(diff_points):
        blocks = window.blocks(t + tau * h)
        E1, A1 = blocks.E1.value, blocks.A1.value
        rows = slice(row, row + d)
        for j in range(s + 1):
            coef = (Dd[p, j] / h) * E1 - Vd[p, j] * A1
            if j == 0:
                right[rows] -= coef @ cols
            else:
                system[rows, (j - 1) * n:j * n] = coef
        right[rows] += blocks.f1.value[:, None]
        row += d
    if a:
        for p, sigma in enumerate(alg_points):
            blocks = window.blocks(t + sigma * h)
            A2 = blocks.A2.value
            rows = slice(row, row + a)
            for j in range(s + 1):
                if j == 0:
                    right[rows] -= Va[p, 0] * (A2 @ cols)
                else:
                    system[rows, (j - 1) * n:j * n] = Va[p, j] * A2
            right[rows] -= blocks.f2.value[:, None]
            row += a
    X = lu_solve(_factor(system, t, "Collocation matrix of the reduced DAE"), right, check_finite=False)
    return X[(s - 1) * n:].reshape(x.shape)


def step_radau(
    problem: Union[InherentRhs, ReducedWindow],
    t: float,
    state: np.ndarray,
    h: float,
    s: int,
    config: Optional[SolverConfig] = None,
) -> np.ndarray:
    """
    Radau IIA step of order 2s - 1 (s = 1 is implicit Euler).

    An InherentRhs is integrated as an ODE; a ReducedWindow is collocated
    directly at the Radau nodes.
    """
    if isinstance(problem, InherentRhs):
        return step_collocation(problem, t, state, h, radau_iia(s), config)
    if isinstance(problem, ReducedWindow):
        return collocate_reduced(problem, t, state, h, radau_points(s))
    raise ConfigurationError(f"Radau steps need an InherentRhs or a ReducedWindow, got {type(problem).__name__}")


def step_implicit_euler(problem, t: float, state: np.ndarray, h: float, config: Optional[SolverConfig] = None):
    return step_radau(problem, t, state, h, 1, config)


def step_gauss_lobatto_dae(reduced: ReducedWindow, t: float, state: np.ndarray, h: float, s: int) -> np.ndarray:
    """Gauss-Lobatto s-(s+1) collocation step of the reduced DAE."""
    return collocate_reduced(reduced, t, state, h, gauss_lobatto_points(s))


def collocate_nonlinear(
    dae: NonlinearDae,
    t: float,
    x: np.ndarray,
    y: np.ndarray,
    h: float,
    nodes: Nodes,
    config: Optional[SolverConfig] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    DIRECT collocation step of a nonlinear DAE.

    Z1^T F(tau, u, u') = 0 at the differential points and
    F_mu(sigma, u, Y_sigma) = 0 at the algebraic points, with Z1 frozen at the
    step start and one auxiliary derivative block Y per algebraic point. The
    underdetermined system is solved by minimum-norm Gauss-Newton.

    Returns:
        Tuple of (x at t + h, derivative unknowns of F_mu at t + h)
    """
    config = config or SolverConfig()
    basis, diff_points, alg_points = nodes
    n, mu = dae.n, dae.mu
    ny = (mu + 1) * n
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Z1, _ = nonlinear_projectors(dae, t, x, y, config.rank_tol)
    d = Z1.shape[1]
    s = basis.size - 1
    k = alg_points.size
    Vd, Dd = lagrange_matrices(basis, diff_points)
    Va, _ = lagrange_matrices(basis, alg_points)

    def unpack(z):
        X = np.vstack([x, z[: s * n].reshape(s, n)])
        return X, z[s * n:].reshape(k, ny)

    def residual(z):
        X, Y = unpack(z)
        parts = []
        for p, tau in enumerate(diff_points):
            parts.append(Z1.T @ dae.F(t + tau * h, Vd[p] @ X, (Dd[p] @ X) / h))
        for p, sigma in enumerate(alg_points):
            parts.append(dae.F_array(mu, t + sigma * h, Va[p] @ X, Y[p]))
        return np.concatenate(parts)

    def jacobian(z):
        X, Y = unpack(z)
        J = np.zeros((diff_points.size * d + k * ny, s * n + k * ny))
        row = 0
        for p, tau in enumerate(diff_points):
            Fxd, Fx = dae.jacobians(t + tau * h, Vd[p] @ X, (Dd[p] @ X) / h)
            for j in range(1, s + 1):
                J[row:row + d, (j - 1) * n:j * n] = Z1.T @ (Vd[p, j] * Fx + (Dd[p, j] / h) * Fxd)
            row += d
        for p, sigma in enumerate(alg_points):
            u = Va[p] @ X
            M = dae.M_of(mu, t + sigma * h, u, Y[p])
            Fx = -dae.N_of(mu, t + sigma * h, u, Y[p])[:, :n]
            for j in range(1, s + 1):
                J[row:row + ny, (j - 1) * n:j * n] = Va[p, j] * Fx
            J[row:row + ny, s * n + p * ny:s * n + (p + 1) * ny] = M
            row += ny
        return J

    z0 = np.concatenate([np.tile(x, s), np.tile(y[:ny], k)])
    tol = config.gn_tol * (1.0 + np.max(np.abs(z0)))
    z, _, _ = minimum_norm_gauss_newton(
        residual, jacobian, z0, tol, config.gn_max_iter, f"Collocation Gauss-Newton at t={t:.6g}"
    )
    X, Y = unpack(z)
    return X[-1], Y[-1]


# steppers ----------------------------------------------------------------------

# (x, auxiliary data carried between steps)
State = Tuple[np.ndarray, Optional[np.ndarray]]


def _ode_tableau(spec: IntegratorSpec) -> ButcherTableau:
    if spec.method == Method.DORMAND_PRINCE:
        return dormand_prince(spec.stages)
    if spec.method == Method.RADAU:
        return radau_iia(spec.stages)
    if spec.method == Method.IMPLICIT_EULER:
        return radau_iia(1)
    # Gauss-Lobatto on an ODE has no constraints left and reduces to Gauss
    return gauss(spec.stages)


def _direct_nodes(spec: IntegratorSpec) -> Nodes:
    if spec.method == Method.GAUSS_LOBATTO:
        return gauss_lobatto_points(spec.stages)
    if spec.method == Method.IMPLICIT_EULER:
        return radau_points(1)
    return radau_points(spec.stages)


class _Stepper:
    """One-step map with an error estimate by step doubling."""

    def __init__(self, spec: IntegratorSpec, config: SolverConfig):
        self.spec = spec
        self.config = config
        self.order = spec.order

    def initial(self, t0: float, x0: np.ndarray) -> State:
        return x0, None

    def advance(self, t: float, state: State, h: float) -> State:
        raise NotImplementedError

    def step(self, t: float, state: State, h: float, tol: float) -> Tuple[State, float]:
        full = self.advance(t, state, h)
        half = self.advance(t, state, 0.5 * h)
        half = self.advance(t + 0.5 * h, half, 0.5 * h)
        err = (half[0] - full[0]) / (2.0**self.order - 1.0)
        return half, float(np.sqrt(np.mean((err / error_scale(state[0], half[0], tol)) ** 2)))


class _InherentStepper(_Stepper):
    """Steps of x1' = L(t, x1) on a window frozen at each step start."""

    def __init__(self, spec: IntegratorSpec, config: SolverConfig):
        super().__init__(spec, config)
        self.tableau = _ode_tableau(spec)
        self.strategy = spec.strategy()

    def window(self, t: float, state: State):
        raise NotImplementedError

    def carry(self, window) -> Optional[np.ndarray]:
        return None

    def ode_step(self, t: float, state: State, h: float):
        window = self.window(t, state)
        x1 = window.project(t, state[0])
        rhs = window.rhs()
        if self.tableau.explicit:
            x1_next, estimate = step_explicit(rhs, t, x1, h, self.tableau)
        else:
            x1_next, estimate = step_collocation(rhs, t, x1, h, self.tableau, self.config), None
        x_next = window.lift(t + h, x1_next)
        return (x_next, self.carry(window)), x1, x1_next, estimate

    def advance(self, t: float, state: State, h: float) -> State:
        return self.ode_step(t, state, h)[0]

    def step(self, t: float, state: State, h: float, tol: float) -> Tuple[State, float]:
        if self.tableau.explicit:
            new, x1, x1_next, estimate = self.ode_step(t, state, h)
            return new, estimate.norm(error_scale(x1, x1_next, tol))
        # step doubling inside the x1 coordinates of the step-start window
        window = self.window(t, state)
        x1 = window.project(t, state[0])
        rhs = window.rhs()
        full = step_collocation(rhs, t, x1, h, self.tableau, self.config)
        mid = step_collocation(rhs, t, x1, 0.5 * h, self.tableau, self.config)
        half = step_collocation(rhs, t + 0.5 * h, mid, 0.5 * h, self.tableau, self.config)
        err = (half - full) / (2.0**self.order - 1.0)
        norm = float(np.sqrt(np.mean((err / error_scale(x1, half, tol)) ** 2)))
        return (window.lift(t + h, half), self.carry(window)), norm


class _WindowCache:
    """Windows keyed by their start time; rejected steps reuse the last one."""

    def __init__(self, build, size: int = 4):
        self.build = build
        self.size = size
        self.entries: Dict[float, object] = {}

    def __call__(self, t: float):
        window = self.entries.get(t)
        if window is None:
            window = self.build(t)
            self.entries[t] = window
            if len(self.entries) > self.size:
                del self.entries[next(iter(self.entries))]
        return window


class _LinearInherentStepper(_InherentStepper):
    def __init__(self, spec: IntegratorSpec, dae: LinearDae, chars: CharValues, config: SolverConfig):
        super().__init__(spec, config)
        self.windows = _WindowCache(lambda t: make_linear_window(dae, chars, self.strategy, t, 0.0, config))

    def window(self, t: float, state: State):
        return self.windows(t)


class _NonlinearInherentStepper(_InherentStepper):
    def __init__(self, spec: IntegratorSpec, dae: NonlinearDae, config: SolverConfig):
        super().__init__(spec, config)
        self.dae = dae

    def initial(self, t0: float, x0: np.ndarray) -> State:
        y0 = consistent_derivatives(self.dae, t0, x0, self.config)
        return x0, np.concatenate([x0, y0])

    def window(self, t: float, state: State):
        x, z = state
        qwindow = choose_q_nonlinear(self.strategy, self.dae, t, x, z[self.dae.n:], self.config)
        return NonlinearInherentWindow(self.dae, qwindow, z, self.config)

    def carry(self, window) -> Optional[np.ndarray]:
        return window.z


class _LinearDirectStepper(_Stepper):
    def __init__(self, spec: IntegratorSpec, dae: LinearDae, chars: CharValues, config: SolverConfig):
        super().__init__(spec, config)
        self.nodes = _direct_nodes(spec)
        # collocation only needs the blocks themselves
        self.windows = _WindowCache(lambda t: ReducedWindow(dae, chars, t, config, order=0))

    def advance(self, t: float, state: State, h: float) -> State:
        return collocate_reduced(self.windows(t), t, state[0], h, self.nodes), None


class _NonlinearDirectStepper(_Stepper):
    def __init__(self, spec: IntegratorSpec, dae: NonlinearDae, config: SolverConfig):
        super().__init__(spec, config)
        self.dae = dae
        self.nodes = _direct_nodes(spec)

    def initial(self, t0: float, x0: np.ndarray) -> State:
        return x0, consistent_derivatives(self.dae, t0, x0, self.config)

    def advance(self, t: float, state: State, h: float) -> State:
        x, y = state
        return collocate_nonlinear(self.dae, t, x, y, h, self.nodes, self.config)


def make_stepper(
    spec: IntegratorSpec,
    problem: Union[LinearDae, NonlinearDae],
    chars: Optional[CharValues],
    config: SolverConfig,
) -> _Stepper:
    if isinstance(problem, NonlinearDae):
        if spec.version == Version.DIRECT:
            return _NonlinearDirectStepper(spec, problem, config)
        return _NonlinearInherentStepper(spec, problem, config)
    if chars is None:
        raise ConfigurationError(f"Linear problem '{problem.name}' needs its characteristic values")
    if spec.version == Version.DIRECT:
        return _LinearDirectStepper(spec, problem, chars, config)
    return _LinearInherentStepper(spec, problem, chars, config)


# driver ---------------------------------------------------------------------------


def _finite(state: State) -> bool:
    return bool(np.all(np.isfinite(state[0])))


def integrate(
    spec: IntegratorSpec,
    problem: Union[LinearDae, NonlinearDae],
    t_span: Tuple[float, float],
    x0: np.ndarray,
    chars: Optional[CharValues] = None,
    config: Optional[SolverConfig] = None,
) -> Trajectory:
    """
    Integrate a DAE from a consistent initial value.

    Args:
        spec: Method, stages, version and step mode
        problem: Linear or nonlinear DAE
        t_span: (t0, t_end) with t_end > t0
        x0: Consistent initial value (n, or n x m for linear problems)
        chars: Characteristic values of a linear problem (determined on a
            sample grid when omitted)
        config: Tolerances and budgets

    Returns:
        Trajectory with the accepted grid and full states

    Raises:
        ConfigurationError: For invalid method/version combinations
        StepSizeError: If the step size underflows or the step budget runs out
        InherentDaeError: Any failure of a fixed-grid step
    """
    spec.validate()
    config = config or SolverConfig()
    t0, t_end = float(t_span[0]), float(t_span[1])
    span = t_end - t0
    if span <= 0.0:
        raise ConfigurationError(f"Integration interval [{t0}, {t_end}] is empty")
    if isinstance(problem, LinearDae) and chars is None:
        samples = np.linspace(t0, t_end, config.sample_count)
        chars = characteristic_values(problem, samples, config.rank_tol, config.mu_max)
    stepper = make_stepper(spec, problem, chars, config)
    state = stepper.initial(t0, np.array(x0, dtype=float))
    times = [t0]
    states = [state[0].copy()]
    logger.debug(
        "Integrating '%s' with %s %s (%s) on [%g, %g]",
        problem.name, spec.method.value, spec.stage_label, spec.version.value, t0, t_end,
    )

    if not spec.adaptive:
        h = span / spec.n_steps
        for k in range(spec.n_steps):
            state = stepper.advance(t0 + k * h, state, h)
            if not _finite(state):
                raise StepSizeError(
                    f"Non-finite state after step {k + 1} at t={t0 + (k + 1) * h:.6g}", steps_taken=k, rejected=0
                )
            times.append(t_end if k == spec.n_steps - 1 else t0 + (k + 1) * h)
            states.append(state[0].copy())
        return Trajectory(times=np.array(times), states=np.array(states), steps_taken=spec.n_steps)

    tol = spec.tol
    exponent = 1.0 / (stepper.order + 1)
    h = min(span, INITIAL_STEP_FRACTION * span * tol**exponent)
    h_min = MIN_STEP_FRACTION * span
    t = t0
    accepted = rejected = 0
    warned = False
    while t_end - t > h_min:
        if accepted >= config.max_steps:
            raise StepSizeError(
                f"Step budget of {config.max_steps} exhausted at t={t:.6g}", steps_taken=accepted, rejected=rejected
            )
        h = min(h, t_end - t)
        try:
            new, err = stepper.step(t, state, h, tol)
            if not _finite(new) or not np.isfinite(err):
                err = np.inf
        except InherentDaeError as exc:
            logger.debug("Step at t=%.6g with h=%.3e failed: %s", t, h, exc)
            err = np.inf
        if err <= 1.0:
            t = t_end if t_end - (t + h) <= h_min else t + h
            state = new
            accepted += 1
            times.append(t)
            states.append(state[0].copy())
            factor = config.max_factor if err == 0.0 else min(config.max_factor, config.safety * err**-exponent)
            h *= max(config.min_factor, factor)
        else:
            rejected += 1
            if err > 10.0 and np.isfinite(err) and not warned:
                logger.warning("Local error %.1f x tol at t=%.6g (h=%.3e)", err, t, h)
                warned = True
            logger.debug("Rejected step at t=%.6g with h=%.3e (err %.3g)", t, h, err)
            factor = config.min_factor if not np.isfinite(err) else config.safety * err**-exponent
            h *= min(1.0, max(config.min_factor, factor))
            if h < h_min:
                raise StepSizeError(
                    f"Step size {h:.3e} below {h_min:.3e} at t={t:.6g}", steps_taken=accepted, rejected=rejected
                )
    logger.info("Finished '%s' in %d steps (%d rejected)", problem.name, accepted, rejected)
    return Trajectory(times=np.array(times), states=np.array(states), steps_taken=accepted, rejected=rejected)

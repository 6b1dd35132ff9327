"""
Property suite for the numerical core.
Each check returns a PropertyResult; run_property_suite collects them into a
VerifyReport whose summary() is what `verify` prints.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .darray import LinearDae, NonlinearDae, verify_nonlinear_array
from .errors import InherentDaeError
from .inherent import (
    InherentRhs,
    choose_q_nonlinear,
    consistent_derivatives,
    gauss_newton_eval,
    make_linear_window,
)
from .integrate import step_collocation, step_explicit, step_gauss
from .models import CharValues, QStrategy, SolverConfig, Version
from .reduce import ReducedWindow, characteristic_values
from .smoothfact import congruence_to_j, congruence_to_s, signature_matrix, symplectic_unit
from .tableaux import dormand_prince, gauss, radau_iia
from .taylor import TaylorArray, exp, max_abs, sin, solve, sqrt, taylor_lift

logger = logging.getLogger(__name__)


@dataclass
class PropertyResult:
    """Outcome of one property check"""
    name: str
    passed: bool
    value: float  # worst observed quantity
    threshold: float
    detail: str = ""

    def summary(self) -> str:
        mark = "✓" if self.passed else "❌"
        line = f"{mark} {self.name}: {self.value:.3e} (limit {self.threshold:.1e})"
        return f"{line} - {self.detail}" if self.detail else line


@dataclass
class VerifyReport:
    """All property results of one suite run"""
    results: List[PropertyResult] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(not r.passed for r in self.results)

    def summary(self) -> str:
        passed = sum(r.passed for r in self.results)
        lines = ["=== Property Suite ==="]
        lines.extend(r.summary() for r in self.results)
        lines.extend(["", f"{passed}/{len(self.results)} properties hold"])
        return "\n".join(lines)


@dataclass
class SuiteInputs:
    """Problems the suite runs on"""
    nonlinear: NonlinearDae
    nonlinear_x0: np.ndarray
    linear: LinearDae
    linear_chars: CharValues
    structured: Sequence[Tuple[LinearDae, CharValues, Version]] = ()


def _guarded(name: str, threshold: float, check: Callable[[], Tuple[float, str]]) -> PropertyResult:
    try:
        value, detail = check()
    except InherentDaeError as e:
        return PropertyResult(name, False, float("inf"), threshold, f"raised {type(e).__name__}: {e}")
    return PropertyResult(name, bool(value <= threshold), float(value), threshold, detail)


# Taylor arithmetic --------------------------------------------------------


def _random_taylor_case(rng: np.random.Generator) -> Callable[[TaylorArray], TaylorArray]:
    c = rng.uniform(-1.0, 1.0, size=(2, 3))
    c[:, 0] = rng.uniform(1.5, 2.5, size=2)  # keep divisors and radicands positive

    def poly(tau, k):
        return c[k, 0] + c[k, 1] * tau + c[k, 2] * (tau * tau)

    A0 = 3.0 * np.eye(3) + rng.uniform(-0.5, 0.5, size=(3, 3))
    A1 = rng.uniform(-0.5, 0.5, size=(3, 3))
    v0, v1 = rng.uniform(-1.0, 1.0, size=(2, 3))
    kind = rng.integers(6)

    def case(tau: TaylorArray) -> TaylorArray:
        a, b = poly(tau, 0), poly(tau, 1)
        if kind == 0:
            return a * b
        if kind == 1:
            return a / b
        if kind == 2:
            return sqrt(a)
        if kind == 3:
            return exp(b - 2.0)
        if kind == 4:
            return sin(a) * b
        return solve(tau * A1 + A0, tau * v1 + v0)

    return case


def check_taylor_arithmetic(rng: np.random.Generator, cases: int = 1000, order: int = 2) -> PropertyResult:
    """Taylor kernels against central-difference coefficients of their plain evaluation."""

    def run():
        worst = 0.0
        for _ in range(cases):
            case = _random_taylor_case(rng)
            t0 = rng.uniform(-0.5, 0.5)
            exact = case(TaylorArray.variable(t0, order))
            oracle = taylor_lift(lambda t: case(TaylorArray.variable(t, 0)).value, t0, order, h=1e-3)
            worst = max(worst, max_abs(exact - oracle) / (1.0 + max_abs(exact)))
        return worst, f"{cases} random cases, order {order}"

    return _guarded("Taylor arithmetic vs finite differences", 1e-6, run)


# congruences --------------------------------------------------------------


def _random_skew(rng, m):
    K = rng.uniform(-1.0, 1.0, size=(m, m))
    return K - K.T


def check_congruences(rng: np.random.Generator, cases: int = 100) -> PropertyResult:
    """W^T Ebar W equals J or S at both coefficient slices."""

    def run():
        worst = 0.0
        for k in range(cases):
            if k % 2 == 0:
                p = int(rng.integers(1, 4))
                E0 = 3.0 * symplectic_unit(p) + 0.2 * _random_skew(rng, 2 * p)
                Ebar = TaylorArray(np.stack([E0, _random_skew(rng, 2 * p)]))
                result = congruence_to_j(Ebar)
            else:
                p, q = int(rng.integers(0, 3)), int(rng.integers(0, 3))
                if p + q == 0:
                    p = 1
                V = np.linalg.qr(rng.normal(size=(p + q, p + q)))[0]
                lam = np.concatenate([rng.uniform(1.0, 2.0, p), -rng.uniform(1.0, 2.0, q)])
                E0 = V @ np.diag(lam) @ V.T
                E1 = rng.uniform(-0.2, 0.2, size=(p + q, p + q))
                Ebar = TaylorArray(np.stack([E0, E1 + E1.T]))
                result = congruence_to_s(Ebar, p, q)
            worst = max(worst, max_abs(result.W.T @ Ebar @ result.W - result.target))
        return worst, f"{cases} constructed inputs"

    return _guarded("Congruence identities", 1e-9, run)


# reduction covariance -------------------------------------------------------


def transformed_dae(dae: LinearDae, P: np.ndarray, Q: np.ndarray) -> LinearDae:
    """Globally equivalent DAE (P E Q, P A Q, P f) for constant P, Q."""

    def provider(tau):
        E, A, f = dae.provider(tau)
        return P @ E @ Q, P @ A @ Q, P @ f

    return LinearDae(n=dae.n, provider=provider, name=f"{dae.name} (transformed)")


def check_reduction_covariance(
    dae: LinearDae,
    chars: CharValues,
    rng: np.random.Generator,
    samples: Sequence[float] = (0.1, 0.4, 0.7),
    config: Optional[SolverConfig] = None,
) -> PropertyResult:
    """Constraints of the reduced DAE move with a random global equivalence."""
    config = config or SolverConfig()
    n = dae.n

    def run():
        P = np.eye(n) + 0.3 * rng.uniform(-1.0, 1.0, size=(n, n))
        Q = np.eye(n) + 0.3 * rng.uniform(-1.0, 1.0, size=(n, n))
        other = transformed_dae(dae, P, Q)
        if characteristic_values(other, samples, config.rank_tol) != chars:
            return float("inf"), "characteristic values changed"
        Q_inv = np.linalg.inv(Q)
        worst = 0.0
        for shortcut in (True, False):
            cfg = SolverConfig(mu0_shortcut=shortcut)
            for t in samples:
                base = ReducedWindow(dae, chars, t, cfg).blocks(t)
                moved = ReducedWindow(other, chars, t, cfg).blocks(t)
                A2, f2 = base.A2.value, base.f2.value
                A2t, f2t = moved.A2.value, moved.f2.value
                x_p = np.linalg.lstsq(A2, -f2, rcond=None)[0]
                scale = 1.0 + np.max(np.abs(A2t)) * (1.0 + np.max(np.abs(x_p)))
                kernel = np.max(np.abs(A2t @ Q_inv @ base.T2.value), initial=0.0)
                offset = np.max(np.abs(A2t @ Q_inv @ x_p + f2t), initial=0.0)
                worst = max(worst, kernel / scale, offset / scale)
        return worst, f"'{dae.name}' at {len(samples)} times, both reduction paths"

    return _guarded("Reduction covariance", 1e-8, run)


# Gauss-Newton -------------------------------------------------------------


def check_gauss_newton(
    dae: NonlinearDae,
    x0: np.ndarray,
    rng: np.random.Generator,
    perturbation: float = 1e-3,
    config: Optional[SolverConfig] = None,
) -> PropertyResult:
    """Superlinear residual decay from a perturbed start and full row rank at the solution."""
    config = config or SolverConfig()

    def run():
        y0 = consistent_derivatives(dae, 0.0, x0, config)
        window = choose_q_nonlinear(QStrategy(Version.INHERENT), dae, 0.0, x0, y0, config)
        x1 = np.linalg.solve(window.Q(0.0).value, x0)[: dae.d]
        z0 = np.concatenate([x0, y0])
        guess = z0 + perturbation * rng.uniform(-1.0, 1.0, size=z0.size)
        result = gauss_newton_eval(dae, window, 0.0, x1, guess, config)
        history = result.residuals
        ratios = [b / a for a, b in zip(history, history[1:]) if a > 1e-8]
        worst_ratio = max(ratios, default=0.0)
        rank = np.linalg.matrix_rank(result.jacobian)
        if rank < result.jacobian.shape[0]:
            return float("inf"), f"Jacobian rank {rank} < {result.jacobian.shape[0]}"
        return worst_ratio, f"{result.iterations} iterations, residuals {', '.join(f'{r:.1e}' for r in history)}"

    return _guarded(f"Gauss-Newton decay on '{dae.name}'", 0.1, run)


def check_nonlinear_array(dae: NonlinearDae, x0: np.ndarray, config: Optional[SolverConfig] = None) -> PropertyResult:
    config = config or SolverConfig()

    def run():
        y0 = consistent_derivatives(dae, 0.0, x0, config)
        report = verify_nonlinear_array(dae, 0.0, x0, y0)
        return report.max_deviation, f"level {report.level}"

    return _guarded(f"Derivative array Jacobians of '{dae.name}'", 1e-6, run)


# quadratic invariants -----------------------------------------------------


def _algebra_rhs(X: np.ndarray, rng: np.random.Generator) -> InherentRhs:
    """x' = B(t) x with B(t) = X^{-1} C(t), C symmetric (X skew) or skew (X symmetric)."""
    m = X.shape[0]
    C0, C1 = rng.uniform(-0.5, 0.5, size=(2, m, m))
    sign = 1.0 if np.allclose(X, -X.T) else -1.0
    C0, C1 = C0 + sign * C0.T, C1 + sign * C1.T
    X_inv = np.linalg.inv(X)

    def affine(t):
        return X_inv @ (C0 + np.sin(t) * C1), np.zeros(m)

    return InherentRhs(
        L=lambda t, x: affine(t)[0] @ x,
        R=lambda t, x: np.zeros((0,) + np.shape(x)[1:]),
        affine=affine,
    )


def check_gauss_invariants(rng: np.random.Generator, steps: int = 50, h: float = 0.02) -> PropertyResult:
    """Gauss collocation keeps Phi^T X Phi fixed step by step for X in {J, S}."""

    def run():
        worst = 0.0
        for X in (symplectic_unit(2), signature_matrix(2, 1)):
            rhs = _algebra_rhs(X, rng)
            Phi = np.eye(X.shape[0])
            before = X
            for k in range(steps):
                Phi = step_gauss(rhs, k * h, Phi, h, 2)
                after = Phi.T @ X @ Phi
                worst = max(worst, np.max(np.abs(after - before)) / (1.0 + np.max(np.abs(before))))
                before = after
        return float(worst), f"{steps} steps of size {h} for X = J and S"

    return _guarded("Gauss quadratic invariants (per step)", 1e-10, run)


# structure of assembled inherent ODEs ---------------------------------------------


def check_structure(
    problems: Sequence[Tuple[LinearDae, CharValues, Version]],
    t_span: Tuple[float, float] = (0.0, 6.0),
    samples: int = 20,
    config: Optional[SolverConfig] = None,
) -> PropertyResult:
    """J B symmetric for SELF_ADJOINT and S B skew for SKEW_ADJOINT windows."""
    config = config or SolverConfig()

    def run():
        worst = 0.0
        for dae, chars, version in problems:
            for t in np.linspace(t_span[0], t_span[1], samples):
                window = make_linear_window(dae, chars, QStrategy(version), float(t), config=config)
                worst = max(worst, window.structure_defect(float(t)), window.structure_defect(float(t) + 0.05))
        names = ", ".join(dae.name for dae, _, _ in problems)
        return worst, f"{samples} sample times on {names}"

    return _guarded("Structure of assembled inherent ODEs", 1e-9, run)


# convergence orders -------------------------------------------------------


def observed_order(stepper: Callable[[InherentRhs, float, np.ndarray, float], np.ndarray], rate: float, grids: Tuple[int, int]) -> float:
    """log2 error ratio on x' = rate x over [0, 1] for two grids (the second twice the first)."""
    rhs = InherentRhs(
        L=lambda t, x: rate * x,
        R=lambda t, x: np.zeros(0),
        affine=lambda t: (np.array([[rate]]), np.zeros(1)),
    )
    errors = []
    for steps in grids:
        h = 1.0 / steps
        x = np.ones(1)
        for k in range(steps):
            x = stepper(rhs, k * h, x, h)
        errors.append(abs(x[0] - np.exp(rate)))
    return float(np.log(errors[0] / errors[1]) / np.log(grids[1] / grids[0]))


# DOP853 advances with its 8th-order weights, it has no 7th-order solution
ORDER_CASES = (
    ("IMPLICIT-EULER", 1, lambda rhs, t, x, h: step_collocation(rhs, t, x, h, radau_iia(1)), (100, 200)),
    ("GAUSS 2", 4, lambda rhs, t, x, h: step_collocation(rhs, t, x, h, gauss(2)), (16, 32)),
    ("RADAU 4", 7, lambda rhs, t, x, h: step_collocation(rhs, t, x, h, radau_iia(4)), (8, 16)),
    ("DORMAND-PRINCE 7", 4, lambda rhs, t, x, h: step_explicit(rhs, t, x, h, dormand_prince(7))[0], (64, 128)),
    ("DORMAND-PRINCE 13", 8, lambda rhs, t, x, h: step_explicit(rhs, t, x, h, dormand_prince(13))[0], (8, 16)),
)


def check_orders(rate: float = 4.0) -> PropertyResult:
    """Observed convergence slopes within 0.3 of the nominal orders."""

    def run():
        worst = 0.0
        parts = []
        for label, nominal, stepper, grids in ORDER_CASES:
            slope = observed_order(stepper, rate, grids)
            parts.append(f"{label} {slope:.2f}")
            worst = max(worst, abs(slope - nominal))
        return worst, ", ".join(parts)

    return _guarded("Convergence orders", 0.3, run)


def run_property_suite(
    inputs: SuiteInputs,
    seed: int = 0,
    taylor_cases: int = 1000,
    congruence_cases: int = 100,
    config: Optional[SolverConfig] = None,
) -> VerifyReport:
    """
    Run every property check with a fixed seed.

    Args:
        inputs: Problems to run the problem-dependent checks on
        seed: Seed of the random generator
        taylor_cases: Random Taylor expressions
        congruence_cases: Random congruence inputs
        config: Solver configuration

    Returns:
        VerifyReport in a fixed order
    """
    rng = np.random.default_rng(seed)
    results = [
        check_taylor_arithmetic(rng, taylor_cases),
        check_congruences(rng, congruence_cases),
        check_reduction_covariance(inputs.linear, inputs.linear_chars, rng, config=config),
        check_nonlinear_array(inputs.nonlinear, inputs.nonlinear_x0, config),
        check_gauss_newton(inputs.nonlinear, inputs.nonlinear_x0, rng, config=config),
        check_gauss_invariants(rng),
        check_structure(inputs.structured, config=config),
        check_orders(),
    ]
    for r in results:
        logger.info(r.summary())
    return VerifyReport(results=results)

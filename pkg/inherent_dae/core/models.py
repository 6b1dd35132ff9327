"""
Pure data models shared by the numerical core, the problem library and the CLI.
No numerical work happens here - fully testable with hand-built values.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional

import numpy as np

from .errors import ConfigurationError


class Symmetry(Enum):
    """Symmetry class of a linear DAE pair (E, A)"""
    NONE = "none"
    SELF_ADJOINT = "self_adjoint"  # E^T = -E, A^T = A + dE/dt
    SKEW_ADJOINT = "skew_adjoint"  # E^T = E, A^T = -A - dE/dt


class Version(Enum):
    """How the inherent ODE is fixed, or DIRECT discretization of the reduced DAE"""
    INHERENT = "INHERENT"  # Q(t) = Q0 on the window
    SPIN_STABILIZED = "SPIN_STABILIZED"  # Q(t) = Q0 + (t - t0) dQ0
    ROTATED = "ROTATED"  # smooth QR of E1^T, E12 = 0
    SELF_ADJOINT = "SELF_ADJOINT"  # leading block of Q^T E Q is J
    SKEW_ADJOINT = "SKEW_ADJOINT"  # leading block of Q^T E Q is S
    PRESCRIBED = "PRESCRIBED"  # user map t -> (Q, dQ)
    DIRECT = "DIRECT"


class Method(Enum):
    """Time-stepping scheme family"""
    GAUSS_LOBATTO = "GAUSS-LOBATTO"
    RADAU = "RADAU"
    DORMAND_PRINCE = "DORMAND-PRINCE"
    GAUSS = "GAUSS"
    IMPLICIT_EULER = "IMPLICIT-EULER"


class Z1Choice(Enum):
    """Left factor Z1 of the differential part of the reduced DAE"""
    SMOOTH_QR = "smooth_qr"  # locally smooth QR of E T2
    FROZEN = "frozen"  # QR at the window start, zero derivative
    KERNEL = "kernel"  # Z1 = T2, admissible for self-/skew-adjoint pairs


class Structure(Enum):
    """Canonical form of an assembled inherent ODE"""
    NONE = "none"
    HAMILTONIAN = "hamiltonian"  # B = J^{-1} C, C symmetric
    GENERALIZED_ORTHOGONAL = "generalized_orthogonal"  # B = S^{-1} K, K skew


DAE_METHODS = (Method.GAUSS_LOBATTO, Method.RADAU, Method.IMPLICIT_EULER)
ODE_METHODS = (Method.DORMAND_PRINCE, Method.GAUSS)
DORMAND_PRINCE_STAGES = (7, 13)


@dataclass(frozen=True)
class CharValues:
    """Characteristic values (mu, a, d) of a regular DAE"""
    mu: int
    a: int  # algebraic equations
    d: int  # differential equations

    @property
    def n(self) -> int:
        return self.a + self.d


@dataclass
class SolverConfig:
    """Tolerances and budgets of the constructions and the integrators"""
    rank_tol: float = 1e-8  # relative rank threshold for pivoted QR
    pivot_tol: float = 1e-10  # relative threshold for singular/definite checks
    mu_max: Optional[int] = None  # None means n
    gn_tol: float = 1e-10  # scaled by (1 + ||guess||)
    gn_max_iter: int = 25
    newton_tol: float = 1e-12
    newton_max_iter: int = 25
    safety: float = 0.9
    min_factor: float = 0.2
    max_factor: float = 5.0
    max_steps: int = 10**6
    mu0_shortcut: bool = True
    z1_choice: Z1Choice = Z1Choice.SMOOTH_QR
    taylor_order: int = 1
    fd_step: float = 1e-7
    sample_count: int = 5


@dataclass(frozen=True)
class QStrategy:
    """Choice of the transformation Q fixing the inherent ODE"""
    kind: Version
    prescribed: Optional[Callable] = None  # t -> TaylorArray (Q, dQ) of order >= 1

    def __post_init__(self):
        if self.kind == Version.DIRECT:
            raise ConfigurationError("DIRECT does not fix an inherent ODE")
        if self.kind == Version.PRESCRIBED and self.prescribed is None:
            raise ConfigurationError("PRESCRIBED strategy requires a map t -> (Q, dQ)")


@dataclass
class IntegratorSpec:
    """Method, stage count, step mode and version of one integration"""
    method: Method
    stages: int
    version: Version
    n_steps: Optional[int] = None  # fixed grid
    tol: Optional[float] = None  # adaptive
    prescribed: Optional[Callable] = None

    @property
    def adaptive(self) -> bool:
        return self.tol is not None

    @property
    def order(self) -> int:
        """Order reported in tables and used by the step controller"""
        if self.method == Method.DORMAND_PRINCE:
            return 4 if self.stages == 7 else 7
        if self.method == Method.RADAU:
            return 2 * self.stages - 1
        if self.method == Method.IMPLICIT_EULER:
            return 1
        return 2 * self.stages

    @property
    def stage_label(self) -> str:
        if self.method == Method.GAUSS_LOBATTO:
            return f"{self.stages}-{self.stages + 1}"
        return str(self.stages)

    def strategy(self) -> QStrategy:
        return QStrategy(self.version, self.prescribed)

    def validate(self) -> None:
        """
        Check the method/version/mode invariants.

        Raises:
            ConfigurationError: If the combination is not admissible
        """
        if (self.n_steps is None) == (self.tol is None):
            raise ConfigurationError("Exactly one of n_steps and tol must be given")
        if self.n_steps is not None and self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be positive, got {self.n_steps}")
        if self.tol is not None and self.tol <= 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if self.version == Version.DIRECT and self.method not in DAE_METHODS:
            raise ConfigurationError(
                f"{self.method.value} integrates ODEs only and needs an inherent-ODE version"
            )
        if self.method == Method.DORMAND_PRINCE and self.stages not in DORMAND_PRINCE_STAGES:
            raise ConfigurationError(
                f"DORMAND-PRINCE pairs have 7 or 13 stages, got {self.stages}"
            )
        if self.method == Method.IMPLICIT_EULER and self.stages != 1:
            raise ConfigurationError("IMPLICIT-EULER has exactly one stage")
        if self.stages < 1:
            raise ConfigurationError(f"stages must be positive, got {self.stages}")
        if self.version == Version.PRESCRIBED and self.prescribed is None:
            raise ConfigurationError("PRESCRIBED version requires a map t -> (Q, dQ)")


@dataclass
class Trajectory:
    """Accepted grid points and full states of one integration"""
    times: np.ndarray
    states: np.ndarray  # (len(times), n) or (len(times), n, m)
    steps_taken: int
    rejected: int = 0


@dataclass
class FlowReport:
    """Flow of the inherent variables and its departure from a quadratic group"""
    times: np.ndarray
    Phi: np.ndarray  # (len(times), d, d)
    X: np.ndarray
    errors: np.ndarray  # geometric error at each grid point
    max_error: float
    steps_taken: int = 0


@dataclass
class ProblemSpec:
    """Built-in problem name with parameter overrides"""
    name: str
    params: Dict[str, float] = field(default_factory=dict)


@dataclass
class RunRow:
    """One (method, version) row of an experiment table"""
    method: str
    version: str
    stages: str
    order: int
    steps: Optional[int] = None
    max_error: Optional[float] = None  # solution error or constraint residual
    geometric_error: Optional[float] = None
    wall_ms: float = 0.0
    failure: Optional[str] = None
    constraint_residual: Optional[float] = None  # not part of the CSV columns

    @property
    def failed(self) -> bool:
        return self.failure is not None


@dataclass
class RunReport:
    """Rows of one experiment in request order"""
    problem: str
    rows: List[RunRow] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(row.failed for row in self.rows)

"""
Reduction of a linear DAE to d differential and a algebraic equations.

    E1(t) x' = A1(t) x + f1(t)     E1 = Z1^T E, A1 = Z1^T A, f1 = Z1^T f
           0 = A2(t) x + f2(t)     A2 = Z2^T N_mu [I 0 ... 0]^T, f2 = Z2^T g_mu

Z2 spans the left null space of M_mu, T2 the kernel of A2 and Z1 the range
of E T2. All factors come from frozen-decision QR factorizations so they are
smooth on a window and carry Taylor derivatives.
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterable, Optional

import numpy as np

from .darray import DerivativeArrayLinear, LinearDae, build_linear_array
from .errors import RankDeficiencyError, RegularityError
from .models import CharValues, SolverConfig, Z1Choice
from .smoothfact import QrDecisions, frozen_qr, reference_pivoting
from .taylor import TaylorArray

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReductionDecisions:
    """Frozen factorization decisions of one window"""
    z2: QrDecisions  # QR of M_mu (or of E on the mu=0 shortcut)
    t2: QrDecisions  # QR of A2^T
    z1: Optional[QrDecisions] = None  # QR of E T2
    Z1_frozen: Optional[np.ndarray] = None
    shortcut: bool = False


@dataclass
class Projectors:
    """Z2, T2, Z1 and the range basis used in place of T2 by the congruences"""
    Z2: TaylorArray  # (mu+1)n x a
    T2: TaylorArray  # n x d
    Z1: TaylorArray  # n x d
    base: TaylorArray  # n x d
    A2: TaylorArray
    f2: TaylorArray
    decisions: ReductionDecisions


@dataclass
class ReducedBlocks:
    """The reduced DAE at one time point, with the original coefficients"""
    t: float
    E: TaylorArray
    A: TaylorArray
    f: TaylorArray
    Z1: TaylorArray
    Z2: TaylorArray
    T2: TaylorArray
    base: TaylorArray
    E1: TaylorArray
    A1: TaylorArray
    f1: TaylorArray
    A2: TaylorArray
    f2: TaylorArray

    @property
    def d(self) -> int:
        return self.E1.shape[0]

    @property
    def a(self) -> int:
        return self.A2.shape[0]

    def with_rows(self, Z1: TaylorArray) -> "ReducedBlocks":
        """Same reduced DAE with the differential rows taken along Z1."""
        return replace(self, Z1=Z1, E1=Z1.T @ self.E, A1=Z1.T @ self.A, f1=Z1.T @ self.f)

    def residual(self, x: np.ndarray, xdot: np.ndarray):
        """(differential, algebraic) residuals of a state at this point."""
        diff = self.E1.value @ xdot - self.A1.value @ x - self.f1.value
        alg = self.A2.value @ x + self.f2.value
        return diff, alg


def _hypothesis_at(dae: LinearDae, mu: int, t: float, rank_tol: float):
    """Corank a of M_mu and whether the remaining hypothesis parts hold at t."""
    n = dae.n
    arr = build_linear_array(dae, mu, t, 0)
    fact = frozen_qr(arr.M, rank_tol=rank_tol, full_rank=False)
    a = arr.M.shape[0] - fact.rank
    Z2 = fact.null_basis().value
    A2 = Z2.T @ arr.N_first().value
    _, rank_a2 = reference_pivoting(A2.T, rank_tol) if a else (None, 0)
    if rank_a2 != a or a > n:
        return a, False
    T2 = frozen_qr(TaylorArray.constant(A2.T, 0), rank_tol=rank_tol).Q.value[:, a:]
    E, _, _ = dae.coefficients(t, 0)
    d = n - a
    _, rank_e = reference_pivoting(E.value @ T2, rank_tol) if d else (None, 0)
    return a, rank_e == d


def characteristic_values(
    dae: LinearDae,
    t_samples: Iterable[float],
    tol: float = 1e-8,
    mu_max: Optional[int] = None,
) -> CharValues:
    """
    Smallest mu with constant (a, d) satisfying the regularity hypothesis.

    Args:
        dae: Linear DAE
        t_samples: Sample times certifying constant ranks
        tol: Relative rank threshold
        mu_max: Largest level tried (defaults to n)

    Raises:
        RankDeficiencyError: If the hypothesis holds at every sample but with
            different a (a critical point lies in the interval)
        RegularityError: If no level up to mu_max works
    """
    samples = list(t_samples)
    mu_max = dae.n if mu_max is None else mu_max
    for mu in range(mu_max + 1):
        results = [_hypothesis_at(dae, mu, t, tol) for t in samples]
        if not all(ok for _, ok in results):
            logger.debug("Hypothesis fails at level %d for '%s'", mu, dae.name)
            continue
        coranks = {a for a, _ in results}
        if len(coranks) > 1:
            raise RankDeficiencyError(
                f"Corank of M_{mu} varies over the samples ({sorted(coranks)}) for '{dae.name}'"
            )
        a = coranks.pop()
        logger.info("'%s' has characteristic values mu=%d, a=%d, d=%d", dae.name, mu, a, dae.n - a)
        return CharValues(mu=mu, a=a, d=dae.n - a)
    raise RegularityError(f"No level mu <= {mu_max} satisfies the hypothesis for '{dae.name}'")


def compute_projectors(
    array: DerivativeArrayLinear,
    E: TaylorArray,
    a: int,
    d: int,
    reference: Optional[ReductionDecisions] = None,
    z1_choice: Z1Choice = Z1Choice.SMOOTH_QR,
    rank_tol: float = 1e-8,
) -> Projectors:
    """
    Z2, T2 and Z1 with Taylor derivatives from the level-mu array.

    Raises:
        RankDeficiencyError: If the ranks differ from (a, d) at this point
    """
    size = array.M.shape[0]
    m_fact = frozen_qr(array.M, None if reference is None else reference.z2, rank_tol, full_rank=False)
    if size - m_fact.rank != a:
        raise RankDeficiencyError(
            f"Corank of M_{array.mu} is {size - m_fact.rank}, expected a={a}"
        )
    Z2 = m_fact.null_basis()
    A2 = Z2.T @ array.N_first()
    f2 = Z2.T @ array.g
    t_fact = frozen_qr(A2.T, None if reference is None else reference.t2, rank_tol, full_rank=True)
    T2 = t_fact.Q[:, a:]

    z1_decisions = None
    Z1_frozen = None if reference is None else reference.Z1_frozen
    if z1_choice == Z1Choice.KERNEL:
        Z1 = T2
    else:
        e_fact = frozen_qr(E @ T2, None if reference is None else reference.z1, rank_tol, full_rank=True)
        z1_decisions = e_fact.decisions
        Z1 = e_fact.range_basis()
        if z1_choice == Z1Choice.FROZEN:
            if Z1_frozen is None:
                Z1_frozen = Z1.value.copy()
            Z1 = TaylorArray.constant(Z1_frozen, Z1.order)
    decisions = ReductionDecisions(
        z2=m_fact.decisions, t2=t_fact.decisions, z1=z1_decisions, Z1_frozen=Z1_frozen,
    )
    return Projectors(Z2=Z2, T2=T2, Z1=Z1, base=T2, A2=A2, f2=f2, decisions=decisions)


def shortcut_projectors(
    E: TaylorArray,
    A: TaylorArray,
    f: TaylorArray,
    a: int,
    reference: Optional[ReductionDecisions] = None,
    rank_tol: float = 1e-8,
) -> Projectors:
    """
    Projectors for mu = 0 from one frozen QR of E.

    Z1 spans the range of E and Z2 its left null space, so the reduced DAE is
    the DAE itself with orthogonally transformed rows. The range basis doubles
    as the leading block of Q for the congruence constructions.
    """
    n = E.shape[0]
    e_fact = frozen_qr(E, None if reference is None else reference.z2, rank_tol, full_rank=False)
    if n - e_fact.rank != a:
        raise RankDeficiencyError(f"Rank of E is {e_fact.rank}, expected {n - a}")
    Z1 = e_fact.range_basis()
    Z2 = e_fact.null_basis()
    A2 = Z2.T @ A
    f2 = Z2.T @ f
    t_fact = frozen_qr(A2.T, None if reference is None else reference.t2, rank_tol, full_rank=True)
    decisions = ReductionDecisions(z2=e_fact.decisions, t2=t_fact.decisions, shortcut=True)
    return Projectors(Z2=Z2, T2=t_fact.Q[:, a:], Z1=Z1, base=Z1, A2=A2, f2=f2, decisions=decisions)


def assemble_reduced(dae: LinearDae, projectors: Projectors, t: float, coefficients=None) -> ReducedBlocks:
    """Reduced blocks at t from projectors evaluated at t."""
    if coefficients is None:
        coefficients = dae.coefficients(t, projectors.T2.order)
    E, A, f = coefficients
    Z1 = projectors.Z1
    return ReducedBlocks(
        t=t,
        E=E,
        A=A,
        f=f,
        Z1=Z1,
        Z2=projectors.Z2,
        T2=projectors.T2,
        base=projectors.base,
        E1=Z1.T @ E,
        A1=Z1.T @ A,
        f1=Z1.T @ f,
        A2=projectors.A2,
        f2=projectors.f2,
    )


class ReducedWindow:
    """
    Reduced DAE on a window [t0, t0 + h].

    Decisions are frozen at t0 and reused at every evaluation point; blocks
    are cached per time so stage evaluations of one step share the work.
    """

    def __init__(
        self,
        dae: LinearDae,
        chars: CharValues,
        t0: float,
        config: Optional[SolverConfig] = None,
        order: Optional[int] = None,
    ):
        self.dae = dae
        self.chars = chars
        self.t0 = t0
        self.config = config or SolverConfig()
        self.order = self.config.taylor_order if order is None else order
        self.shortcut = chars.mu == 0 and self.config.mu0_shortcut
        self._cache: Dict[float, ReducedBlocks] = {}
        projectors, coefficients = self._evaluate(t0, None)
        self.decisions = projectors.decisions
        self._cache[t0] = assemble_reduced(dae, projectors, t0, coefficients)

    def _evaluate(self, t: float, reference: Optional[ReductionDecisions]):
        cfg = self.config
        if self.shortcut:
            E, A, f = self.dae.coefficients(t, self.order)
            return shortcut_projectors(E, A, f, self.chars.a, reference, cfg.rank_tol), (E, A, f)
        n = self.dae.n
        array = build_linear_array(self.dae, self.chars.mu, t, self.order)
        # block row 0 of the array is the DAE itself
        E, A, f = array.M[:n, :n], array.N[:n, :n], array.g[:n]
        projectors = compute_projectors(
            array, E, self.chars.a, self.chars.d, reference, cfg.z1_choice, cfg.rank_tol,
        )
        return projectors, (E, A, f)

    def blocks(self, t: float) -> ReducedBlocks:
        cached = self._cache.get(t)
        if cached is None:
            projectors, coefficients = self._evaluate(t, self.decisions)
            cached = assemble_reduced(self.dae, projectors, t, coefficients)
            self._cache[t] = cached
        return cached

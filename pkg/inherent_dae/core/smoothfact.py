"""
Locally smooth matrix factorizations over TaylorArray.

Every discrete decision of a factorization (column pivoting, reflector signs,
the reference eigenbasis of a congruence) is taken once at a reference point
and frozen; the remaining arithmetic runs in Taylor arithmetic so the factors
carry their time derivatives. Reusing the decisions of the window start
keeps the factors smooth on the whole window.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import eigh, qr

from .errors import ConfigurationError, DefinitenessError, RankDeficiencyError, SingularPointError
from .taylor import TaylorArray, dot, inv, outer, solve, sqrt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QrDecisions:
    """Pivoting and reflector signs frozen at the reference point"""
    permutation: Tuple[int, ...]
    signs: Tuple[float, ...]  # one per reflector
    rank: int


@dataclass
class FrozenQr:
    """Q R = A Pi0 with Q orthonormal and R upper triangular at every slice"""
    Q: TaylorArray  # m x m
    R: TaylorArray  # m x k
    Pi0: np.ndarray  # column permutation (indices)
    decisions: QrDecisions

    @property
    def rank(self) -> int:
        return self.decisions.rank

    def range_basis(self) -> TaylorArray:
        """Orthonormal basis of the column space (first rank columns of Q)."""
        return self.Q[:, : self.rank]

    def null_basis(self) -> TaylorArray:
        """Orthonormal basis of the left null space (trailing columns of Q)."""
        return self.Q[:, self.rank:]


@dataclass(frozen=True)
class CongruenceDecisions:
    """Frozen data of a congruence normalization"""
    signs: Tuple[float, ...] = ()  # anti-triangularization reflectors
    W0: Optional[np.ndarray] = None  # reference eigenbasis (symmetric case)


@dataclass
class CongruenceResult:
    """W^T Ebar W = target with W smooth on the window"""
    W: TaylorArray
    target: np.ndarray
    p: int
    q: int
    decisions: CongruenceDecisions


def symplectic_unit(p: int) -> np.ndarray:
    """J = [[0, I_p], [-I_p, 0]]."""
    eye = np.eye(p)
    zero = np.zeros((p, p))
    return np.block([[zero, eye], [-eye, zero]])


def signature_matrix(p: int, q: int) -> np.ndarray:
    """S = diag(I_p, -I_q)."""
    return np.diag(np.concatenate([np.ones(p), -np.ones(q)]))


# QR ---------------------------------------------------------------------


def reference_pivoting(A: np.ndarray, rank_tol: float = 1e-8) -> Tuple[np.ndarray, int]:
    """
    Column-pivoted QR at the reference point.

    Returns:
        Tuple of (permutation, numerical rank relative to the largest pivot)
    """
    m, k = A.shape
    if m == 0 or k == 0:
        return np.arange(k), 0
    R, perm = qr(A, mode="r", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size else 0.0
    if scale == 0.0:
        return perm, 0
    return perm, int(np.sum(diag > rank_tol * scale))


def _reflect(Q: TaylorArray, R: TaylorArray, steps: int, signs: Optional[Tuple[float, ...]]):
    """Apply Householder reflectors in place; choose signs when none are given."""
    m = R.shape[0]
    chosen = []
    for j in range(steps):
        x = R[j:, j]
        if signs is None:
            sigma = 1.0 if x.value[0] >= 0.0 else -1.0
        else:
            sigma = signs[j]
        chosen.append(sigma)
        e1 = np.zeros(m - j)
        e1[0] = 1.0
        v = x + sqrt(dot(x, x)) * (sigma * e1)
        beta = 2.0 / dot(v, v)
        block = R[j:, :]
        R.coeffs[:, j:, :] = (block - outer(v, beta * (v @ block))).coeffs
        cols = Q[:, j:]
        Q.coeffs[:, :, j:] = (cols - outer(cols @ v, beta * v)).coeffs
    # positive diagonal of R at the reference point
    flip = -np.asarray(chosen)
    Q.coeffs[:, :, :steps] *= flip
    R.coeffs[:, :steps, :] *= flip[:, None]
    return tuple(chosen)


def frozen_qr(
    A: TaylorArray,
    reference: Optional[QrDecisions] = None,
    rank_tol: float = 1e-8,
    full_rank: bool = True,
) -> FrozenQr:
    """
    Householder QR with decisions frozen at the reference point.

    Only the first `rank` pivot columns are reflected, so the trailing
    columns of Q span the left null space of a constant-rank A.

    Args:
        A: m x k TaylorMatrix
        reference: Frozen decisions; computed at A's value when absent
        rank_tol: Relative rank threshold for the reference pivoting
        full_rank: Require full column rank at the reference point

    Raises:
        RankDeficiencyError: If full column rank is required but not present,
            or if the rank is lost at this point
    """
    m, k = A.shape
    if reference is None:
        perm, rank = reference_pivoting(A.value, rank_tol)
        if full_rank and rank < k:
            raise RankDeficiencyError(
                f"Matrix of shape {A.shape} has rank {rank} at the reference point; "
                "choose a smaller window or re-reduce"
            )
        signs = None
    else:
        perm, rank, signs = np.asarray(reference.permutation, dtype=int), reference.rank, reference.signs
    R = TaylorArray(A.coeffs[:, :, perm].copy())
    Q = TaylorArray(np.array(TaylorArray.eye(m, A.order).coeffs))
    chosen = _reflect(Q, R, rank, signs)
    decisions = QrDecisions(tuple(int(i) for i in perm), chosen, rank)
    _check_rank(R, rank, rank_tol)
    return FrozenQr(Q=Q, R=R, Pi0=np.asarray(perm), decisions=decisions)


def _check_rank(R: TaylorArray, rank: int, rank_tol: float) -> None:
    values = R.value
    scale = np.max(np.abs(values)) if values.size else 0.0
    if rank and np.min(np.abs(np.diag(values)[:rank])) <= rank_tol * scale:
        raise RankDeficiencyError("Rank dropped inside the window of a frozen QR")
    trailing = values[rank:, rank:]
    if trailing.size and np.max(np.abs(trailing)) > rank_tol * max(scale, 1.0) * 1e2:
        raise RankDeficiencyError("Rank grew inside the window of a frozen QR")


def smooth_qr(A: TaylorArray, reference_decisions: Optional[FrozenQr] = None, rank_tol: float = 1e-8) -> FrozenQr:
    """
    Locally smooth QR of a full-column-rank TaylorMatrix.

    Args:
        A: m x k TaylorMatrix with full column rank at the reference point
        reference_decisions: Factorization whose pivots and signs are reused

    Returns:
        FrozenQr with Q R = A Pi0 at every coefficient slice
    """
    reference = None if reference_decisions is None else reference_decisions.decisions
    return frozen_qr(A, reference, rank_tol, full_rank=True)


def complete_to_basis(T2: TaylorArray, reference: Optional[QrDecisions] = None) -> Tuple[TaylorArray, QrDecisions]:
    """
    Orthonormal completion T2' with [T2 T2'] pointwise nonsingular.

    Returns:
        Tuple of (T2' of shape n x (n-d), decisions to reuse on the window)
    """
    fact = frozen_qr(T2, reference, full_rank=True)
    return fact.Q[:, T2.shape[1]:], fact.decisions


# Cholesky ---------------------------------------------------------------


def smooth_cholesky(A: TaylorArray, pivot_tol: float = 1e-10) -> TaylorArray:
    """
    Cholesky factor L (lower triangular) with L L^T = A in Taylor arithmetic.

    Raises:
        DefinitenessError: If a pivot is not positive relative to pivot_tol
    """
    n = A.shape[0]
    L = TaylorArray.zeros((n, n), A.order)
    scale = max(np.max(np.abs(A.value)), 1e-300) if A.value.size else 1.0
    for j in range(n):
        s = A[j:, j] - L[j:, :j] @ L[j, :j]
        pivot = s[0]
        if pivot.value <= pivot_tol * scale:
            raise DefinitenessError(
                f"Non-positive Cholesky pivot {float(pivot.value):.3e} in column {j}"
            )
        L.coeffs[:, j:, j] = (s / sqrt(pivot)).coeffs
    return L


# congruence -------------------------------------------------------------


def congruence_to_j(
    Ebar: TaylorArray,
    reference: Optional[CongruenceDecisions] = None,
    pivot_tol: float = 1e-10,
) -> CongruenceResult:
    """
    Smooth W with W^T Ebar W = J for a skew-symmetric nonsingular Ebar.

    p reflector steps anti-triangularize Ebar to [[E11, E12], [-E12^T, 0]]
    (E12 anti-triangular); W2 = [[I, 0], [-E12^{-1} E11 / 2, E12^{-1}]]
    then maps it to J.

    Raises:
        ConfigurationError: If the dimension is odd or the input is not skew
        SingularPointError: If E12 is singular
    """
    m = Ebar.shape[0]
    if m % 2:
        raise ConfigurationError(f"Skew-symmetric congruence needs even dimension, got {m}")
    value = Ebar.value
    scale = max(np.max(np.abs(value)), 1e-300) if value.size else 1.0
    if np.max(np.abs(value + value.T), initial=0.0) > 1e-8 * scale:
        raise ConfigurationError("Matrix is not skew-symmetric at the reference point")
    p = m // 2
    order = Ebar.order
    M = TaylorArray(np.array(Ebar.coeffs))
    W1 = TaylorArray(np.array(TaylorArray.eye(m, order).coeffs))
    chosen = []
    for k in range(p):
        last = m - 1 - k
        idx = slice(k, last)
        c = M[idx, last]
        if reference is None:
            sigma = 1.0 if c.value[0] >= 0.0 else -1.0
        else:
            sigma = reference.signs[k]
        chosen.append(sigma)
        e1 = np.zeros(last - k)
        e1[0] = 1.0
        v = c + sqrt(dot(c, c)) * (sigma * e1)
        beta = 2.0 / dot(v, v)
        rows = M[idx, :]
        M.coeffs[:, idx, :] = (rows - outer(v, beta * (v @ rows))).coeffs
        cols = M[:, idx]
        M.coeffs[:, :, idx] = (cols - outer(cols @ v, beta * v)).coeffs
        wcols = W1[:, idx]
        W1.coeffs[:, :, idx] = (wcols - outer(wcols @ v, beta * v)).coeffs
    E11 = M[:p, :p]
    E12 = M[:p, p:]
    try:
        E12_inv = inv(E12, pivot_tol)
    except SingularPointError as e:
        raise SingularPointError(f"Anti-triangular block is singular: {e}")
    lower_left = -0.5 * (E12_inv @ E11)
    W2 = TaylorArray(np.block([
        [TaylorArray.eye(p, order).coeffs, np.zeros((order + 1, p, p))],
        [lower_left.coeffs, E12_inv.coeffs],
    ]))
    decisions = CongruenceDecisions(signs=tuple(chosen))
    return CongruenceResult(W=W1 @ W2, target=symplectic_unit(p), p=p, q=0, decisions=decisions)


def reference_eigenbasis(Ebar0: np.ndarray, p: int, q: int) -> np.ndarray:
    """
    W0 with W0^T Ebar0 W0 = S from a symmetric eigendecomposition.

    Positive eigenvalues come first (descending), then negative ones
    (ascending); each eigenvector is signed so its largest-magnitude entry
    is positive.

    Raises:
        ConfigurationError: If the inertia of Ebar0 is not (p, q)
    """
    lam, V = eigh(Ebar0)
    scale = max(np.max(np.abs(lam)), 1e-300) if lam.size else 1.0
    positive = int(np.sum(lam > 1e-10 * scale))
    negative = int(np.sum(lam < -1e-10 * scale))
    if (positive, negative) != (p, q):
        raise ConfigurationError(
            f"Inertia ({positive}, {negative}) does not match declared ({p}, {q})"
        )
    order = np.concatenate([np.argsort(-lam)[:p], np.argsort(lam)[:q]])
    lam, V = lam[order], V[:, order]
    rows = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[rows, np.arange(V.shape[1])])
    return V / np.sqrt(np.abs(lam))


def congruence_to_s(
    Ebar: TaylorArray,
    p: int,
    q: int,
    reference: Optional[CongruenceDecisions] = None,
    pivot_tol: float = 1e-10,
) -> CongruenceResult:
    """
    Smooth W with W^T Ebar W = S = diag(I_p, -I_q) for symmetric Ebar.

    W = W0 [[L11^{-T}, -E11^{-1} E12], [0, I]] [[I, 0], [0, L22^{-T}]] where
    W0 is the frozen reference eigenbasis, L11 the Cholesky factor of E11 and
    L22 that of the negated Schur complement.

    Raises:
        ConfigurationError: If the inertia does not match (p, q)
        DefinitenessError: If a Cholesky factor fails inside the window
    """
    n = Ebar.shape[0]
    if p + q != n or p < 0 or q < 0:
        raise ConfigurationError(f"Block sizes ({p}, {q}) do not add up to {n}")
    order = Ebar.order
    if reference is None or reference.W0 is None:
        W0 = reference_eigenbasis(Ebar.value, p, q)
    else:
        W0 = reference.W0
    E = W0.T @ Ebar @ W0
    E11, E12, E22 = E[:p, :p], E[:p, p:], E[p:, p:]
    if p:
        L11 = smooth_cholesky(E11, pivot_tol)
        F = solve(E11, E12, pivot_tol)
        L11_invT = inv(L11.T, pivot_tol)
    if q:
        schur = E22 - E12.T @ F if p else E22
        L22 = smooth_cholesky(-schur, pivot_tol)
        L22_invT = inv(L22.T, pivot_tol)
    if p and q:
        V = TaylorArray(np.block([
            [L11_invT.coeffs, (-F @ L22_invT).coeffs],
            [np.zeros((order + 1, q, p)), L22_invT.coeffs],
        ]))
    elif p:
        V = L11_invT
    else:
        V = L22_invT
    logger.debug("Congruence to S with inertia (%d, %d) on order-%d data", p, q, order)
    return CongruenceResult(
        W=W0 @ V,
        target=signature_matrix(p, q),
        p=p,
        q=q,
        decisions=CongruenceDecisions(W0=W0),
    )

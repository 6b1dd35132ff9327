"""
Truncated Taylor arithmetic for scalars, vectors and matrices.

A TaylorArray of order K and shape s stores coefficients of shape (K+1, *s);
coefficient j holds (1/j!) d^j x/dt^j at the expansion point. Order K = 1 is
the value/derivative pair. Products and quotients are Cauchy convolutions, so
every kernel below is free of data-dependent branches; preconditions
(nonzero divisor, positive radicand, nonsingular pivot) are checked up front.
"""
from math import factorial
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ShapeError, SingularPointError

Operand = Union["TaylorArray", np.ndarray, float]


class TaylorArray:
    """Truncated Taylor expansion of an array-valued function of time"""

    __slots__ = ("coeffs",)
    # ndarray (op) TaylorArray dispatches to our reflected operators
    __array_ufunc__ = None

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim < 1:
            raise ShapeError("Taylor coefficients need a leading order axis")
        self.coeffs = coeffs

    # construction ------------------------------------------------------

    @classmethod
    def constant(cls, value, order: int) -> "TaylorArray":
        """Constant function: all derivative coefficients zero."""
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros((order + 1,) + value.shape)
        coeffs[0] = value
        return cls(coeffs)

    @classmethod
    def variable(cls, t: float, order: int) -> "TaylorArray":
        """The independent variable t expanded at t (value t, slope 1)."""
        coeffs = np.zeros(order + 1)
        coeffs[0] = t
        if order >= 1:
            coeffs[1] = 1.0
        return cls(coeffs)

    @classmethod
    def zeros(cls, shape, order: int) -> "TaylorArray":
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        return cls(np.zeros((order + 1,) + shape))

    @classmethod
    def eye(cls, n: int, order: int) -> "TaylorArray":
        return cls.constant(np.eye(n), order)

    # inspection --------------------------------------------------------

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def shape(self) -> tuple:
        return self.coeffs.shape[1:]

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    def coefficient(self, j: int) -> np.ndarray:
        return self.coeffs[j]

    def derivative_value(self, j: int = 1) -> np.ndarray:
        """j-th time derivative at the expansion point."""
        return factorial(j) * self.coeffs[j]

    def derivative(self) -> "TaylorArray":
        """Differentiate the truncated series; the order drops by one."""
        if self.order < 1:
            raise ShapeError("Cannot differentiate an order-0 expansion")
        scale = np.arange(1, self.order + 1).reshape((-1,) + (1,) * self.ndim)
        return TaylorArray(self.coeffs[1:] * scale)

    def truncate(self, order: int) -> "TaylorArray":
        if order > self.order:
            raise ShapeError(f"Cannot raise order {self.order} to {order}")
        return TaylorArray(self.coeffs[: order + 1])

    def evaluate(self, dt: float) -> np.ndarray:
        """Sum the truncated series at offset dt from the expansion point."""
        powers = dt ** np.arange(self.order + 1)
        return np.tensordot(powers, self.coeffs, axes=(0, 0))

    @property
    def T(self) -> "TaylorArray":
        if self.ndim < 2:
            return self
        return TaylorArray(np.swapaxes(self.coeffs, -1, -2))

    def __getitem__(self, key) -> "TaylorArray":
        if not isinstance(key, tuple):
            key = (key,)
        return TaylorArray(self.coeffs[(slice(None),) + key])

    def __repr__(self) -> str:
        return f"TaylorArray(order={self.order}, shape={self.shape})"

    # arithmetic --------------------------------------------------------

    def _coerce(self, other: Operand) -> "TaylorArray":
        if isinstance(other, TaylorArray):
            if other.order != self.order:
                raise ShapeError(f"Taylor orders differ: {self.order} vs {other.order}")
            return other
        return TaylorArray.constant(other, self.order)

    def __add__(self, other: Operand) -> "TaylorArray":
        if isinstance(other, TaylorArray):
            a, b = _aligned(self, self._coerce(other))
            return TaylorArray(a + b)
        other = np.asarray(other, dtype=float)
        coeffs = _expand(self.coeffs, other.ndim)
        shape = np.broadcast_shapes(coeffs.shape, (1,) + other.shape)
        coeffs = np.array(np.broadcast_to(coeffs, shape))
        coeffs[0] = coeffs[0] + other
        return TaylorArray(coeffs)

    __radd__ = __add__

    def __neg__(self) -> "TaylorArray":
        return TaylorArray(-self.coeffs)

    def __sub__(self, other: Operand) -> "TaylorArray":
        return self + (-other)

    def __rsub__(self, other: Operand) -> "TaylorArray":
        return (-self) + other

    def __mul__(self, other: Operand) -> "TaylorArray":
        if isinstance(other, TaylorArray):
            a, b = _aligned(self, self._coerce(other))
            return TaylorArray(_cauchy(a, b, np.multiply))
        other = np.asarray(other, dtype=float)
        return TaylorArray(_expand(self.coeffs, other.ndim) * other)

    __rmul__ = __mul__

    def __truediv__(self, other: Operand) -> "TaylorArray":
        if not isinstance(other, TaylorArray):
            return self * (1.0 / np.asarray(other, dtype=float))
        return divide(self, other)

    def __rtruediv__(self, other: Operand) -> "TaylorArray":
        return divide(self._coerce(other), self)

    def __matmul__(self, other: Operand) -> "TaylorArray":
        if isinstance(other, TaylorArray):
            return TaylorArray(_cauchy(self.coeffs, self._coerce(other).coeffs, np.matmul))
        other = np.asarray(other, dtype=float)
        return TaylorArray(np.stack([np.matmul(c, other) for c in self.coeffs]))

    def __rmatmul__(self, other: Operand) -> "TaylorArray":
        other = np.asarray(other, dtype=float)
        return TaylorArray(np.stack([np.matmul(other, c) for c in self.coeffs]))


TaylorScalar = TaylorArray  # shape ()
TaylorVector = TaylorArray  # shape (n,)
TaylorMatrix = TaylorArray  # shape (rows, cols)


def _expand(coeffs: np.ndarray, ndim: int) -> np.ndarray:
    """Insert unit axes after the order axis so value shapes broadcast."""
    extra = ndim - (coeffs.ndim - 1)
    if extra <= 0:
        return coeffs
    return coeffs.reshape(coeffs.shape[:1] + (1,) * extra + coeffs.shape[1:])


def _aligned(a: TaylorArray, b: TaylorArray):
    ndim = max(a.ndim, b.ndim)
    return _expand(a.coeffs, ndim), _expand(b.coeffs, ndim)


def _cauchy(a: np.ndarray, b: np.ndarray, op: Callable) -> np.ndarray:
    """Truncated Cauchy product c_k = sum_j op(a_j, b_{k-j})."""
    order = a.shape[0] - 1
    first = op(a[0], b[0])
    out = np.empty((order + 1,) + np.shape(first))
    out[0] = first
    for k in range(1, order + 1):
        acc = op(a[0], b[k])
        for j in range(1, k + 1):
            acc = acc + op(a[j], b[k - j])
        out[k] = acc
    return out


# scalar kernels --------------------------------------------------------


def divide(a: TaylorArray, b: TaylorArray) -> TaylorArray:
    """
    Elementwise quotient a / b.

    Raises:
        SingularPointError: If a leading coefficient of b is zero
    """
    b = a._coerce(b)
    if np.any(b.value == 0.0):
        raise SingularPointError("Division by a Taylor value with zero leading coefficient")
    a_c, b_c = np.broadcast_arrays(*_aligned(a, b))
    out = np.empty_like(a_c)
    out[0] = a_c[0] / b_c[0]
    for k in range(1, a.order + 1):
        acc = a_c[k].copy()
        for j in range(1, k + 1):
            acc = acc - b_c[j] * out[k - j]
        out[k] = acc / b_c[0]
    return TaylorArray(out)


def sqrt(a: TaylorArray) -> TaylorArray:
    """
    Elementwise square root.

    Raises:
        SingularPointError: If a leading coefficient is not positive
    """
    if np.any(a.value <= 0.0):
        raise SingularPointError("Square root of a non-positive leading coefficient")
    c = a.coeffs
    out = np.empty_like(c)
    out[0] = np.sqrt(c[0])
    for k in range(1, a.order + 1):
        acc = c[k].copy()
        for j in range(1, k):
            acc = acc - out[j] * out[k - j]
        out[k] = acc / (2.0 * out[0])
    return TaylorArray(out)


def exp(a: TaylorArray) -> TaylorArray:
    c = a.coeffs
    out = np.empty_like(c)
    out[0] = np.exp(c[0])
    for k in range(1, a.order + 1):
        acc = np.zeros_like(c[0])
        for j in range(1, k + 1):
            acc = acc + j * c[j] * out[k - j]
        out[k] = acc / k
    return TaylorArray(out)


def sin_cos(a: TaylorArray):
    """Sine and cosine together; each recursion needs the other."""
    c = a.coeffs
    s_out = np.empty_like(c)
    c_out = np.empty_like(c)
    s_out[0] = np.sin(c[0])
    c_out[0] = np.cos(c[0])
    for k in range(1, a.order + 1):
        s_acc = np.zeros_like(c[0])
        c_acc = np.zeros_like(c[0])
        for j in range(1, k + 1):
            s_acc = s_acc + j * c[j] * c_out[k - j]
            c_acc = c_acc - j * c[j] * s_out[k - j]
        s_out[k] = s_acc / k
        c_out[k] = c_acc / k
    return TaylorArray(s_out), TaylorArray(c_out)


def sin(a: TaylorArray) -> TaylorArray:
    return sin_cos(a)[0]


def cos(a: TaylorArray) -> TaylorArray:
    return sin_cos(a)[1]


def arith(op: str, a: TaylorArray, b: Optional[TaylorArray] = None) -> TaylorArray:
    """
    Apply one of the scalar operations add, sub, mul, div, sqrt.

    Args:
        op: Operation name
        a: First operand
        b: Second operand (absent for sqrt)

    Returns:
        Truncated Taylor coefficients of the composed function

    Raises:
        ShapeError: If orders differ or an operand is missing
        SingularPointError: For division by zero or sqrt of a non-positive value
    """
    if op == "sqrt":
        return sqrt(a)
    if b is None:
        raise ShapeError(f"Operation '{op}' needs two operands")
    a._coerce(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return divide(a, b)
    raise ValueError(f"Unknown scalar operation '{op}'")


def mat_arith(op: str, A: TaylorArray, B: Optional[Operand] = None) -> TaylorArray:
    """
    Apply one of the matrix operations add, sub, matmul, transpose, scale.

    For 'scale', B is a plain number or a TaylorScalar.

    Raises:
        ShapeError: If shapes are not conformable or orders differ
    """
    if op == "transpose":
        return A.T
    if B is None:
        raise ShapeError(f"Operation '{op}' needs two operands")
    if op == "scale":
        if isinstance(B, TaylorArray):
            if B.ndim != 0:
                raise ShapeError(f"Scale factor must be a scalar, got shape {B.shape}")
            return A * B
        return A * float(B)
    if not isinstance(B, TaylorArray):
        B = A._coerce(B)
    A._coerce(B)
    if op in ("add", "sub"):
        if A.shape != B.shape:
            raise ShapeError(f"Shapes {A.shape} and {B.shape} differ")
        return A + B if op == "add" else A - B
    if op == "matmul":
        if A.ndim == 0 or B.ndim == 0 or A.shape[-1] != B.shape[0]:
            raise ShapeError(f"Shapes {A.shape} and {B.shape} are not conformable")
        return A @ B
    raise ValueError(f"Unknown matrix operation '{op}'")


# linear algebra --------------------------------------------------------


def solve(A: Operand, B: Operand, pivot_tol: float = 1e-14) -> TaylorArray:
    """
    Solve A X = B in Taylor arithmetic with one LU factorization of A's value.

    X_0 = A_0^{-1} B_0 and X_k = A_0^{-1} (B_k - sum_{j>=1} A_j X_{k-j}).

    Raises:
        SingularPointError: If the value of A is singular relative to pivot_tol
    """
    if not isinstance(A, TaylorArray):
        A = TaylorArray.constant(A, B.order)
    B = A._coerce(B)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != B.shape[0]:
        raise ShapeError(f"Cannot solve with A of shape {A.shape} and B of shape {B.shape}")
    lu, piv = lu_factor(A.value, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.size and diag.min() <= pivot_tol * max(diag.max(), 1.0):
        raise SingularPointError(
            f"Singular matrix in Taylor solve (smallest pivot {diag.min():.3e})"
        )
    a, b = A.coeffs, B.coeffs
    out = np.empty_like(b)
    out[0] = lu_solve((lu, piv), b[0], check_finite=False)
    for k in range(1, A.order + 1):
        rhs = b[k].copy()
        for j in range(1, k + 1):
            rhs = rhs - a[j] @ out[k - j]
        out[k] = lu_solve((lu, piv), rhs, check_finite=False)
    return TaylorArray(out)


def inv(A: TaylorArray, pivot_tol: float = 1e-14) -> TaylorArray:
    return solve(A, TaylorArray.eye(A.shape[0], A.order), pivot_tol)


# structure -------------------------------------------------------------


def lift(x: Operand, order: int) -> TaylorArray:
    if isinstance(x, TaylorArray):
        if x.order != order:
            raise ShapeError(f"Taylor orders differ: {x.order} vs {order}")
        return x
    return TaylorArray.constant(x, order)


def block(rows: Sequence, order: int) -> TaylorArray:
    """Assemble a block matrix (nested lists) or a block vector (flat list)."""
    if rows and isinstance(rows[0], (list, tuple)):
        return TaylorArray(np.block([[lift(b, order).coeffs for b in row] for row in rows]))
    return TaylorArray(np.concatenate([lift(b, order).coeffs for b in rows], axis=-1))


def hstack(parts: Sequence, order: int) -> TaylorArray:
    return TaylorArray(np.concatenate([lift(p, order).coeffs for p in parts], axis=-1))


def vstack(parts: Sequence, order: int) -> TaylorArray:
    """Stack matrices row-wise, or vectors end to end."""
    coeffs = [lift(p, order).coeffs for p in parts]
    return TaylorArray(np.concatenate(coeffs, axis=1))


def max_abs(x: TaylorArray) -> float:
    return float(np.max(np.abs(x.coeffs))) if x.coeffs.size else 0.0


# finite-difference oracle ----------------------------------------------


def taylor_lift(f: Callable[[float], Operand], t0: float, order: int, h: float = 1e-3) -> TaylorArray:
    """
    Estimate Taylor coefficients of f at t0 from samples on t0 + m h, |m| <= order.

    Fits the interpolating polynomial of degree 2K through the symmetric
    stencil and keeps coefficients 0..K. Used as an independent oracle.

    Args:
        f: Function of time returning a number or an array
        t0: Expansion point
        order: Order K of the result
        h: Stencil spacing

    Returns:
        TaylorArray of order K (accuracy degrades gracefully with h)
    """
    offsets = np.arange(-order, order + 1, dtype=float)
    samples = np.stack([np.asarray(f(t0 + m * h), dtype=float) for m in offsets])
    vander = np.vander(offsets, increasing=True)
    flat = samples.reshape(len(offsets), -1)
    fitted = np.linalg.solve(vander, flat)[: order + 1]
    fitted = fitted / (h ** np.arange(order + 1))[:, None]
    return TaylorArray(fitted.reshape((order + 1,) + samples.shape[1:]))


def outer(u: TaylorArray, w: Operand) -> TaylorArray:
    """Outer product of two Taylor vectors."""
    return TaylorArray(_cauchy(u.coeffs, lift(w, u.order).coeffs, np.multiply.outer))


def dot(u: TaylorArray, w: Operand) -> TaylorArray:
    """Inner product of two Taylor vectors (a TaylorScalar)."""
    return TaylorArray(_cauchy(u.coeffs, lift(w, u.order).coeffs, np.dot))

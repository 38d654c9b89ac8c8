"""
Linear-algebra layer for the splitting solvers.

Holds the linear-operator abstraction, power-iteration norm estimates and the
equality-constrained Tikhonov least-squares solve that produces extrapolation
weights.
"""

import logging
import warnings
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .models import ExtrapolationWeights, SpectralNormEstimate, Vector


logger = logging.getLogger(__name__)

MatrixLike = Union[np.ndarray, sp.spmatrix]


class DimensionMismatchError(ValueError):
    """Raised when a vector does not fit an operator or buffer."""

    pass


class LinearOperatorHandle:
    """
    Bounded linear map L: R^cols -> R^rows with its adjoint.

    Instances are read-only after construction and may be shared across threads.
    """

    def __init__(
        self,
        forward: Callable[[Vector], Vector],
        adjoint: Callable[[Vector], Vector],
        shape: Tuple[int, int],
        matrix: Optional[MatrixLike] = None,
        label: str = "operator",
    ):
        self._forward = forward
        self._adjoint = adjoint
        self.shape = (int(shape[0]), int(shape[1]))
        self.matrix = matrix
        self.label = label

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    @property
    def nnz(self) -> int:
        """Stored nonzeros, or the dense size when no matrix is attached."""
        if self.matrix is None:
            return self.rows * self.cols
        if sp.issparse(self.matrix):
            return int(self.matrix.nnz)
        return int(np.count_nonzero(self.matrix))

    @classmethod
    def from_matrix(cls, matrix: MatrixLike, label: str = "matrix") -> "LinearOperatorHandle":
        """Wrap a dense or sparse matrix; the transpose is materialised once."""
        if sp.issparse(matrix):
            forward_matrix = sp.csr_matrix(matrix, dtype=float)
            adjoint_matrix = forward_matrix.T.tocsr()
        else:
            forward_matrix = np.asarray(matrix, dtype=float)
            if forward_matrix.ndim != 2:
                raise DimensionMismatchError("Operator matrix must be two-dimensional")
            adjoint_matrix = np.ascontiguousarray(forward_matrix.T)

        return cls(
            forward=lambda v: forward_matrix @ v,
            adjoint=lambda w: adjoint_matrix @ w,
            shape=forward_matrix.shape,
            matrix=forward_matrix,
            label=label,
        )

    @classmethod
    def identity(cls, n: int) -> "LinearOperatorHandle":
        return cls(lambda v: v.copy(), lambda w: w.copy(), (n, n), label="identity")

    @classmethod
    def zero(cls, rows: int, cols: int) -> "LinearOperatorHandle":
        return cls(
            lambda v: np.zeros(rows), lambda w: np.zeros(cols), (rows, cols), label="zero"
        )

    @classmethod
    def diagonal(cls, values) -> "LinearOperatorHandle":
        diag = np.asarray(values, dtype=float)
        n = diag.shape[0]
        return cls(lambda v: diag * v, lambda w: diag * w, (n, n), label="diagonal")

    def apply(self, v: Vector) -> Vector:
        """Forward image L v."""
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.cols:
            raise DimensionMismatchError(
                f"{self.label}: expected vector of length {self.cols}, got shape {v.shape}"
            )
        return np.asarray(self._forward(v), dtype=float)

    def adjoint(self, w: Vector) -> Vector:
        """Adjoint image L* w."""
        w = np.asarray(w, dtype=float)
        if w.ndim != 1 or w.shape[0] != self.rows:
            raise DimensionMismatchError(
                f"{self.label}: expected adjoint input of length {self.rows}, got shape {w.shape}"
            )
        return np.asarray(self._adjoint(w), dtype=float)

    def to_dense(self) -> np.ndarray:
        """Dense matrix of the operator (column-by-column for matrix-free maps)."""
        if self.matrix is not None:
            return self.matrix.toarray() if sp.issparse(self.matrix) else np.array(self.matrix)
        return np.column_stack([self.apply(e) for e in np.eye(self.cols)])

    def __repr__(self) -> str:
        return f"LinearOperatorHandle({self.label}, shape={self.shape})"


class CountingOperator(LinearOperatorHandle):
    """Operator wrapper that counts forward and adjoint applications."""

    def __init__(self, base: LinearOperatorHandle):
        super().__init__(
            base._forward,
            base._adjoint,
            base.shape,
            matrix=base.matrix,
            label=f"counted {base.label}",
        )
        self.forward_count = 0
        self.adjoint_count = 0

    def apply(self, v: Vector) -> Vector:
        self.forward_count += 1
        return super().apply(v)

    def adjoint(self, w: Vector) -> Vector:
        self.adjoint_count += 1
        return super().adjoint(w)

    def reset_counts(self) -> None:
        self.forward_count = 0
        self.adjoint_count = 0


def apply(op: LinearOperatorHandle, v: Vector) -> Vector:
    """Apply op to v, checking the domain dimension."""
    return op.apply(v)


def estimate_spectral_norm(
    op: LinearOperatorHandle, tol: float = 1e-9, max_iters: int = 10000, seed: int = 0
) -> SpectralNormEstimate:
    """
    Estimate ||L|| by power iteration on L*L.

    The start vector is all-ones plus seeded jitter, so results are reproducible.
    Convergence is declared when the Rayleigh quotient of L*L changes by at most
    ``tol`` relative to its value.

    Args:
        op: Operator to measure
        tol: Relative tolerance on the eigenvalue estimate
        max_iters: Iteration cap
        seed: Seed for the start-vector jitter

    Returns:
        SpectralNormEstimate; ``converged`` is False when the cap was hit
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")

    rng = np.random.default_rng(seed)
    v = np.ones(op.cols) + 0.1 * rng.standard_normal(op.cols)
    v /= np.linalg.norm(v)

    eigenvalue = 0.0
    for iteration in range(1, max_iters + 1):
        w = op.adjoint(op.apply(v))
        w_norm = float(np.linalg.norm(w))
        if w_norm == 0.0:
            return SpectralNormEstimate(value=0.0, iterations=iteration, converged=True)

        rayleigh = float(v @ w)
        if abs(rayleigh - eigenvalue) <= tol * abs(rayleigh):
            return SpectralNormEstimate(
                value=float(np.sqrt(rayleigh)), iterations=iteration, converged=True
            )

        eigenvalue = rayleigh
        v = w / w_norm

    logger.warning(
        f"Power iteration on {op.label} did not reach tol={tol} in {max_iters} iterations"
    )
    return SpectralNormEstimate(
        value=float(np.sqrt(max(eigenvalue, 0.0))), iterations=max_iters, converged=False
    )


def solve_extrapolation_weights(
    R: Optional[MatrixLike], xi: float, gram: Optional[np.ndarray] = None
) -> ExtrapolationWeights:
    """
    Solve min ||R a||^2 + xi ||R^T R||_F ||a||^2 subject to 1^T a = 1.

    Args:
        R: Residual matrix with one column per history entry (dim x (m+1))
        xi: Tikhonov regularization parameter
        gram: Precomputed R^T R; when given, R is not touched

    Returns:
        ExtrapolationWeights; ``degenerate`` marks the e_last fallback
    """
    if gram is not None:
        return solve_weights_from_gram(gram, xi)

    R = np.asarray(R, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    if R.ndim != 2 or R.shape[1] == 0:
        raise DimensionMismatchError("Residual matrix needs at least one column")
    return solve_weights_from_gram(R.T @ R, xi)


def solve_weights_from_gram(gram: np.ndarray, xi: float) -> ExtrapolationWeights:
    """
    Same problem as :func:`solve_extrapolation_weights`, given G = R^T R.

    The Gram matrix is normalised by its Frobenius norm first; the weights do not
    depend on the scale of R. The normal-equation KKT form z = (G + xi I)^{-1} 1,
    a = z / 1^T z is tried first; when that system is singular or ill-conditioned
    the bordered KKT system is solved instead, and only when both fail does the
    e_last fallback apply.
    """
    if not np.isfinite(xi) or xi < 0:
        raise ValueError(f"xi must be finite and nonnegative, got {xi}")

    gram = np.asarray(gram, dtype=float)
    k = gram.shape[0]
    if k == 0:
        raise DimensionMismatchError("Residual matrix needs at least one column")
    if k == 1:
        return ExtrapolationWeights(alpha=np.ones(1))

    scale = float(np.linalg.norm(gram, "fro"))
    if not np.isfinite(scale) or scale == 0.0:
        return ExtrapolationWeights.latest_only(k)

    system = gram / scale + xi * np.eye(k)

    alpha = _solve_normal_equations(system)
    if alpha is not None:
        return ExtrapolationWeights(alpha=alpha)

    alpha = _solve_bordered(system)
    if alpha is not None:
        return ExtrapolationWeights(alpha=alpha, bordered=True)

    logger.debug(f"Extrapolation least squares degenerate for {k} columns")
    return ExtrapolationWeights.latest_only(k)


def _solve_normal_equations(system: np.ndarray) -> Optional[Vector]:
    ones = np.ones(system.shape[0])
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            z = scipy.linalg.solve(system, ones, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError):
            return None

    total = float(z.sum())
    if not np.all(np.isfinite(z)) or abs(total) < 1e-14:
        return None
    return z / total


def _solve_bordered(system: np.ndarray) -> Optional[Vector]:
    k = system.shape[0]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = system
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0

    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            solution = scipy.linalg.solve(kkt, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError):
            return None

    alpha = solution[:k]
    total = float(alpha.sum())
    if not np.all(np.isfinite(alpha)) or abs(total - 1.0) > 1e-8:
        return None
    return alpha / total

"""
Resolvent and cocoercive building blocks.

The SVM problem uses the l1 prox that leaves the trailing bias coordinate alone
and the resolvent of the hinge-loss conjugate. Generic factories (identity,
scaled identity, affine, linear cocoercive) serve small test problems.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import numpy as np
import scipy.sparse as sp

from .models import Vector


logger = logging.getLogger(__name__)


class OperatorError(ValueError):
    """Raised for invalid operator parameters (negative threshold, non-positive step)."""

    pass


class LabeledDataset(Protocol):
    """Anything with a sample-by-feature matrix ``theta`` and labels ``phi``."""

    theta: sp.csr_matrix
    phi: np.ndarray


@dataclass(frozen=True)
class ResolventOperator:
    """Resolvent J_{step A}(v) = (I + step A)^{-1} v of a maximal monotone A."""

    evaluate: Callable[[Vector, float], Vector]
    descriptor: str

    def __call__(self, v: Vector, step: float) -> Vector:
        if step <= 0:
            raise OperatorError(f"{self.descriptor}: step must be positive, got {step}")
        return self.evaluate(v, step)


@dataclass(frozen=True)
class CocoerciveOperator:
    """Single-valued 1/beta-cocoercive operator; beta = 0 only for the zero map."""

    evaluate: Callable[[Vector], Vector]
    beta: float = 0.0
    is_zero: bool = False
    descriptor: str = "cocoercive"

    def __post_init__(self):
        if self.beta < 0:
            raise OperatorError(f"beta must be nonnegative, got {self.beta}")
        if self.beta == 0 and not self.is_zero:
            raise OperatorError("beta = 0 is reserved for the zero operator")

    def __call__(self, x: Vector) -> Vector:
        return self.evaluate(x)


def prox_l1_skip_last(v: Vector, theta: float) -> Vector:
    """Soft-threshold every entry but the last by ``theta``; the last entry is the bias."""
    if theta < 0:
        raise OperatorError(f"Threshold must be nonnegative, got {theta}")
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] < 1:
        raise OperatorError("prox_l1_skip_last needs a nonempty vector")

    out = np.empty_like(v)
    head = v[:-1]
    out[:-1] = np.sign(head) * np.maximum(np.abs(head) - theta, 0.0)
    out[-1] = v[-1]
    return out


def resolvent_hinge_conjugate(v: Vector, sigma: float) -> Vector:
    """prox of sigma * f* for f(y) = sum max(0, 1 - y_i): clip(v - sigma, -1, 0)."""
    if sigma <= 0:
        raise OperatorError(f"sigma must be positive, got {sigma}")
    return np.clip(np.asarray(v, dtype=float) - sigma, -1.0, 0.0)


def objective_value(w: Vector, b: float, dataset: LabeledDataset, delta: float) -> float:
    """
    l1-regularized hinge objective sum max(0, 1 - phi_i (w^T theta_i + b)) + delta ||w||_1.

    Args:
        w: Feature weights (length d)
        b: Bias
        dataset: Samples and labels
        delta: Regularization weight

    Returns:
        Objective value
    """
    w = np.asarray(w, dtype=float)
    if w.shape[0] != dataset.theta.shape[1]:
        raise OperatorError(
            f"Weight vector has {w.shape[0]} entries, dataset has {dataset.theta.shape[1]} features"
        )
    margins = dataset.phi * (dataset.theta @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(hinge.sum() + delta * np.abs(w).sum())


def l1_resolvent(delta: float) -> ResolventOperator:
    """Resolvent of A = d(delta ||w||_1) with the bias unregularized."""
    if delta < 0:
        raise OperatorError(f"delta must be nonnegative, got {delta}")
    return ResolventOperator(
        evaluate=lambda v, step: prox_l1_skip_last(v, step * delta),
        descriptor=f"l1 prox (delta={delta})",
    )


def hinge_conjugate_resolvent() -> ResolventOperator:
    return ResolventOperator(evaluate=resolvent_hinge_conjugate, descriptor="hinge conjugate")


def identity_resolvent() -> ResolventOperator:
    """Resolvent of A = 0."""
    return ResolventOperator(
        evaluate=lambda v, step: np.array(v, dtype=float), descriptor="identity"
    )


def scaled_identity_resolvent(c: float) -> ResolventOperator:
    """Resolvent of A = c * Id, c >= 0."""
    if c < 0:
        raise OperatorError(f"Scale must be nonnegative, got {c}")
    return ResolventOperator(
        evaluate=lambda v, step: np.asarray(v, dtype=float) / (1.0 + step * c),
        descriptor=f"scaled identity (c={c})",
    )


def affine_resolvent(Q: np.ndarray, q: Optional[Vector] = None) -> ResolventOperator:
    """
    Resolvent of the affine monotone map A x = Q x + q.

    Q must be monotone (Q + Q^T positive semidefinite); it need not be symmetric.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if Q.shape != (n, n):
        raise OperatorError(f"Affine operator matrix must be square, got {Q.shape}")
    if np.linalg.eigvalsh(0.5 * (Q + Q.T)).min() < -1e-12 * max(1.0, np.abs(Q).max()):
        raise OperatorError("Affine operator is not monotone")
    offset = np.zeros(n) if q is None else np.asarray(q, dtype=float)
    identity = np.eye(n)

    def evaluate(v: Vector, step: float) -> Vector:
        return np.linalg.solve(identity + step * Q, np.asarray(v, dtype=float) - step * offset)

    return ResolventOperator(evaluate=evaluate, descriptor="affine")


def zero_operator() -> CocoerciveOperator:
    return CocoerciveOperator(
        evaluate=lambda x: np.zeros_like(x, dtype=float),
        beta=0.0,
        is_zero=True,
        descriptor="zero",
    )


def linear_cocoercive(Q: np.ndarray, q: Optional[Vector] = None) -> CocoerciveOperator:
    """C x = Q x + q for symmetric positive semidefinite Q; beta = lambda_max(Q)."""
    Q = np.asarray(Q, dtype=float)
    if not np.allclose(Q, Q.T):
        raise OperatorError("Cocoercive linear part must be symmetric")
    eigenvalues = np.linalg.eigvalsh(Q)
    if eigenvalues.min() < -1e-12 * max(1.0, abs(eigenvalues).max()):
        raise OperatorError("Cocoercive linear part must be positive semidefinite")
    offset = np.zeros(Q.shape[0]) if q is None else np.asarray(q, dtype=float)
    beta = float(eigenvalues.max())
    if beta <= 0 and not offset.any():
        return zero_operator()
    if beta <= 0:
        raise OperatorError("A constant nonzero map is not cocoercive with beta = 0")
    return CocoerciveOperator(
        evaluate=lambda x: Q @ x + offset, beta=beta, descriptor="linear cocoercive"
    )

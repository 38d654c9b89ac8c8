"""
Regularized Anderson acceleration.

``ResidualHistory`` keeps the sliding window of residuals and the iterates they
belong to, together with an incrementally maintained Gram matrix. The same
window serves RAA (r_j = y_j - x_j) and the DWIFOB policies (r_j = x_{j+1} - y_j);
the caller picks the convention.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, List, Optional, Tuple

import numpy as np

from .linalg import DimensionMismatchError, solve_weights_from_gram
from .models import ExtrapolationWeights, RunStatus, StoppingRule, Vector


logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e8


class RankDeficientError(ValueError):
    """Raised when residual differences are not of full column rank."""

    pass


class ResidualHistory:
    """
    Ring of the m_n + 1 most recent (residual, snapshot) pairs, oldest first.

    Entries are stored by reference; callers must not modify pushed arrays.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"History capacity must be at least 1, got {capacity}")
        self.capacity = capacity
        self._residuals: Deque[Vector] = deque(maxlen=capacity + 1)
        self._snapshots: Deque[Vector] = deque(maxlen=capacity + 1)
        self._gram = np.zeros((0, 0))
        self.pushes = 0

    def __len__(self) -> int:
        return len(self._residuals)

    @property
    def depth(self) -> int:
        """m_n, the number of retained entries minus one."""
        return len(self._residuals) - 1

    @property
    def dim(self) -> Optional[int]:
        return int(self._residuals[0].shape[0]) if self._residuals else None

    def push(self, residual: Vector, snapshot: Vector) -> None:
        """Append a pair, evicting the oldest beyond capacity."""
        residual = np.asarray(residual, dtype=float)
        snapshot = np.asarray(snapshot, dtype=float)
        if residual.ndim != 1 or snapshot.shape != residual.shape:
            raise DimensionMismatchError(
                f"Residual {residual.shape} and snapshot {snapshot.shape} must be matching vectors"
            )
        if self._residuals and residual.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"History holds vectors of length {self.dim}, got {residual.shape[0]}"
            )

        if len(self._residuals) == self._residuals.maxlen:
            self._gram = self._gram[1:, 1:]
        self._residuals.append(residual)
        self._snapshots.append(snapshot)

        # new row/column of R^T R
        row = np.array([float(r @ residual) for r in self._residuals])
        k = row.shape[0]
        gram = np.empty((k, k))
        gram[: k - 1, : k - 1] = self._gram
        gram[k - 1, :] = row
        gram[:, k - 1] = row
        self._gram = gram
        self.pushes += 1

    def clear(self) -> None:
        self._residuals.clear()
        self._snapshots.clear()
        self._gram = np.zeros((0, 0))

    def residual_matrix(self) -> np.ndarray:
        return np.column_stack(list(self._residuals))

    def snapshot_matrix(self) -> np.ndarray:
        return np.column_stack(list(self._snapshots))

    def gram(self) -> np.ndarray:
        return self._gram.copy()

    @property
    def latest_residual(self) -> Vector:
        return self._residuals[-1]

    @property
    def latest_snapshot(self) -> Vector:
        return self._snapshots[-1]

    def weights(self, xi: float) -> ExtrapolationWeights:
        if not self._residuals:
            raise ValueError("Cannot extrapolate from an empty history")
        return solve_weights_from_gram(self._gram, xi)

    def combine(self, alpha: Vector) -> Vector:
        """sum_i alpha_i * snapshot_i."""
        if len(alpha) != len(self._snapshots):
            raise DimensionMismatchError(
                f"{len(alpha)} weights for {len(self._snapshots)} snapshots"
            )
        out = np.zeros_like(self._snapshots[0])
        for a, s in zip(alpha, self._snapshots):
            out += a * s
        return out


@dataclass
class RaaTrace:
    """Outcome of a regularized Anderson run."""

    y: Vector
    iterations: int
    status: RunStatus
    residual_norms: List[float] = field(default_factory=list)
    degenerate_count: int = 0
    divergence_threshold: float = float("inf")

    @property
    def diverged(self) -> bool:
        return self.status is RunStatus.DIVERGED


def raa_step(
    history: ResidualHistory, T_output: Vector, xi: float
) -> Tuple[Vector, ExtrapolationWeights]:
    """
    Extrapolated point sum alpha_i x_i over the retained T-outputs.

    ``T_output`` is the most recent T(y_n), already pushed as the latest snapshot;
    it is returned as is when the weights are degenerate.
    """
    weights = history.weights(xi)
    if weights.degenerate:
        return np.array(T_output, dtype=float), weights
    return history.combine(weights.alpha), weights


def run_raa(
    T: Callable[[Vector], Vector],
    y0: Vector,
    m: int,
    xi: float,
    stopping: Optional[StoppingRule] = None,
    divergence_factor: float = DIVERGENCE_FACTOR,
) -> RaaTrace:
    """
    Regularized Anderson acceleration of the fixed-point map T.

    Divergence is a normal outcome: the run stops with status DIVERGED when
    ||r_n|| exceeds divergence_factor * (1 + ||r_0||) or turns non-finite.

    Args:
        T: Fixed-point map
        y0: Starting point
        m: Memory
        xi: Tikhonov regularization of the weight least squares
        stopping: Cap, tolerance on ||r_n|| and observer (called with y_n)
        divergence_factor: Multiplier of the divergence threshold

    Returns:
        RaaTrace with the final extrapolated point
    """
    stopping = stopping or StoppingRule()
    history = ResidualHistory(m)
    y = np.array(y0, dtype=float)
    trace = RaaTrace(y=y, iterations=0, status=RunStatus.MAX_ITERS)

    if stopping.observer is not None and stopping.observer(0, y, None):
        trace.status = RunStatus.STOPPED
        return trace

    threshold = np.inf
    for n in range(stopping.max_iters):
        x = T(y)
        r = y - x
        r_norm = float(np.linalg.norm(r))
        if n == 0:
            threshold = divergence_factor * (1.0 + r_norm)
            trace.divergence_threshold = threshold

        if not np.isfinite(r_norm) or r_norm > threshold:
            trace.status = RunStatus.DIVERGED
            logger.warning(f"RAA diverged at iteration {n}: ||r|| = {r_norm:.3e}")
            break
        trace.residual_norms.append(r_norm)
        if stopping.tol is not None and r_norm <= stopping.tol:
            trace.status = RunStatus.CONVERGED
            break

        history.push(r, x)
        y_next, weights = raa_step(history, x, xi)
        if weights.degenerate and history.depth > 0:
            trace.degenerate_count += 1
        if not np.all(np.isfinite(y_next)):
            trace.status = RunStatus.DIVERGED
            logger.warning(f"RAA produced a non-finite extrapolation at iteration {n}")
            break

        y = y_next
        trace.iterations = n + 1
        if stopping.should_log(n + 1):
            logger.debug(f"RAA iteration {n + 1}: ||r|| = {r_norm:.3e}, depth {history.depth}")
        if stopping.observer is not None and stopping.observer(n + 1, y, None):
            trace.status = RunStatus.STOPPED
            break

    trace.y = y
    if trace.degenerate_count:
        logger.warning(f"RAA used the no-extrapolation fallback {trace.degenerate_count} times")
    return trace


def quasi_newton_extrapolate(history: ResidualHistory, y_n: Vector, r_n: Vector) -> Vector:
    """
    Unregularized Anderson step in multisecant form y_n - G_n r_n.

    G_n = I + (dY - dR)(dR^T dR)^{-1} dR^T with dR, dY the column differences of
    the residual and y = x + r windows (RAA convention r = y - x).

    Raises:
        RankDeficientError: If dR does not have full column rank
    """
    R = history.residual_matrix()
    Y = history.snapshot_matrix() + R
    dR = np.diff(R, axis=1)
    dY = np.diff(Y, axis=1)
    if dR.shape[1] == 0:
        return y_n - r_n
    if np.linalg.matrix_rank(dR) < dR.shape[1]:
        raise RankDeficientError(f"Residual differences have rank below {dR.shape[1]}")

    omega, *_ = np.linalg.lstsq(dR, r_n, rcond=None)
    return y_n - (r_n + (dY - dR) @ omega)


def alpha_to_omega(alpha: Vector) -> Vector:
    """omega_i = sum_{j <= i} alpha_j for i < m_n."""
    return np.cumsum(alpha)[:-1]


def omega_to_alpha(omega: Vector) -> Vector:
    """Inverse of :func:`alpha_to_omega` under sum(alpha) = 1."""
    omega = np.asarray(omega, dtype=float)
    return np.diff(np.concatenate([[0.0], omega, [1.0]]))

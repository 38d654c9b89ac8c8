"""
Forward-backward splitting with deviations.

The engine computes p_n = J(y_n - gamma_n C y_n), relaxes to x_{n+1}, asks a
deviation policy for a direction and enforces the norm condition
||u_{n+1}||_M^2 <= zeta_n^2 l_n^2 itself, so any policy yields a convergent
scheme under the parameter bounds checked by ``validate_params``.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .linalg import DimensionMismatchError
from .models import (
    FbState,
    FbTrace,
    IterationInfo,
    ParameterSchedule,
    RunStatus,
    StoppingRule,
    Vector,
)
from .operators import CocoerciveOperator, ResolventOperator


logger = logging.getLogger(__name__)

# Relative slack allowed on the norm condition after rescaling
NORM_CONDITION_SLACK = 1e-12


class ParameterError(ValueError):
    """Raised when step, relaxation or deviation parameters leave the admissible region."""

    pass


class MetricError(ValueError):
    """Raised when a metric is not symmetric and strongly positive."""

    pass


class SolverDivergenceError(RuntimeError):
    """Raised when an iterate stops being finite."""

    def __init__(self, iteration: int, quantity: str):
        self.iteration = iteration
        self.quantity = quantity
        super().__init__(f"Non-finite {quantity} at iteration {iteration}")


class MetricHandle:
    """Inner product <u, v>_M of a strongly positive self-adjoint M."""

    def __init__(self, inner: Callable[[Vector, Vector], float], rho: float, label: str = "metric"):
        if rho <= 0:
            raise MetricError(f"{label}: strong positivity constant must be positive, got {rho}")
        self.inner = inner
        self.rho = rho
        self.label = label

    def norm_sq(self, u: Vector) -> float:
        return float(self.inner(u, u))

    def norm(self, u: Vector) -> float:
        return float(np.sqrt(max(self.norm_sq(u), 0.0)))

    @classmethod
    def euclidean(cls) -> "MetricHandle":
        return cls(inner=lambda u, v: float(np.dot(u, v)), rho=1.0, label="euclidean")

    @classmethod
    def from_matrix(cls, M: np.ndarray) -> "MetricHandle":
        """Metric of a dense symmetric positive definite matrix."""
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise MetricError(f"Metric matrix must be square, got shape {M.shape}")
        if not np.allclose(M, M.T, rtol=1e-12, atol=1e-14):
            raise MetricError("Metric matrix is not symmetric")
        rho = float(np.linalg.eigvalsh(M).min())
        if rho <= 0:
            raise MetricError(f"Metric matrix is not positive definite (min eigenvalue {rho:.3e})")
        return cls(inner=lambda u, v: float(u @ (M @ v)), rho=rho, label="matrix")

    @classmethod
    def from_inner(
        cls,
        inner: Callable[[Vector, Vector], float],
        dim: int,
        samples: int = 64,
        seed: int = 0,
    ) -> "MetricHandle":
        """
        Wrap an arbitrary inner product, checking symmetry and positivity on samples.

        The positivity constant is the smallest sampled ratio ||u||_M^2 / ||u||^2.
        """
        rng = np.random.default_rng(seed)
        rho = np.inf
        for _ in range(samples):
            u = rng.standard_normal(dim)
            v = rng.standard_normal(dim)
            uv, vu = inner(u, v), inner(v, u)
            if abs(uv - vu) > 1e-10 * (1.0 + abs(uv)):
                raise MetricError("Inner product is not symmetric on sampled vectors")
            rho = min(rho, inner(u, u) / float(u @ u))
        if not rho > 0:
            raise MetricError(f"Inner product is not strongly positive (sampled rho {rho:.3e})")
        return cls(inner=inner, rho=float(rho), label="sampled")


@dataclass(frozen=True)
class InclusionProblem:
    """0 in A x + C x, given through the resolvent of A and the forward map C."""

    resolvent: ResolventOperator
    forward: CocoerciveOperator


@dataclass
class DeviationContext:
    """What a policy sees when asked for the next deviation direction."""

    n: int
    x: Vector
    x_next: Vector
    y: Vector
    p: Vector
    u: Vector
    ell_sq: float
    zeta: float
    metric: MetricHandle


class DeviationPolicy(ABC):
    """Proposes candidate deviations; the engine enforces the norm condition."""

    def reset(self) -> None:
        """Forget per-run state before a new run."""
        pass

    @abstractmethod
    def propose(self, context: DeviationContext) -> Vector:
        pass


class ZeroDeviation(DeviationPolicy):
    """Plain relaxed forward-backward splitting."""

    def propose(self, context: DeviationContext) -> Vector:
        return np.zeros_like(context.x_next)


class MomentumDeviation(DeviationPolicy):
    """Inertial direction x_{n+1} - x_n."""

    def propose(self, context: DeviationContext) -> Vector:
        return context.x_next - context.x


def validate_params(schedule: ParameterSchedule, horizon: int) -> List[str]:
    """
    Check the step, relaxation and deviation bounds for n = 0..horizon.

    Args:
        schedule: Parameter sequences to check
        horizon: Last index to check (inclusive)

    Returns:
        Human-readable violations; empty when the schedule is admissible
    """
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")

    violations = []
    eps = schedule.epsilon
    beta = schedule.beta
    eps_upper = min(1.0, 4.0 / (3.0 + beta))
    if not 0 < eps < eps_upper:
        violations.append(f"epsilon={eps} outside (0, {eps_upper:g})")

    gamma_upper = np.inf if beta == 0 else (4.0 - 3.0 * eps) / beta
    for n in range(horizon + 1):
        gamma, lam, zeta = schedule.at(n)
        if not eps <= gamma <= gamma_upper:
            violations.append(f"n={n}: gamma={gamma} outside [{eps}, {gamma_upper:g}]")
        lam_upper = 2.0 - gamma * beta / 2.0 - eps / 2.0
        if not eps <= lam <= lam_upper:
            violations.append(f"n={n}: lambda={lam} outside [{eps}, {lam_upper:g}]")
        if not 0 <= zeta <= 1.0 - eps:
            violations.append(f"n={n}: zeta={zeta} outside [0, {1.0 - eps:g}]")

    return violations


def relax(x: Vector, y: Vector, p: Vector, lam: float) -> Vector:
    """x + lam (p - y); a unit step is evaluated as p + (x - y)."""
    if lam == 1.0:
        return p + (x - y)
    return x + lam * (p - y)


def fb_step(
    state: FbState,
    resolvent: ResolventOperator,
    forward: CocoerciveOperator,
    gamma_n: float,
    lambda_n: float,
) -> Tuple[Vector, Vector]:
    """
    One forward-backward step from y_n, relaxed from x_n.

    ``resolvent`` and ``forward`` are expressed in the metric's coordinates, so
    (M + gamma A)^{-1}(M - gamma C) is the composition used here.

    Returns:
        (p_n, x_{n+1})
    """
    y = state.y
    w = y if forward.is_zero else y - gamma_n * forward(y)
    p = resolvent(w, gamma_n)
    return p, relax(state.x, y, p, lambda_n)


def budget_coefficients(
    gamma_n: float, gamma_next: float, lambda_n: float, lambda_next: float, beta: float
) -> Tuple[float, float]:
    """
    Leading factor and inner coefficient of the deviation budget.

    Returns:
        (lambda_n a b / (4 lambda_{n+1}), (2 lambda_n + gamma_n beta - 2) / a)
        with a = 4 - 2 lambda_n - gamma_n beta, b = 4 - 2 lambda_{n+1} - gamma_{n+1} beta
    """
    a = 4.0 - 2.0 * lambda_n - gamma_n * beta
    b = 4.0 - 2.0 * lambda_next - gamma_next * beta
    if lambda_n <= 0 or lambda_next <= 0:
        raise ParameterError(f"Relaxation must be positive, got {lambda_n}, {lambda_next}")
    if a <= 0 or b <= 0:
        raise ParameterError(
            f"Budget factors must be positive (4 - 2 lambda - gamma beta = {a:g}, {b:g})"
        )
    scale = lambda_n * a * b / (4.0 * lambda_next)
    inner = (2.0 * lambda_n + gamma_n * beta - 2.0) / a
    return scale, inner


def deviation_budget(
    p_n: Vector,
    x_n: Vector,
    u_n: Vector,
    metric: MetricHandle,
    gamma_n: float,
    gamma_next: float,
    lambda_n: float,
    lambda_next: float,
    beta: float,
) -> float:
    """Squared budget l_n^2 of the norm condition, clamped at 0."""
    scale, inner = budget_coefficients(gamma_n, gamma_next, lambda_n, lambda_next, beta)
    v = p_n - x_n
    if inner != 0.0:
        v = v + inner * u_n
    return max(0.0, scale * metric.norm_sq(v))


def enforce_norm_condition(
    u_hat: Vector, bound_sq: float, metric: MetricHandle
) -> Tuple[Vector, float]:
    """
    Accept u_hat if ||u_hat||_M^2 <= bound_sq, otherwise rescale it onto the bound.

    Returns:
        (u, ||u||_M^2)
    """
    norm_sq = metric.norm_sq(u_hat)
    if norm_sq <= bound_sq:
        return u_hat, norm_sq
    factor = float(np.sqrt(bound_sq / norm_sq))
    u = factor * u_hat
    return u, metric.norm_sq(u)


def check_finite(n: int, **quantities: Vector) -> None:
    for name, value in quantities.items():
        if not np.all(np.isfinite(value)):
            raise SolverDivergenceError(n, name)


def run_fb_with_deviations(
    problem: InclusionProblem,
    x0: Vector,
    policy: DeviationPolicy,
    schedule: ParameterSchedule,
    metric: MetricHandle,
    stopping: Optional[StoppingRule] = None,
) -> FbTrace:
    """
    Run forward-backward splitting with policy-driven deviations.

    Args:
        problem: Resolvent of A and forward map C
        x0: Starting point (u_0 = 0, so y_0 = x0)
        policy: Source of candidate deviations
        schedule: gamma, lambda, zeta sequences and beta
        metric: Metric in which the norm condition is measured
        stopping: Iteration cap, tolerance on ||p_n - y_n|| and observer

    Returns:
        FbTrace with the final iterates, status and per-iteration diagnostics

    Raises:
        SolverDivergenceError: If an iterate becomes non-finite
        ParameterError: If the budget coefficients are not positive
    """
    stopping = stopping or StoppingRule()
    x = np.array(x0, dtype=float)
    y = x.copy()
    u = np.zeros_like(x)
    policy.reset()

    trace = FbTrace(x=x, y=y, iterations=0, status=RunStatus.MAX_ITERS)
    if stopping.keep_iterates:
        trace.states.append(FbState(x=x, y=y, u=u, n=0))
    if stopping.observer is not None and stopping.observer(0, x, None):
        trace.status = RunStatus.STOPPED
        return trace

    for n in range(stopping.max_iters):
        gamma_n, lambda_n, zeta_n = schedule.at(n)
        gamma_next, lambda_next, _ = schedule.at(n + 1)

        state = FbState(x=x, y=y, u=u, n=n)
        p, x_next = fb_step(state, problem.resolvent, problem.forward, gamma_n, lambda_n)
        check_finite(n, p=p, x_next=x_next)

        ell_sq = deviation_budget(
            p, x, u, metric, gamma_n, gamma_next, lambda_n, lambda_next, schedule.beta
        )
        context = DeviationContext(
            n=n, x=x, x_next=x_next, y=y, p=p, u=u, ell_sq=ell_sq, zeta=zeta_n, metric=metric
        )
        u_hat = np.asarray(policy.propose(context), dtype=float)
        if u_hat.shape != x_next.shape:
            raise DimensionMismatchError(
                f"Deviation has shape {u_hat.shape}, iterate has {x_next.shape}"
            )

        bound_sq = zeta_n * zeta_n * ell_sq
        u_next, u_norm_sq = enforce_norm_condition(u_hat, bound_sq, metric)
        assert u_norm_sq <= bound_sq + NORM_CONDITION_SLACK * max(1.0, bound_sq)
        y_next = x_next + u_next
        check_finite(n, u=u_next)

        info = IterationInfo(
            n=n + 1,
            ell_sq=ell_sq,
            deviation_norm_sq=u_norm_sq,
            slack=bound_sq - u_norm_sq,
            residual_norm=float(np.linalg.norm(p - y)),
        )
        trace.infos.append(info)
        if stopping.keep_iterates:
            trace.states.append(FbState(x=x_next, y=y_next, u=u_next, n=n + 1, p=p))

        x, y, u = x_next, y_next, u_next
        trace.iterations = n + 1
        if stopping.should_log(n + 1):
            logger.debug(
                f"FB iteration {n + 1}: ||p - y|| = {info.residual_norm:.3e}, "
                f"l^2 = {ell_sq:.3e}, ||u||^2 = {u_norm_sq:.3e}"
            )

        if stopping.observer is not None and stopping.observer(n + 1, x, info):
            trace.status = RunStatus.STOPPED
            break
        if stopping.tol is not None and info.residual_norm <= stopping.tol:
            trace.status = RunStatus.CONVERGED
            break

    trace.x, trace.y = x, y
    logger.debug(f"FB run finished after {trace.iterations} iterations ({trace.status.value})")
    return trace

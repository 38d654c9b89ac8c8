"""
Primal-dual DWIFOB and the Chambolle-Pock baseline.

Problems have the form 0 in A x + L* B (L x) + C x. Iterates live in the product
space z = (x, mu) with the metric

    M = [[I, -tau L*], [-tau L, (tau / sigma) I]],

which is strongly positive whenever sigma tau ||L||^2 < 1. In recursive mode the
images L x_{n+1}, L x_hat_n and L u_hat_n are carried forward by linear updates so
each iteration after the first applies L and L* exactly once.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Optional, Tuple, Union

import numpy as np

from .anderson import ResidualHistory
from .dwifob import deviation_scale, dwifob_candidate
from .fb_core import (
    MetricError,
    MetricHandle,
    NORM_CONDITION_SLACK,
    ParameterError,
    budget_coefficients,
    check_finite,
    relax,
)
from .linalg import LinearOperatorHandle, estimate_spectral_norm
from .models import (
    DwifobConfig,
    EvaluationMode,
    IterationInfo,
    PdTrace,
    PrimalDualPoint,
    RunStatus,
    StoppingRule,
    Vector,
)
from .operators import CocoerciveOperator, ResolventOperator, zero_operator


logger = logging.getLogger(__name__)

STEP_FACTOR = 0.99
CACHE_DRIFT_THRESHOLD = 1e-6


def pd_metric_norm_sq(u_x: Vector, u_mu: Vector, L_u_x: Vector, tau: float, sigma: float) -> float:
    """||u_x||^2 + (tau/sigma) ||u_mu||^2 - 2 tau <u_mu, L u_x>; not clamped."""
    return float(u_x @ u_x + (tau / sigma) * (u_mu @ u_mu) - 2.0 * tau * (u_mu @ L_u_x))


class PdMetric:
    """The block metric M for step sizes (tau, sigma) and coupling operator L."""

    def __init__(self, tau: float, sigma: float, L: LinearOperatorHandle, norm_L: float):
        if tau <= 0 or sigma <= 0:
            raise MetricError(f"Step sizes must be positive, got tau={tau}, sigma={sigma}")
        if sigma * tau * norm_L**2 >= 1.0:
            raise MetricError(
                f"sigma tau ||L||^2 = {sigma * tau * norm_L ** 2:.6f} must be below 1"
            )
        self.tau = float(tau)
        self.sigma = float(sigma)
        self.L = L
        self.norm_L = float(norm_L)

    @classmethod
    def from_operator(
        cls,
        L: LinearOperatorHandle,
        step_rule: str = "over_norm",
        tol: float = 1e-9,
        seed: int = 0,
    ) -> "PdMetric":
        """
        Pick tau = sigma from an estimate of ||L||.

        Args:
            L: Coupling operator
            step_rule: "over_norm" for 0.99/||L|| or "over_norm_sq" for 0.99/||L||^2
            tol: Power-iteration tolerance
            seed: Power-iteration seed

        Raises:
            MetricError: If the chosen rule violates sigma tau ||L||^2 < 1
        """
        estimate = estimate_spectral_norm(L, tol=tol, seed=seed)
        # estimate is from below; a relative margin keeps the strict bound
        norm_L = estimate.value * (1.0 + 10.0 * tol)
        if norm_L == 0.0:
            step = STEP_FACTOR
        elif step_rule == "over_norm":
            step = STEP_FACTOR / norm_L
        elif step_rule == "over_norm_sq":
            step = STEP_FACTOR / norm_L**2
        else:
            raise ValueError(f"Unknown step rule: {step_rule}")

        logger.info(f"||L|| ~ {estimate.value:.10g} ({estimate.iterations} power iterations)")
        return cls(tau=step, sigma=step, L=L, norm_L=norm_L)

    @property
    def coupling(self) -> float:
        """sigma tau ||L||^2."""
        return self.sigma * self.tau * self.norm_L**2

    def norm_sq(self, u_x: Vector, u_mu: Vector, L_u_x: Optional[Vector] = None) -> float:
        if L_u_x is None:
            L_u_x = self.L.apply(u_x)
        return pd_metric_norm_sq(u_x, u_mu, L_u_x, self.tau, self.sigma)

    def point_norm_sq(self, z: PrimalDualPoint) -> float:
        return self.norm_sq(z.x, z.mu)

    def distance(self, a: PrimalDualPoint, b: PrimalDualPoint) -> float:
        """||a - b||_M."""
        return float(np.sqrt(max(self.point_norm_sq(a - b), 0.0)))

    def dense_matrix(self) -> np.ndarray:
        """M assembled densely; for small operators only."""
        L = self.L.to_dense()
        rows, cols = L.shape
        top = np.hstack([np.eye(cols), -self.tau * L.T])
        bottom = np.hstack([-self.tau * L, (self.tau / self.sigma) * np.eye(rows)])
        return np.vstack([top, bottom])

    def as_metric_handle(self) -> MetricHandle:
        """The same metric on stacked vectors (x, mu)."""
        n_primal = self.L.cols

        def inner(u: Vector, v: Vector) -> float:
            u_x, u_mu = u[:n_primal], u[n_primal:]
            v_x, v_mu = v[:n_primal], v[n_primal:]
            return float(
                u_x @ v_x
                + (self.tau / self.sigma) * (u_mu @ v_mu)
                - self.tau * (u_mu @ self.L.apply(v_x) + v_mu @ self.L.apply(u_x))
            )

        # positivity constant of M
        rho = min(1.0, self.tau / self.sigma) * (1.0 - np.sqrt(self.coupling))
        return MetricHandle(inner=inner, rho=rho, label="primal-dual")


@dataclass(frozen=True)
class PrimalDualProblem:
    """0 in A x + L* B (L x) + C x via the resolvents of A and B^{-1}."""

    L: LinearOperatorHandle
    resolvent_primal: ResolventOperator
    resolvent_dual: ResolventOperator
    C: CocoerciveOperator = field(default_factory=zero_operator)


@dataclass
class RecursiveCache:
    """
    L-images carried between iterations in recursive mode.

    ``L_x_ring`` mirrors the snapshot window of the residual history: it holds
    L x_{j+1} for the retained j, newest last, so its last entry is L x_{n+1}.
    """

    L_x: Vector
    L_x_hat: Vector
    L_p_x: Optional[Vector] = None
    L_u_hat_x: Optional[Vector] = None
    L_x_ring: Deque[Vector] = field(default_factory=deque)

    @classmethod
    def start(cls, L_x0: Vector, capacity: int) -> "RecursiveCache":
        return cls(L_x=L_x0, L_x_hat=L_x0, L_x_ring=deque(maxlen=capacity + 1))

    def vector_count(self) -> int:
        """Distinct dual-sized vectors held (L x_{n+1} is the newest ring entry)."""
        extras = sum(v is not None for v in (self.L_p_x, self.L_u_hat_x))
        ring = len(self.L_x_ring)
        return ring + 1 + extras if ring else 2 + extras

    def combine(self, alpha: Vector) -> Vector:
        out = np.zeros_like(self.L_x_ring[0])
        for a, image in zip(alpha, self.L_x_ring):
            out += a * image
        return out

    def audit(self, L: LinearOperatorHandle, x: Vector, x_hat: Vector) -> float:
        """Largest relative drift of the cached L x and L x_hat against direct products."""
        drift = 0.0
        for cached, point in ((self.L_x, x), (self.L_x_hat, x_hat)):
            direct = L.apply(point)
            drift = max(
                drift, float(np.linalg.norm(cached - direct) / (1.0 + np.linalg.norm(direct)))
            )
        return drift


def cp_step(
    z: PrimalDualPoint,
    resolvent_primal: ResolventOperator,
    resolvent_dual: ResolventOperator,
    metric: PdMetric,
) -> PrimalDualPoint:
    """One Chambolle-Pock iteration."""
    tau, sigma, L = metric.tau, metric.sigma, metric.L
    x_plus = resolvent_primal(z.x - tau * L.adjoint(z.mu), tau)
    mu_plus = resolvent_dual(z.mu + sigma * L.apply(2 * x_plus - z.x), sigma)
    return PrimalDualPoint(x=x_plus, mu=mu_plus)


def pd_resolvent_pair(
    z_hat: PrimalDualPoint,
    problem: PrimalDualProblem,
    metric: PdMetric,
    L_x_hat: Optional[Vector] = None,
) -> Tuple[Vector, Vector, Optional[Vector]]:
    """
    Gauss-Seidel resolvent pair (p_x, p_mu) = (M + tau A)^{-1}(M - tau C) z_hat.

    When ``L_x_hat`` is given, the dual argument is formed from 2 L p_x - L x_hat and
    L p_x is returned as the third element; otherwise L is applied to 2 p_x - x_hat
    and the third element is None.
    """
    tau, sigma, L = metric.tau, metric.sigma, problem.L
    arg = z_hat.x - tau * L.adjoint(z_hat.mu)
    if not problem.C.is_zero:
        arg = arg - tau * problem.C(z_hat.x)
    p_x = problem.resolvent_primal(arg, tau)

    if L_x_hat is None:
        p_mu = problem.resolvent_dual(z_hat.mu + sigma * L.apply(2 * p_x - z_hat.x), sigma)
        return p_x, p_mu, None

    L_p_x = L.apply(p_x)
    p_mu = problem.resolvent_dual(z_hat.mu + sigma * (2 * L_p_x - L_x_hat), sigma)
    return p_x, p_mu, L_p_x


def lyapunov_V(
    z_next: PrimalDualPoint,
    p: PrimalDualPoint,
    z_n: PrimalDualPoint,
    u_n: PrimalDualPoint,
    reference: PrimalDualPoint,
    lambda_n: float,
    metric: PdMetric,
) -> float:
    """
    ||z_{n+1} - z*||_M^2 + lambda (2 - lambda) ||p - z_n + (lambda - 1)/(2 - lambda) u_n||_M^2.

    Raises:
        ParameterError: If lambda_n is outside (0, 2)
    """
    if not 0 < lambda_n < 2:
        raise ParameterError(f"lambda_n must lie in (0, 2), got {lambda_n}")
    distance_sq = metric.point_norm_sq(z_next - reference)
    c = (lambda_n - 1.0) / (2.0 - lambda_n)
    w = p - z_n
    if c != 0.0:
        w = PrimalDualPoint(x=w.x + c * u_n.x, mu=w.mu + c * u_n.mu)
    return distance_sq + lambda_n * (2.0 - lambda_n) * metric.point_norm_sq(w)


def _successive_differences(new: PrimalDualPoint, old: PrimalDualPoint) -> Tuple[float, float]:
    return float(np.linalg.norm(new.x - old.x)), float(np.linalg.norm(new.mu - old.mu))


def run_cp(
    problem: PrimalDualProblem,
    z0: PrimalDualPoint,
    metric: PdMetric,
    stopping: Optional[StoppingRule] = None,
) -> PdTrace:
    """
    Chambolle-Pock iterations until both successive differences are <= stopping.tol.

    C must be zero.
    """
    if not problem.C.is_zero:
        raise ValueError("Chambolle-Pock baseline requires C = 0")
    stopping = stopping or StoppingRule()
    z = PrimalDualPoint(x=np.array(z0.x, dtype=float), mu=np.array(z0.mu, dtype=float))
    trace = PdTrace(z=z, iterations=0, status=RunStatus.MAX_ITERS)

    if stopping.observer is not None and stopping.observer(0, z, None):
        trace.status = RunStatus.STOPPED
        return trace

    for n in range(stopping.max_iters):
        z_next = cp_step(z, problem.resolvent_primal, problem.resolvent_dual, metric)
        check_finite(n, x=z_next.x, mu=z_next.mu)
        trace.last_dx, trace.last_dmu = _successive_differences(z_next, z)
        z = z_next
        trace.iterations = n + 1
        if stopping.should_log(n + 1):
            logger.debug(
                f"CP iteration {n + 1}: dx = {trace.last_dx:.3e}, dmu = {trace.last_dmu:.3e}"
            )

        if stopping.observer is not None and stopping.observer(n + 1, z, None):
            trace.status = RunStatus.STOPPED
            break
        if (
            stopping.tol is not None
            and trace.last_dx <= stopping.tol
            and trace.last_dmu <= stopping.tol
        ):
            trace.status = RunStatus.CONVERGED
            break

    trace.z = z
    return trace


def run_pd_dwifob(
    problem: PrimalDualProblem,
    z0: PrimalDualPoint,
    config: DwifobConfig,
    metric: PdMetric,
    mode: Union[EvaluationMode, str] = EvaluationMode.RECURSIVE,
    stopping: Optional[StoppingRule] = None,
    reference: Optional[PrimalDualPoint] = None,
    audit_period: Optional[int] = None,
) -> PdTrace:
    """
    Primal-dual DWIFOB.

    The step size is tau throughout (the schedule's gamma is not used); lambda and
    zeta come from ``config.schedule``. With zeta = 0 and lambda = 1 the iterates
    coincide with Chambolle-Pock.

    Args:
        problem: Operators of the primal-dual inclusion
        z0: Starting point (u_0 = 0)
        config: Memory, Tikhonov weight, eps_scale and schedule
        metric: Block metric M
        mode: Recursive (cached L-images) or direct evaluation
        stopping: Cap, tolerance on successive differences and observer
        reference: Solution used for the Lyapunov diagnostic V_n
        audit_period: Compare cached images to direct products every k iterations

    Returns:
        PdTrace with per-iteration diagnostics

    Raises:
        SolverDivergenceError: If an iterate becomes non-finite
    """
    mode = EvaluationMode(mode)
    recursive = mode is EvaluationMode.RECURSIVE
    stopping = stopping or StoppingRule()
    tau, sigma, L = metric.tau, metric.sigma, problem.L
    if L.shape != metric.L.shape:
        raise ValueError(
            f"Problem operator {L.shape} does not match metric operator {metric.L.shape}"
        )
    beta = problem.C.beta
    schedule = config.schedule

    x = np.array(z0.x, dtype=float)
    mu = np.array(z0.mu, dtype=float)
    if x.shape[0] != L.cols or mu.shape[0] != L.rows:
        raise ValueError(
            f"Starting point dims ({x.shape[0]}, {mu.shape[0]}) do not fit L {L.shape}"
        )
    n_primal = x.shape[0]
    x_hat, mu_hat = x, mu
    u_x, u_mu = np.zeros_like(x), np.zeros_like(mu)
    history = ResidualHistory(config.m)
    cache = RecursiveCache.start(L.apply(x), config.m) if recursive else None

    trace = PdTrace(z=PrimalDualPoint(x=x, mu=mu), iterations=0, status=RunStatus.MAX_ITERS)
    if stopping.observer is not None and stopping.observer(0, trace.z, None):
        trace.status = RunStatus.STOPPED
        return trace

    for n in range(stopping.max_iters):
        lambda_n, zeta_n = float(schedule.lam(n)), float(schedule.zeta(n))
        lambda_next = float(schedule.lam(n + 1))
        coefficient, inner = budget_coefficients(tau, tau, lambda_n, lambda_next, beta)

        z_hat = PrimalDualPoint(x=x_hat, mu=mu_hat)
        p_x, p_mu, L_p_x = pd_resolvent_pair(
            z_hat, problem, metric, cache.L_x_hat if cache is not None else None
        )
        x_next = relax(x, x_hat, p_x, lambda_n)
        mu_next = relax(mu, mu_hat, p_mu, lambda_n)
        check_finite(n, p_x=p_x, p_mu=p_mu)

        # budget from p - z + c u
        v_x = p_x - x
        v_mu = p_mu - mu
        if inner != 0.0:
            v_x = v_x + inner * u_x
            v_mu = v_mu + inner * u_mu
        if cache is not None:
            L_v_x = L_p_x - cache.L_x
            if inner != 0.0:
                L_v_x = L_v_x + inner * (cache.L_x_hat - cache.L_x)
            L_x_next = relax(cache.L_x, cache.L_x_hat, L_p_x, lambda_n)
        else:
            L_v_x = L.apply(v_x)
        ell_sq = max(0.0, coefficient * pd_metric_norm_sq(v_x, v_mu, L_v_x, tau, sigma))

        stacked_next = np.concatenate([x_next, mu_next])
        history.push(stacked_next - np.concatenate([x_hat, mu_hat]), stacked_next)
        u_hat, weights = dwifob_candidate(history, stacked_next, config.xi)
        if weights.degenerate and history.depth > 0:
            trace.degenerate_count += 1
        u_hat_x, u_hat_mu = u_hat[:n_primal], u_hat[n_primal:]

        if cache is not None:
            cache.L_x_ring.append(L_x_next)
            if weights.degenerate:
                L_u_hat_x = np.zeros_like(L_x_next)
            else:
                L_u_hat_x = L_x_next - cache.combine(weights.alpha)
        else:
            L_u_hat_x = L.apply(u_hat_x)

        u_hat_norm_sq = max(0.0, pd_metric_norm_sq(u_hat_x, u_hat_mu, L_u_hat_x, tau, sigma))
        scale = deviation_scale(ell_sq, zeta_n, config.eps_scale, float(np.sqrt(u_hat_norm_sq)))
        u_x_next = scale * u_hat_x
        u_mu_next = scale * u_hat_mu
        u_norm_sq = scale * scale * u_hat_norm_sq
        bound_sq = zeta_n * zeta_n * ell_sq
        assert u_norm_sq <= bound_sq + NORM_CONDITION_SLACK * max(1.0, bound_sq)

        x_hat_next = x_next + u_x_next
        mu_hat_next = mu_next + u_mu_next
        check_finite(n, x=x_next, mu=mu_next, u_x=u_x_next, u_mu=u_mu_next)

        info = IterationInfo(
            n=n + 1,
            ell_sq=ell_sq,
            deviation_norm_sq=u_norm_sq,
            slack=bound_sq - u_norm_sq,
            degenerate_weights=weights.degenerate,
        )
        if reference is not None:
            info.lyapunov = lyapunov_V(
                PrimalDualPoint(x=x_next, mu=mu_next),
                PrimalDualPoint(x=p_x, mu=p_mu),
                PrimalDualPoint(x=x, mu=mu),
                PrimalDualPoint(x=u_x, mu=u_mu),
                reference,
                lambda_n,
                metric,
            )

        dx = float(np.linalg.norm(x_next - x))
        dmu = float(np.linalg.norm(mu_next - mu))
        x, mu, x_hat, mu_hat = x_next, mu_next, x_hat_next, mu_hat_next
        u_x, u_mu = u_x_next, u_mu_next
        if cache is not None:
            cache.L_x = L_x_next
            cache.L_p_x = L_p_x
            cache.L_u_hat_x = L_u_hat_x
            cache.L_x_hat = L_x_next + scale * L_u_hat_x
            if audit_period and (n + 1) % audit_period == 0:
                drift = cache.audit(L, x, x_hat)
                trace.cache_drift.append((n + 1, drift))
                if drift > CACHE_DRIFT_THRESHOLD:
                    logger.warning(f"Cached L-images drifted by {drift:.3e} at iteration {n + 1}")
            info.cache_vectors = cache.vector_count()

        trace.infos.append(info)
        trace.iterations = n + 1
        trace.last_dx, trace.last_dmu = dx, dmu
        if stopping.should_log(n + 1):
            logger.debug(
                f"pd-DWIFOB iteration {n + 1}: dx = {dx:.3e}, dmu = {dmu:.3e}, "
                f"l^2 = {ell_sq:.3e}, ||u||_M^2 = {u_norm_sq:.3e}"
            )
        trace.z = PrimalDualPoint(x=x, mu=mu)

        if stopping.observer is not None and stopping.observer(n + 1, trace.z, info):
            trace.status = RunStatus.STOPPED
            break
        if stopping.tol is not None and dx <= stopping.tol and dmu <= stopping.tol:
            trace.status = RunStatus.CONVERGED
            break

    if trace.degenerate_count:
        logger.warning(f"Extrapolation weights degenerate {trace.degenerate_count} times")
    return trace

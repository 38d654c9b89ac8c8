"""
Dynamically weighted inertial forward-backward (DWIFOB) deviations.

The candidate deviation is the gap between the newest iterate and its Anderson
extrapolation; it is then scaled to a fixed fraction of the norm-condition budget.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from .anderson import ResidualHistory
from .fb_core import (
    DeviationContext,
    DeviationPolicy,
    InclusionProblem,
    MetricHandle,
    run_fb_with_deviations,
)
from .models import DwifobConfig, ExtrapolationWeights, FbTrace, StoppingRule, Vector


logger = logging.getLogger(__name__)


def dwifob_candidate(
    history: ResidualHistory, x_next: Vector, xi: float
) -> Tuple[Vector, ExtrapolationWeights]:
    """
    u_hat = x_{n+1} - sum alpha_i x_{j+1} over the retained snapshots.

    The history must already hold the pair (x_{n+1} - y_n, x_{n+1}).
    Degenerate weights give u_hat = 0.
    """
    weights = history.weights(xi)
    if weights.degenerate:
        return np.zeros_like(x_next), weights
    return x_next - history.combine(weights.alpha), weights


def deviation_scale(ell_sq: float, zeta: float, eps_scale: float, u_hat_norm: float) -> float:
    """zeta * sqrt(ell_sq) / (eps_scale + ||u_hat||_M), or 0 when the denominator vanishes."""
    denominator = eps_scale + u_hat_norm
    if denominator <= 0.0:
        return 0.0
    return zeta * float(np.sqrt(max(ell_sq, 0.0))) / denominator


def scale_deviation(
    u_hat: Vector, ell_sq: float, zeta_n: float, eps_scale: float, metric: MetricHandle
) -> Vector:
    """Rescale the candidate so that ||u||_M <= zeta_n * l_n."""
    u_hat_norm = metric.norm(u_hat)
    return deviation_scale(ell_sq, zeta_n, eps_scale, u_hat_norm) * u_hat


class DwifobPolicy(DeviationPolicy):
    """Anderson-type deviation with memory m and Tikhonov weight xi."""

    def __init__(self, m: int, xi: float, eps_scale: float = 0.0):
        self.m = m
        self.xi = xi
        self.eps_scale = eps_scale
        self.history = ResidualHistory(m)
        self.degenerate_count = 0

    def reset(self) -> None:
        self.history.clear()
        self.degenerate_count = 0

    def propose(self, context: DeviationContext) -> Vector:
        self.history.push(context.x_next - context.y, context.x_next)
        u_hat, weights = dwifob_candidate(self.history, context.x_next, self.xi)
        if weights.degenerate and self.history.depth > 0:
            self.degenerate_count += 1
        return scale_deviation(u_hat, context.ell_sq, context.zeta, self.eps_scale, context.metric)


def run_dwifob(
    problem: InclusionProblem,
    x0: Vector,
    config: DwifobConfig,
    metric: MetricHandle,
    stopping: Optional[StoppingRule] = None,
) -> FbTrace:
    """Run DWIFOB; the norm condition holds by construction of the scaled deviation."""
    policy = DwifobPolicy(config.m, config.xi, config.eps_scale)
    trace = run_fb_with_deviations(problem, x0, policy, config.schedule, metric, stopping)
    if policy.degenerate_count:
        logger.warning(
            f"DWIFOB fell back to zero deviation {policy.degenerate_count} times "
            f"(m={config.m}, xi={config.xi})"
        )
    return trace

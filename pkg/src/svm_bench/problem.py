"""
Assembly of the l1-regularized SVM as a primal-dual inclusion.

minimize_{w, b} sum_i max(0, 1 - phi_i (w^T theta_i + b)) + delta ||w||_1

is written as f(L x) + g(x) with x = (w, b), L row i = phi_i [theta_i^T, 1],
f the hinge sum and g = delta ||w||_1; the bias is the last primal coordinate.
"""

import logging

import numpy as np
import scipy.sparse as sp

from ..solver.linalg import LinearOperatorHandle
from ..solver.models import PrimalDualPoint, Vector
from ..solver.operators import hinge_conjugate_resolvent, l1_resolvent, objective_value
from ..solver.primal_dual import PrimalDualProblem
from .models import OptimalityReport, SvmDataset, SvmProblem


logger = logging.getLogger(__name__)


def build_design_matrix(dataset: SvmDataset) -> LinearOperatorHandle:
    """Sparse N x (d+1) operator diag(phi) [theta, 1]."""
    ones = sp.csr_matrix(np.ones((dataset.n_samples, 1)))
    stacked = sp.hstack([dataset.theta, ones], format="csr")
    L = sp.diags(dataset.phi) @ stacked
    return LinearOperatorHandle.from_matrix(sp.csr_matrix(L), label="svm design matrix")


def assemble_problem(dataset: SvmDataset, delta: float) -> SvmProblem:
    """Wire the l1 prox and hinge-conjugate resolvent around the design matrix; C = 0."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    L = build_design_matrix(dataset)
    pd_problem = PrimalDualProblem(
        L=L,
        resolvent_primal=l1_resolvent(delta),
        resolvent_dual=hinge_conjugate_resolvent(),
    )
    logger.debug(f"Assembled SVM problem on {dataset} with delta={delta}, nnz(L)={L.nnz}")
    return SvmProblem(dataset=dataset, delta=delta, L=L, pd_problem=pd_problem)


def primal_objective(problem: SvmProblem, x: Vector) -> float:
    return objective_value(x[:-1], float(x[-1]), problem.dataset, problem.delta)


def initial_point(problem: SvmProblem, scale: float = 0.0) -> PrimalDualPoint:
    """scale * 1 in both blocks; scale 0 is the origin."""
    return PrimalDualPoint.full(problem.n_primal, problem.n_dual, scale)


def check_optimality(
    problem: SvmProblem, point: PrimalDualPoint, zero_tol: float = 1e-10
) -> OptimalityReport:
    """
    Largest violation of the saddle-point conditions at (x, mu).

    Primal: -(L* mu)_i lies in delta * sign-subdifferential of |w_i|, and the bias
    entry of L* mu vanishes. Dual: (L x)_j = 1 where -1 < mu_j < 0, >= 1 where
    mu_j = 0 and <= 1 where mu_j = -1. Coordinates within ``zero_tol`` of a kink may
    satisfy either adjacent case.

    Args:
        problem: Assembled SVM problem
        point: Candidate primal-dual pair
        zero_tol: Distance to a kink under which both cases are admissible

    Returns:
        OptimalityReport with the largest violation per block
    """
    x, mu = point.x, point.mu
    delta = problem.delta
    grad = problem.L.adjoint(mu)
    w, g_w = x[:-1], grad[:-1]

    sign_case = np.abs(g_w + delta * np.sign(w))
    zero_case = np.maximum(0.0, np.abs(g_w) - delta)
    primal = np.where(
        w == 0.0,
        zero_case,
        np.where(np.abs(w) <= zero_tol, np.minimum(sign_case, zero_case), sign_case),
    )

    s = problem.L.apply(x)
    infeasible = np.maximum(0.0, mu) + np.maximum(0.0, -1.0 - mu)
    interior_case = np.abs(s - 1.0)
    upper_case = np.where(np.abs(mu) <= zero_tol, np.maximum(0.0, 1.0 - s), np.inf)
    lower_case = np.where(np.abs(mu + 1.0) <= zero_tol, np.maximum(0.0, s - 1.0), np.inf)
    dual = np.minimum(interior_case, np.minimum(upper_case, lower_case)) + infeasible

    return OptimalityReport(
        primal_violation=float(primal.max()) if primal.size else 0.0,
        bias_violation=float(abs(grad[-1])),
        dual_violation=float(dual.max()),
    )

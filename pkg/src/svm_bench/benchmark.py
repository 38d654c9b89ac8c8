"""
Benchmark runner: one algorithm on one SVM instance, traced per iteration.

Every run is measured against a cached high-accuracy reference in the M-norm,
normalized by the initial distance, and stopped once that ratio reaches the
configured tolerance.
"""

import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..solver.anderson import run_raa
from ..solver.fb_core import SolverDivergenceError
from ..solver.models import (
    DwifobConfig,
    IterationInfo,
    PrimalDualPoint,
    RunStatus,
    StoppingRule,
    Vector,
)
from ..solver.primal_dual import PdMetric, cp_step, run_cp, run_pd_dwifob
from .cost_model import (
    apply_ratio,
    cp_iteration_cost,
    iteration_cost,
    mean_iteration_cost,
    scaled_iteration_series,
)
from .libsvm import load_libsvm
from .models import (
    BenchConfig,
    BenchmarkError,
    BenchmarkResult,
    BenchSummary,
    IterationRecord,
    ReferenceSolution,
    SvmProblem,
)
from .problem import assemble_problem, initial_point, primal_objective
from .reference import ReferenceCache, compute_reference_solution
from .utils import resolve_dataset_path


logger = logging.getLogger(__name__)


@dataclass
class BenchInstance:
    """Problem, metric and reference shared by all runs on one dataset/delta/step rule."""

    problem: SvmProblem
    metric: PdMetric
    reference: ReferenceSolution

    @property
    def dim(self) -> int:
        return self.problem.n_primal + self.problem.n_dual


def prepare_instance(
    config: BenchConfig, cache: Optional[ReferenceCache] = None, show_progress: bool = False
) -> BenchInstance:
    """
    Load the dataset, assemble the problem, choose step sizes and get the reference.

    Raises:
        FileNotFoundError: If the dataset cannot be located
        LibsvmParseError: If the dataset is malformed
    """
    dataset = load_libsvm(resolve_dataset_path(config.dataset))
    problem = assemble_problem(dataset, config.delta)
    metric = PdMetric.from_operator(problem.L, config.step_rule, seed=config.seed)
    logger.info(
        f"{dataset}: tau = sigma = {metric.tau:.6g} ({config.step_rule}), "
        f"sigma tau ||L||^2 = {metric.coupling:.4f}"
    )
    reference = compute_reference_solution(
        problem,
        metric,
        tol=config.reference_tol,
        max_iters=config.reference_max_iters,
        cache=cache,
        show_progress=show_progress,
    )
    return BenchInstance(problem=problem, metric=metric, reference=reference)


class TraceRecorder:
    """
    Observer that turns solver callbacks into IterationRecords.

    Wall time is measured between consecutive callbacks, so the recorder's own
    distance and objective evaluations are excluded.
    """

    def __init__(
        self,
        instance: BenchInstance,
        tol: float,
        cost: Callable[[int], float],
        objective_every: int = 0,
    ):
        self.instance = instance
        self.tol = tol
        self.cost = cost
        self.objective_every = objective_every
        self.records: List[IterationRecord] = []
        self.reached_at: Optional[int] = None
        self._initial_distance = 0.0
        self.last_point: Optional[PrimalDualPoint] = None
        self._last_exit: Optional[int] = None

    def __call__(self, n: int, point, info: Optional[IterationInfo]) -> bool:
        entered = time.perf_counter_ns()
        wall_ns = 0 if self._last_exit is None else entered - self._last_exit

        if not isinstance(point, PrimalDualPoint):
            point = PrimalDualPoint.from_vector(point, self.instance.problem.n_primal)
        self.last_point = point
        distance = self.instance.metric.distance(point, self.instance.reference.point)
        if n == 0:
            self._initial_distance = distance
        normalized = distance / self._initial_distance if self._initial_distance > 0 else 0.0

        flags = []
        if not np.isfinite(distance):
            flags.append("nan")
        if info is not None and info.degenerate_weights:
            flags.append("degenerate")

        objective = None
        if self.objective_every and n % self.objective_every == 0:
            objective = primal_objective(self.instance.problem, point.x)

        self.records.append(
            IterationRecord(
                n=n,
                wall_ns=wall_ns,
                m_dist=distance,
                m_dist_normalized=normalized,
                model_cost=self.cost(n) if n > 0 else 0.0,
                V_n=info.lyapunov if info is not None else None,
                slack=info.slack if info is not None else None,
                objective=objective,
                flags=";".join(flags),
            )
        )

        stop = False
        if n > 0 and normalized <= self.tol and self.reached_at is None:
            self.reached_at = n
            stop = True
        self._last_exit = time.perf_counter_ns()
        return stop


def _cp_map(instance: BenchInstance) -> Callable[[Vector], Vector]:
    pd_problem = instance.problem.pd_problem
    n_primal = instance.problem.n_primal

    def T(y: Vector) -> Vector:
        z = PrimalDualPoint.from_vector(y, n_primal)
        return cp_step(
            z, pd_problem.resolvent_primal, pd_problem.resolvent_dual, instance.metric
        ).as_vector()

    return T


def run_baseline(instance: BenchInstance, config: BenchConfig) -> List[IterationRecord]:
    """Short CP run from the configured start, used as the wallclock cost baseline."""
    recorder = TraceRecorder(instance, tol=0.0, cost=lambda n: 0.0)
    z0 = initial_point(instance.problem, config.init_scale)
    run_cp(
        instance.problem.pd_problem,
        z0,
        instance.metric,
        StoppingRule(max_iters=config.baseline_iters + config.warmup, observer=recorder),
    )
    return recorder.records


def run_benchmark(
    config: BenchConfig,
    instance: Optional[BenchInstance] = None,
    baseline_records: Optional[Sequence[IterationRecord]] = None,
    cache: Optional[ReferenceCache] = None,
) -> BenchmarkResult:
    """
    Run one configuration and collect per-iteration records plus a summary.

    Args:
        config: Run configuration
        instance: Prepared instance (loaded from ``config`` when omitted)
        baseline_records: CP records for the wallclock cost ratio; a short CP run is
            made when they are needed and missing
        cache: Reference cache used when the instance has to be prepared

    Returns:
        BenchmarkResult; divergence is reported in the summary status, not raised

    Raises:
        BenchmarkError: If the schedule violates the parameter bounds or the start
            coincides with the reference
    """
    instance = instance or prepare_instance(config, cache)
    problem, metric = instance.problem, instance.metric

    violations = config.validation_errors(metric.tau)
    if violations:
        raise BenchmarkError("Invalid parameters: " + "; ".join(violations))

    z0 = initial_point(problem, config.init_scale)
    if metric.distance(z0, instance.reference.point) == 0.0:
        raise BenchmarkError("Initial point coincides with the reference solution")

    nnz, dim = problem.L.nnz, instance.dim

    def cost(n: int) -> float:
        return iteration_cost(config.algorithm, config.mode, n - 1, config.m, nnz, dim)

    recorder = TraceRecorder(instance, config.tol, cost, config.objective_every)
    stopping = StoppingRule(
        max_iters=config.max_iters, observer=recorder, log_every=config.log_every
    )
    metadata = {
        "dataset_hash": problem.dataset.content_hash(),
        "n_samples": problem.dataset.n_samples,
        "n_features": problem.dataset.n_features,
        "features": "raw (unscaled)",
        "norm_L": metric.norm_L,
        "tau": metric.tau,
        "sigma": metric.sigma,
        "reference_iterations": instance.reference.iterations,
        "reference_dx": instance.reference.achieved_dx,
        "reference_dmu": instance.reference.achieved_dmu,
        "cost_model": config.cost_model,
    }

    logger.info(f"Running {config.label} on {problem.dataset} (cap {config.max_iters})")
    started = time.perf_counter()
    status = RunStatus.MAX_ITERS
    try:
        if config.algorithm == "cp":
            status = run_cp(problem.pd_problem, z0, metric, stopping).status
        elif config.algorithm == "pd_dwifob":
            dwifob = DwifobConfig(
                m=config.m,
                xi=config.xi,
                schedule=config.schedule(metric.tau),
                eps_scale=config.eps_scale,
            )
            trace = run_pd_dwifob(
                problem.pd_problem,
                z0,
                dwifob,
                metric,
                mode=config.mode,
                stopping=stopping,
                reference=instance.reference.point if config.record_lyapunov else None,
                audit_period=config.audit_period,
            )
            status = trace.status
            metadata["degenerate_weights"] = trace.degenerate_count
            if trace.cache_drift:
                metadata["max_cache_drift"] = max(d for _, d in trace.cache_drift)
        else:
            raa = run_raa(
                _cp_map(instance),
                z0.as_vector(),
                config.m,
                config.xi,
                stopping,
                divergence_factor=config.divergence_factor,
            )
            status = raa.status
            metadata["divergence_threshold"] = raa.divergence_threshold
            metadata["degenerate_weights"] = raa.degenerate_count
    except SolverDivergenceError as e:
        logger.warning(f"{config.label} diverged: {e}")
        status = RunStatus.DIVERGED
        if recorder.records:
            last = recorder.records[-1]
            last.flags = ";".join(filter(None, [last.flags, "nan"]))
    metadata["elapsed_seconds"] = time.perf_counter() - started

    records = recorder.records
    if recorder.reached_at is not None:
        outcome = "converged"
    elif status is RunStatus.DIVERGED:
        outcome = "diverged"
    else:
        outcome = "max_iters"

    if config.algorithm == "cp":
        series = apply_ratio(records, 1.0)
    elif baseline_records is not None:
        series = scaled_iteration_series(
            records, config.cost_model, baseline_records, config.warmup
        )
    elif config.cost_model == "deterministic":
        ratio = mean_iteration_cost(records, "deterministic") / cp_iteration_cost(nnz, dim)
        series = apply_ratio(records, ratio)
    else:
        baseline = run_baseline(instance, config)
        series = scaled_iteration_series(records, "wallclock", baseline, config.warmup)

    final_objective = None
    if recorder.last_point is not None and np.all(np.isfinite(recorder.last_point.x)):
        final_objective = primal_objective(problem, recorder.last_point.x)
    summary = BenchSummary(
        algorithm=config.algorithm,
        dataset=str(problem.dataset),
        status=outcome,
        iterations=records[-1].n if records else 0,
        iterations_to_tol=recorder.reached_at,
        cost_ratio=series.ratio,
        scaled_iterations_to_tol=(
            recorder.reached_at * series.ratio if recorder.reached_at is not None else None
        ),
        final_m_dist_normalized=records[-1].m_dist_normalized if records else float("nan"),
        final_objective=final_objective,
        metadata=metadata,
    )
    logger.info(
        f"{config.label}: {outcome} after {summary.iterations} iterations "
        f"(cost ratio {series.ratio:.3f})"
    )
    return BenchmarkResult(config=config, records=records, summary=summary)

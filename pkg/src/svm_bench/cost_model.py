"""
Per-iteration cost accounting for scaled iterations.

Scaled iterations multiply the iteration axis of a run by the ratio of its mean
per-iteration cost to that of Chambolle-Pock. The cost is either measured wall
time (first ``warmup`` iterations excluded) or a deterministic flop model in which
one application of L or L* costs 2 nnz(L), vector operations cost their length
D = d + 1 + N, and the extrapolation least squares costs k D + k^3 for k = m_n + 1
(Gram row plus dense solve).
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .models import BenchmarkError, IterationRecord


logger = logging.getLogger(__name__)

DEFAULT_WARMUP = 50


@dataclass
class ScaledSeries:
    """Cost ratio against the baseline and the scaled iteration axis."""

    ratio: float
    values: List[float]


def operator_cost(nnz: int) -> float:
    return 2.0 * nnz


def cp_iteration_cost(nnz: int, dim: int) -> float:
    return 2 * operator_cost(nnz) + 6.0 * dim


def iteration_cost(algorithm: str, mode: str, n: int, memory: int, nnz: int, dim: int) -> float:
    """
    Modelled flops of iteration n (0-based).

    Args:
        algorithm: "cp", "pd_dwifob" or "raa"
        mode: "recursive" or "direct" (pd_dwifob only)
        n: Iteration index; the history depth is min(memory, n)
        memory: m
        nnz: Nonzeros of L
        dim: d + 1 + N
    """
    cp = cp_iteration_cost(nnz, dim)
    if algorithm == "cp":
        return cp

    k = min(memory, n) + 1
    least_squares = k * dim + float(k) ** 3
    if algorithm == "pd_dwifob":
        if mode == "recursive":
            return 2 * operator_cost(nnz) + (14 + 3 * k) * dim + least_squares
        return 4 * operator_cost(nnz) + (12 + 2 * k) * dim + least_squares
    if algorithm == "raa":
        return cp + (4 + k) * dim + least_squares
    raise BenchmarkError(f"Unknown algorithm: {algorithm}")


def mean_iteration_cost(
    records: Sequence[IterationRecord], cost_model: str, warmup: int = DEFAULT_WARMUP
) -> float:
    """Mean cost over iteration records (n >= 1)."""
    iterations = [r for r in records if r.n >= 1]
    if not iterations:
        raise BenchmarkError("No iteration records to average")

    if cost_model == "deterministic":
        return float(np.mean([r.model_cost for r in iterations]))
    if cost_model == "wallclock":
        if len(iterations) > warmup:
            iterations = iterations[warmup:]
        else:
            logger.debug(f"Only {len(iterations)} iterations; warmup exclusion skipped")
        return float(np.mean([r.wall_ns for r in iterations]))
    raise BenchmarkError(f"Unknown cost model: {cost_model}")


def apply_ratio(records: Sequence[IterationRecord], ratio: float) -> ScaledSeries:
    """Set scaled_n = n * ratio on every record."""
    values = []
    for record in records:
        record.scaled_n = record.n * ratio
        values.append(record.scaled_n)
    return ScaledSeries(ratio=ratio, values=values)


def scaled_iteration_series(
    records: Sequence[IterationRecord],
    cost_model: str,
    baseline_records: Sequence[IterationRecord],
    warmup: int = DEFAULT_WARMUP,
) -> ScaledSeries:
    """
    Scale the iteration axis by mean cost relative to the CP baseline.

    Raises:
        BenchmarkError: If the baseline is missing or the cost model is unknown
    """
    if not baseline_records:
        raise BenchmarkError("Scaled iterations need baseline (Chambolle-Pock) records")
    baseline = mean_iteration_cost(baseline_records, cost_model, warmup)
    if baseline <= 0:
        raise BenchmarkError(f"Baseline cost must be positive, got {baseline}")
    ratio = mean_iteration_cost(records, cost_model, warmup) / baseline
    return apply_ratio(records, ratio)

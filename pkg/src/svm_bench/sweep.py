"""
Parameter sweeps over benchmark configurations.

Runs that share dataset, delta and step rule share one prepared instance (and so
one reference solution). Independent runs execute in a thread pool with a tqdm
progress bar, and a summary table is produced with pandas.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
from tqdm import tqdm

from .benchmark import BenchInstance, prepare_instance, run_baseline, run_benchmark
from .export import export_csv
from .models import BenchConfig, BenchmarkResult, IterationRecord
from .reference import ReferenceCache
from .utils import ensure_directory


logger = logging.getLogger(__name__)

DEFAULT_MEMORIES = (0, 1, 2, 5, 10, 20)
DEFAULT_XIS = (0.0, 1e-5, 1e-3)
DEFAULT_INIT_SCALES = (0.0, 1.0, 10.0)

InstanceKey = Tuple[str, float, str, int]


def expand_grid(base: BenchConfig, **axes: Sequence[Any]) -> List[BenchConfig]:
    """Cartesian product of the given field values applied to ``base``."""
    if not axes:
        return [base]
    names = list(axes)
    return [
        replace(base, **dict(zip(names, values)))
        for values in itertools.product(*(axes[name] for name in names))
    ]


def memory_sweep_configs(
    base: BenchConfig, memories: Sequence[int] = DEFAULT_MEMORIES
) -> List[BenchConfig]:
    """pd-DWIFOB over memories; m = 0 stands for the Chambolle-Pock baseline."""
    configs = []
    for m in memories:
        if m == 0:
            configs.append(replace(base, algorithm="cp", m=0))
        else:
            configs.append(replace(base, algorithm="pd_dwifob", m=m))
    return configs


def robustness_configs(
    base: BenchConfig,
    memories: Sequence[int] = (1, 5, 10),
    xis: Sequence[float] = DEFAULT_XIS,
    init_scales: Sequence[float] = DEFAULT_INIT_SCALES,
) -> List[BenchConfig]:
    """RAA and pd-DWIFOB side by side over memory, regularization and start."""
    configs = []
    for algorithm in ("raa", "pd_dwifob"):
        configs.extend(
            expand_grid(
                replace(base, algorithm=algorithm),
                m=memories,
                xi=xis,
                init_scale=init_scales,
            )
        )
    return configs


def mode_configs(base: BenchConfig, memories: Sequence[int] = (1, 5, 10)) -> List[BenchConfig]:
    """Recursive against direct evaluation of pd-DWIFOB."""
    return expand_grid(
        replace(base, algorithm="pd_dwifob"), m=memories, mode=("recursive", "direct")
    )


def _instance_key(config: BenchConfig) -> InstanceKey:
    return (config.dataset, config.delta, config.step_rule, config.seed)


def run_sweep(
    configs: Sequence[BenchConfig],
    cache: Optional[ReferenceCache] = None,
    max_workers: int = 1,
    show_progress: bool = True,
) -> List[BenchmarkResult]:
    """
    Run every configuration and return results in input order.

    Instances are prepared once per (dataset, delta, step rule, seed). In wallclock
    mode a single Chambolle-Pock baseline per instance is shared by all runs; for
    timing fidelity keep ``max_workers`` at 1 there.

    Args:
        configs: Configurations to run
        cache: Reference cache
        max_workers: Thread pool size
        show_progress: Show a tqdm bar

    Returns:
        One BenchmarkResult per configuration
    """
    instances: Dict[InstanceKey, BenchInstance] = {}
    baselines: Dict[InstanceKey, List[IterationRecord]] = {}
    for config in configs:
        key = _instance_key(config)
        if key not in instances:
            logger.info(f"Preparing instance {config.dataset} (delta={config.delta})")
            instances[key] = prepare_instance(config, cache, show_progress=show_progress)
        if config.cost_model == "wallclock" and key not in baselines:
            baselines[key] = run_baseline(instances[key], config)

    if max_workers > 1 and any(c.cost_model == "wallclock" for c in configs):
        logger.warning("Wallclock costs are measured concurrently; ratios may be skewed")

    results: List[Optional[BenchmarkResult]] = [None] * len(configs)
    failed = 0
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {
            executor.submit(
                run_benchmark,
                config,
                instances[_instance_key(config)],
                baselines.get(_instance_key(config)),
            ): index
            for index, config in enumerate(configs)
        }

        with tqdm(
            total=len(futures), desc="Benchmark runs", unit="run", disable=not show_progress
        ) as progress:
            for future in as_completed(futures):
                index = futures[future]
                label = configs[index].label
                try:
                    result = future.result()
                    results[index] = result
                    mark = "✓" if result.summary.converged else "·"
                    progress.set_postfix_str(f"{mark} {label} ({result.summary.status})")
                except Exception as e:
                    failed += 1
                    logger.error(f"Run {label} failed: {e}")
                    progress.set_postfix_str(f"✗ {label}")
                progress.update(1)

    completed = [r for r in results if r is not None]
    converged = sum(1 for r in completed if r.summary.converged)
    logger.info(
        f"Sweep complete: {converged} converged, "
        f"{len(completed) - converged} not converged, {failed} failed"
    )
    return completed


def summarize(results: Iterable[BenchmarkResult]) -> pd.DataFrame:
    """One row per run with the headline numbers."""
    rows = []
    for result in results:
        config, summary = result.config, result.summary
        rows.append(
            {
                "label": config.label,
                "algorithm": config.algorithm,
                "dataset": summary.dataset,
                "delta": config.delta,
                "m": config.m,
                "xi": config.xi,
                "mode": config.mode,
                "init_scale": config.init_scale,
                "status": summary.status,
                "iterations": summary.iterations,
                "iterations_to_tol": summary.iterations_to_tol,
                "cost_ratio": summary.cost_ratio,
                "scaled_iterations_to_tol": summary.scaled_iterations_to_tol,
                "final_m_dist_normalized": summary.final_m_dist_normalized,
                "final_objective": summary.final_objective,
            }
        )
    return pd.DataFrame(rows)


def _file_stem(config: BenchConfig) -> str:
    name = Path(config.dataset).stem.replace(".", "_")
    if config.algorithm == "cp":
        return f"{name}_cp"
    return (
        f"{name}_{config.algorithm}_m{config.m}_xi{config.xi:g}"
        f"_{config.mode}_s{config.init_scale:g}"
    )


def export_sweep(results: Sequence[BenchmarkResult], output_dir: Path) -> Path:
    """Write one trace CSV per run plus ``summary.csv``; returns the summary path."""
    output_dir = Path(output_dir)
    ensure_directory(output_dir)
    for result in results:
        export_csv(result.records, output_dir / f"{_file_stem(result.config)}.csv")

    summary_path = output_dir / "summary.csv"
    summarize(results).to_csv(summary_path, index=False, float_format="%.17g")
    logger.info(f"Wrote {len(results)} traces and summary to {output_dir}")
    return summary_path

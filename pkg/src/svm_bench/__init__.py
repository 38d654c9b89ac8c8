"""
SVM Benchmark Module

Runs Chambolle-Pock, primal-dual DWIFOB and regularized Anderson acceleration on
l1-regularized hinge-loss SVMs built from LIBSVM datasets, and records distances
to a cached reference solution in the primal-dual metric.
"""

__version__ = "1.0.0"

from .benchmark import BenchInstance, prepare_instance, run_baseline, run_benchmark
from .dataset_download import DATASETS, DatasetDownloader, DatasetDownloadError
from .export import export_csv, read_csv
from .libsvm import LibsvmParseError, load_libsvm, parse_libsvm, serialize_libsvm
from .models import BenchConfig, BenchmarkError, BenchmarkResult, SvmDataset, SvmProblem
from .problem import assemble_problem, check_optimality
from .reference import ReferenceCache, ReferenceCacheError, compute_reference_solution
from .sweep import export_sweep, memory_sweep_configs, robustness_configs, run_sweep

__all__ = [
    "BenchConfig",
    "BenchInstance",
    "BenchmarkError",
    "BenchmarkResult",
    "DATASETS",
    "DatasetDownloadError",
    "DatasetDownloader",
    "LibsvmParseError",
    "ReferenceCache",
    "ReferenceCacheError",
    "SvmDataset",
    "SvmProblem",
    "assemble_problem",
    "check_optimality",
    "compute_reference_solution",
    "export_csv",
    "export_sweep",
    "load_libsvm",
    "memory_sweep_configs",
    "parse_libsvm",
    "prepare_instance",
    "read_csv",
    "robustness_configs",
    "run_baseline",
    "run_benchmark",
    "run_sweep",
    "serialize_libsvm",
]

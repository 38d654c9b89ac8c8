#!/usr/bin/env python3
"""
SVM Benchmark CLI

Runs one algorithm (Chambolle-Pock, primal-dual DWIFOB or regularized Anderson
acceleration) on an l1-regularized SVM built from a LIBSVM dataset and writes the
per-iteration trace to CSV.

Usage Examples:
    # pd-DWIFOB with memory 5 on breast cancer
    python run_benchmark.py breast-cancer --algorithm pd_dwifob --memory 5 --out trace.csv

    # Chambolle-Pock baseline
    python run_benchmark.py breast-cancer --algorithm cp --out cp.csv

    # RAA from a far starting point
    python run_benchmark.py breast-cancer --algorithm raa --memory 10 --init-scale 1e4

    # Settings from a JSON file, with a CLI override
    python run_benchmark.py --config runs/colon.json --max-iters 20000
"""

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

# Repository root on the path so that ``src`` imports as a package
sys.path.insert(0, str(Path(__file__).parent))

from src.svm_bench import BenchConfig, ReferenceCache, export_csv, run_benchmark
from src.svm_bench.models import ALGORITHMS, COST_MODELS, MODES, STEP_RULES
from src.svm_bench.utils import format_duration


def setup_logging(verbose: bool) -> None:
    """Configure logging based on verbosity setting."""
    level = logging.DEBUG if verbose else logging.INFO

    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler()],
    )

    # Suppress verbose output from external libraries
    if not verbose:
        logging.getLogger("urllib3").setLevel(logging.WARNING)
        logging.getLogger("requests").setLevel(logging.WARNING)


def create_argument_parser() -> argparse.ArgumentParser:
    """Create and configure argument parser."""
    parser = argparse.ArgumentParser(
        description="Benchmark monotone-inclusion solvers on l1-regularized SVMs",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s breast-cancer --algorithm pd_dwifob --memory 5 --out trace.csv
  %(prog)s breast-cancer --algorithm cp --out cp.csv
  %(prog)s breast-cancer --algorithm raa --memory 10 --init-scale 1e4
  %(prog)s --config runs/colon.json --max-iters 20000

Algorithms:
  cp          Chambolle-Pock baseline
  pd_dwifob   Primal-dual DWIFOB (recursive or direct evaluation)
  raa         Regularized Anderson acceleration of the Chambolle-Pock map

Exit codes:
  0 converged, 2 iteration cap reached, 3 diverged, 1 error, 130 interrupted

Datasets are looked up in $DWIFOB_DATA_DIR (default ./data); reference solutions
are cached in $DWIFOB_CACHE_DIR (default ./cache).
        """,
    )

    parser.add_argument("dataset", nargs="?", help="Dataset path or name in the data directory")
    parser.add_argument("--config", type=Path, help="JSON file with BenchConfig fields")

    # Problem
    parser.add_argument("--delta", type=float, help="l1 regularization weight (default: 0.5)")
    parser.add_argument(
        "--step-rule", choices=STEP_RULES, help="tau = sigma rule (default: over_norm)"
    )

    # Algorithm
    parser.add_argument("--algorithm", choices=ALGORITHMS, help="Algorithm (default: pd_dwifob)")
    parser.add_argument("--memory", "-m", type=int, dest="m", help="Memory m (default: 5)")
    parser.add_argument("--xi", type=float, help="Tikhonov regularization (default: 1e-5)")
    parser.add_argument("--lambda", type=float, dest="lam", help="Relaxation (default: 1.0)")
    parser.add_argument("--zeta", type=float, help="Deviation budget factor (default: 0.99)")
    parser.add_argument("--mode", choices=MODES, help="L-image evaluation (default: recursive)")
    parser.add_argument(
        "--init-scale", type=float, help="Start at scale * ones (default: 0, the origin)"
    )
    parser.add_argument("--seed", type=int, help="Power-iteration seed (default: 0)")

    # Stopping and accounting
    parser.add_argument("--tol", type=float, help="Normalized M-distance target (default: 1e-8)")
    parser.add_argument("--max-iters", type=int, help="Iteration cap (default: 100000)")
    parser.add_argument(
        "--cost-model", choices=COST_MODELS, help="Scaled-iteration cost (default: deterministic)"
    )
    parser.add_argument(
        "--objective-every", type=int, help="Record the primal objective every k iterations"
    )
    parser.add_argument(
        "--record-lyapunov", action="store_true", default=None, help="Record V_n (pd_dwifob)"
    )
    parser.add_argument(
        "--audit-period", type=int, help="Audit cached L-images every k iterations"
    )
    parser.add_argument(
        "--divergence-factor",
        type=float,
        help="RAA stops as diverged once ||r|| > factor * (1 + ||r_0||) (default: 1e8)",
    )
    parser.add_argument(
        "--log-every", type=int, help="DEBUG diagnostics every k iterations (with --verbose)"
    )

    # Output
    parser.add_argument("--out", type=Path, help="CSV output path")
    parser.add_argument("--summary-json", type=Path, help="Write the run summary as JSON")
    parser.add_argument(
        "--no-cache", action="store_true", help="Recompute the reference without the cache"
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")

    return parser


def build_config(args) -> BenchConfig:
    """Merge the optional config file with CLI flags (flags win)."""
    names = {f.name for f in fields(BenchConfig)}
    overrides = {name: getattr(args, name) for name in names if hasattr(args, name)}
    overrides = {k: v for k, v in overrides.items() if v is not None}

    if args.config:
        return BenchConfig.from_file(args.config, **overrides)
    if "dataset" not in overrides:
        raise ValueError("A dataset (positional) or --config is required")
    return BenchConfig(**overrides)


def validate_arguments(args) -> None:
    """Validate command-line arguments."""
    if args.config and not args.config.exists():
        raise ValueError(f"Config file not found: {args.config}")
    if args.out and not args.out.parent.exists():
        raise ValueError(f"Parent directory does not exist: {args.out.parent}")
    for name in ("objective_every", "audit_period", "log_every"):
        value = getattr(args, name)
        if value is not None and value < 1:
            raise ValueError(f"--{name.replace('_', '-')} must be at least 1")


def main():
    """Main CLI entry point."""
    parser = create_argument_parser()
    args = parser.parse_args()

    # Setup logging
    setup_logging(args.verbose)
    logger = logging.getLogger(__name__)

    try:
        validate_arguments(args)
        config = build_config(args)
        cache = None if args.no_cache else ReferenceCache()

        print(f"📊 {config.label} on {config.dataset} (delta={config.delta})")
        result = run_benchmark(config, cache=cache)
        summary = result.summary

        if args.out:
            export_csv(result.records, args.out)
            print(f"📁 Trace saved to: {args.out.absolute()}")
        if args.summary_json:
            payload = {
                "config": config.to_dict(),
                "summary": {
                    k: v for k, v in vars(summary).items() if k != "metadata"
                },
                "metadata": summary.metadata,
            }
            args.summary_json.write_text(json.dumps(payload, indent=2, default=str))

        print("\n📊 Benchmark Summary:")
        print(f"   Status: {summary.status}")
        print(f"   Iterations: {summary.iterations}")
        if summary.iterations_to_tol is not None:
            print(f"   Iterations to tol: {summary.iterations_to_tol}")
            print(f"   Scaled iterations to tol: {summary.scaled_iterations_to_tol:.1f}")
        print(f"   Cost ratio vs CP: {summary.cost_ratio:.3f}")
        print(f"   Final normalized M-distance: {summary.final_m_dist_normalized:.3e}")
        if summary.final_objective is not None:
            print(f"   Final objective: {summary.final_objective:.10g}")
        print(f"   Elapsed: {format_duration(summary.metadata['elapsed_seconds'])}")

        if summary.converged:
            print("\n✅ Reached tolerance")
        elif summary.status == "diverged":
            print("\n❌ Diverged")
        else:
            print("\n⏹️  Iteration cap reached")
        return summary.exit_code

    except KeyboardInterrupt:
        print("\n⏹️  Benchmark cancelled by user")
        return 130
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        print(f"❌ Error: {e}")
        if args.verbose:
            import traceback

            traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""
SVM Benchmark Sweep CLI

Runs a family of benchmark configurations on one dataset and writes one trace CSV
per run plus a summary table.

Usage Examples:
    # Memory sweep (m = 0 is Chambolle-Pock)
    python run_sweep.py breast-cancer --sweep memory --output-dir results/memory

    # RAA versus pd-DWIFOB from a far start
    python run_sweep.py breast-cancer --sweep robustness --init-scales 1e4 --max-iters 50000

    # Recursive versus direct evaluation with V_n recorded
    python run_sweep.py colon-cancer --delta 0.1 --sweep modes --record-lyapunov
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List

# Repository root on the path so that ``src`` imports as a package
sys.path.insert(0, str(Path(__file__).parent))

from src.svm_bench import BenchConfig, ReferenceCache
from src.svm_bench.models import COST_MODELS, STEP_RULES
from src.svm_bench.sweep import (
    export_sweep,
    memory_sweep_configs,
    mode_configs,
    robustness_configs,
    run_sweep,
    summarize,
)


SWEEPS = ("memory", "robustness", "modes")


def setup_logging(verbose: bool) -> None:
    """Configure logging based on verbosity setting."""
    level = logging.DEBUG if verbose else logging.INFO

    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler()],
    )

    if not verbose:
        logging.getLogger("urllib3").setLevel(logging.WARNING)
        logging.getLogger("requests").setLevel(logging.WARNING)


def parse_number_list(text: str) -> List[float]:
    """Parse comma-separated numbers."""
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Invalid number list: {text}")


def create_argument_parser() -> argparse.ArgumentParser:
    """Create and configure argument parser."""
    parser = argparse.ArgumentParser(
        description="Run benchmark sweeps over memory, regularization and start",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s breast-cancer --sweep memory --output-dir results/memory
  %(prog)s breast-cancer --sweep robustness --init-scales 1e4 --max-iters 50000
  %(prog)s colon-cancer --delta 0.1 --sweep modes --record-lyapunov

Sweeps:
  memory       pd-DWIFOB over --memories (0 = Chambolle-Pock)
  robustness   RAA and pd-DWIFOB over --memories x --xis x --init-scales
  modes        pd-DWIFOB in recursive and direct mode over --memories
        """,
    )

    parser.add_argument("dataset", help="Dataset path or name in the data directory")
    parser.add_argument("--sweep", choices=SWEEPS, default="memory", help="Sweep (default: memory)")
    parser.add_argument("--delta", type=float, default=0.5, help="l1 weight (default: 0.5)")
    parser.add_argument(
        "--step-rule",
        choices=STEP_RULES,
        default="over_norm",
        help="Step rule (default: over_norm)",
    )
    parser.add_argument(
        "--memories", type=parse_number_list, help="Memories (comma-separated)"
    )
    parser.add_argument(
        "--xis", type=parse_number_list, default=[1e-5, 1e-6, 1e-7], help="Regularizations"
    )
    parser.add_argument(
        "--init-scales", type=parse_number_list, default=[0.0], help="Starting-point scales"
    )
    parser.add_argument("--tol", type=float, default=1e-8, help="Target (default: 1e-8)")
    parser.add_argument("--max-iters", type=int, default=100000, help="Cap (default: 100000)")
    parser.add_argument(
        "--cost-model",
        choices=COST_MODELS,
        default="deterministic",
        help="Scaled-iteration cost (default: deterministic)",
    )
    parser.add_argument(
        "--record-lyapunov", action="store_true", help="Record V_n for pd-DWIFOB runs"
    )
    parser.add_argument(
        "--objective-every", type=int, default=0, help="Record the objective every k iterations"
    )
    parser.add_argument(
        "--output-dir",
        type=Path,
        default=Path("./results"),
        help="Output directory (default: ./results)",
    )
    parser.add_argument(
        "--max-parallel", type=int, default=1, help="Parallel runs (default: 1)"
    )
    parser.add_argument("--no-cache", action="store_true", help="Do not use the reference cache")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
    parser.add_argument("--quiet", action="store_true", help="Suppress progress bars")

    return parser


def validate_arguments(args) -> None:
    """Validate command-line arguments."""
    if not args.output_dir.parent.exists():
        raise ValueError(f"Parent directory does not exist: {args.output_dir.parent}")
    if args.max_parallel < 1 or args.max_parallel > 16:
        raise ValueError("Max parallel runs must be between 1 and 16")
    if args.memories and any(m < 0 or m != int(m) for m in args.memories):
        raise ValueError("Memories must be nonnegative integers")


def build_configs(args) -> List[BenchConfig]:
    base = BenchConfig(
        dataset=args.dataset,
        delta=args.delta,
        step_rule=args.step_rule,
        tol=args.tol,
        max_iters=args.max_iters,
        cost_model=args.cost_model,
        record_lyapunov=args.record_lyapunov,
        objective_every=args.objective_every,
    )
    memories = [int(m) for m in args.memories] if args.memories else None

    if args.sweep == "memory":
        return memory_sweep_configs(base, memories or [0, 1, 3, 5, 10, 15])
    if args.sweep == "robustness":
        return robustness_configs(
            base, memories or [5, 10, 15], xis=args.xis, init_scales=args.init_scales
        )
    return mode_configs(base, memories or [1, 5, 10])


def main():
    """Main CLI entry point."""
    parser = create_argument_parser()
    args = parser.parse_args()

    setup_logging(args.verbose)
    logger = logging.getLogger(__name__)

    try:
        validate_arguments(args)
        configs = build_configs(args)
        print(f"📊 {args.sweep} sweep: {len(configs)} run(s) on {args.dataset}")

        results = run_sweep(
            configs,
            cache=None if args.no_cache else ReferenceCache(),
            max_workers=args.max_parallel,
            show_progress=not args.quiet,
        )
        summary_path = export_sweep(results, args.output_dir)
        table = summarize(results)

        print("\n📊 Sweep Summary:")
        for status in ("converged", "max_iters", "diverged"):
            print(f"   {status}: {int((table['status'] == status).sum()) if len(table) else 0}")
        failed = len(configs) - len(results)
        print(f"   failed: {failed}")
        if args.verbose and len(table):
            print(table.to_string(index=False))

        print(f"\n📁 Results saved to: {summary_path.parent.absolute()}")
        return 0 if failed == 0 else 1

    except KeyboardInterrupt:
        print("\n⏹️  Sweep cancelled by user")
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

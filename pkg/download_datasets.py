#!/usr/bin/env python3
"""
Dataset Downloader CLI

Fetches the LIBSVM binary-classification datasets used by the benchmarks into
$DWIFOB_DATA_DIR (default ./data).

Usage Examples:
    # All datasets
    python download_datasets.py

    # One dataset, replacing an existing copy
    python download_datasets.py --dataset colon-cancer --force
"""

import argparse
import logging
import sys
from pathlib import Path

# Repository root on the path so that ``src`` imports as a package
sys.path.insert(0, str(Path(__file__).parent))

from src.svm_bench.dataset_download import DATASETS, DatasetDownloader


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


def create_argument_parser() -> argparse.ArgumentParser:
    """Create and configure argument parser."""
    listing = "\n".join(
        f"  {spec.name:<14} {spec.n_samples} x {spec.n_features}, delta {spec.delta}"
        for spec in DATASETS.values()
    )
    parser = argparse.ArgumentParser(
        description="Download LIBSVM benchmark datasets",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Examples:
  %(prog)s
  %(prog)s --dataset colon-cancer --force

Datasets:
{listing}
        """,
    )
    parser.add_argument(
        "--dataset",
        action="append",
        choices=sorted(DATASETS),
        help="Dataset to download (repeatable; default: all)",
    )
    parser.add_argument("--output-dir", type=Path, help="Target directory (default: data dir)")
    parser.add_argument("--force", action="store_true", help="Re-download existing files")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
    return parser


def main():
    """Main CLI entry point."""
    parser = create_argument_parser()
    args = parser.parse_args()

    setup_logging(args.verbose)
    logger = logging.getLogger(__name__)

    try:
        names = args.dataset or list(DATASETS)
        print(f"📥 Downloading {len(names)} dataset(s)...")
        downloader = DatasetDownloader(directory=args.output_dir)
        results = downloader.download_all(names, force=args.force)

        for name in names:
            if name in results:
                print(f"   ✅ {name} → {results[name]}")
            else:
                print(f"   ❌ {name}")

        print(f"\n📁 Files saved to: {downloader.directory.absolute()}")
        return 0 if len(results) == len(names) else 1

    except KeyboardInterrupt:
        print("\n⏹️  Download cancelled by user")
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

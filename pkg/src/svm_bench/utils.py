"""
Utility functions for the benchmark harness.
"""

import os
from pathlib import Path
from typing import Union

DATA_DIR_ENV = "DWIFOB_DATA_DIR"
CACHE_DIR_ENV = "DWIFOB_CACHE_DIR"


def data_dir() -> Path:
    """Directory holding downloaded datasets ($DWIFOB_DATA_DIR, default ./data)."""
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def cache_dir() -> Path:
    """Directory holding reference solutions ($DWIFOB_CACHE_DIR, default ./cache)."""
    return Path(os.environ.get(CACHE_DIR_ENV, "cache"))


def ensure_directory(path: Path) -> None:
    """
    Ensure directory exists, create if needed.

    Args:
        path: Directory path to ensure exists
    """
    path.mkdir(parents=True, exist_ok=True)


def resolve_dataset_path(name_or_path: Union[str, Path]) -> Path:
    """
    Map a dataset argument to a file.

    An existing path is returned as is; otherwise the name is looked up in the data
    directory, so ``breast-cancer`` finds ``$DWIFOB_DATA_DIR/breast-cancer``.

    Raises:
        FileNotFoundError: If neither location exists
    """
    path = Path(name_or_path)
    if path.exists():
        return path
    candidate = data_dir() / path.name
    if candidate.exists():
        return candidate
    raise FileNotFoundError(
        f"Dataset '{name_or_path}' not found (also looked in {data_dir()}); "
        "run download_datasets.py first"
    )


def format_duration(seconds: float) -> str:
    """Compact human-readable duration."""
    if seconds < 1:
        return f"{seconds * 1000:.0f} ms"
    if seconds < 120:
        return f"{seconds:.1f} s"
    return f"{seconds / 60:.1f} min"

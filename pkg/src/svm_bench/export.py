"""
CSV export of per-iteration benchmark records.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from .models import IterationRecord
from .utils import ensure_directory


logger = logging.getLogger(__name__)

CSV_COLUMNS = ["n", "wall_ns", "m_dist", "m_dist_normalized", "scaled_n", "V_n", "slack", "flags"]


def _format(value: Optional[Union[int, float]]) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def export_csv(records: Sequence[IterationRecord], path: Union[str, Path]) -> Path:
    """
    Write one row per record with the fixed header.

    Floats use 17 significant digits with '.' as decimal point; missing optional
    values are left empty.

    Args:
        records: Iteration records in order
        path: Output file; parent directories are created

    Returns:
        The written path
    """
    path = Path(path)
    if path.parent != Path(""):
        ensure_directory(path.parent)

    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    _format(r.n),
                    _format(int(r.wall_ns)),
                    _format(r.m_dist),
                    _format(r.m_dist_normalized),
                    _format(r.scaled_n),
                    _format(r.V_n),
                    _format(r.slack),
                    r.flags,
                ]
            )

    logger.debug(f"Wrote {len(records)} records to {path}")
    return path


def read_csv(path: Union[str, Path]) -> List[Dict[str, Optional[float]]]:
    """Read an exported trace back; empty cells become None, flags stay strings."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            parsed: Dict[str, Optional[float]] = {}
            for column in CSV_COLUMNS[:-1]:
                cell = row[column]
                parsed[column] = float(cell) if cell != "" else None
            parsed["flags"] = row["flags"]  # type: ignore[assignment]
            rows.append(parsed)
    return rows

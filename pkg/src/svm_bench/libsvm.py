"""
LIBSVM text format reader and writer.

Lines look like ``label idx:val idx:val ...`` with 1-based, strictly ascending
indices. ``#`` starts a comment. Exactly one or two distinct numeric labels are
accepted; the smaller maps to -1 and the larger to +1.
"""

import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
import scipy.sparse as sp

from .models import SvmDataset


logger = logging.getLogger(__name__)


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


def _parse_float(token: str, line_number: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise LibsvmParseError(f"malformed {what} '{token}'", line_number)
    if not math.isfinite(value):
        raise LibsvmParseError(f"non-finite {what} '{token}'", line_number)
    return value


def parse_libsvm(
    text: Union[str, bytes, Iterable[str]], source: Optional[str] = None
) -> SvmDataset:
    """
    Parse LIBSVM text into a dataset.

    Args:
        text: Whole file content (str or UTF-8 bytes) or an iterable of lines
        source: Optional name recorded on the dataset

    Returns:
        SvmDataset with d equal to the largest index seen

    Raises:
        LibsvmParseError: On invalid UTF-8, malformed tokens, non-ascending indices,
            more than two label classes, or input without samples or features
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            line_number = text[: e.start].count(b"\n") + 1
            raise LibsvmParseError(f"invalid UTF-8 at byte {e.start}", line_number) from e
    lines = text.splitlines() if isinstance(text, str) else text

    labels: List[float] = []
    rows: List[int] = []
    cols: List[int] = []
    values: List[float] = []
    seen_labels: Dict[float, int] = {}
    n_features = 0
    line_number = 0

    for line_number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        tokens = line.split()
        label = _parse_float(tokens[0], line_number, "label")
        if label not in seen_labels:
            if len(seen_labels) == 2:
                raise LibsvmParseError(
                    f"third label class {tokens[0]} (already have {sorted(seen_labels)})",
                    line_number,
                )
            seen_labels[label] = line_number

        row = len(labels)
        last_index = 0
        for token in tokens[1:]:
            index_text, sep, value_text = token.partition(":")
            if not sep:
                raise LibsvmParseError(f"expected idx:val, got '{token}'", line_number)
            try:
                index = int(index_text)
            except ValueError:
                raise LibsvmParseError(f"malformed index '{index_text}'", line_number)
            if index < 1:
                raise LibsvmParseError(f"indices are 1-based, got {index}", line_number)
            if index <= last_index:
                raise LibsvmParseError(
                    f"indices must be ascending ({index} after {last_index})", line_number
                )
            last_index = index
            rows.append(row)
            cols.append(index - 1)
            values.append(_parse_float(value_text, line_number, "value"))

        n_features = max(n_features, last_index)
        labels.append(label)

    if not labels:
        raise LibsvmParseError("no samples", max(line_number, 1))
    if n_features == 0:
        raise LibsvmParseError("no features", max(line_number, 1))

    theta = sp.csr_matrix(
        (np.asarray(values, dtype=float), (np.asarray(rows), np.asarray(cols))),
        shape=(len(labels), n_features),
    )
    label_values = tuple(sorted(seen_labels))
    label_array = np.asarray(labels)
    if len(label_values) == 2:
        phi = np.where(label_array == label_values[0], -1.0, 1.0)
    else:
        phi = np.where(label_array > 0, 1.0, -1.0)

    logger.debug(f"Parsed {len(labels)} samples with {n_features} features, labels {label_values}")
    return SvmDataset(theta=theta, phi=phi, source=source, label_values=label_values)


def load_libsvm(path: Union[str, Path]) -> SvmDataset:
    """Read a LIBSVM file from disk."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset file not found: {path}")
    dataset = parse_libsvm(path.read_bytes(), source=str(path))
    logger.info(f"Loaded {dataset}")
    return dataset


def serialize_libsvm(dataset: SvmDataset) -> str:
    """Write a dataset back as LIBSVM text with +1/-1 labels and shortest round-trip floats."""
    theta = dataset.theta.copy()
    theta.sort_indices()
    out = []
    for i in range(dataset.n_samples):
        start, end = theta.indptr[i], theta.indptr[i + 1]
        label = "+1" if dataset.phi[i] > 0 else "-1"
        pairs = [
            f"{j + 1}:{float(v)!r}"
            for j, v in zip(theta.indices[start:end], theta.data[start:end])
        ]
        out.append(" ".join([label] + pairs))
    return "\n".join(out) + "\n"

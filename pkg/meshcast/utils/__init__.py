"""
Utility classes and functions shared across meshcast.
"""

import hashlib
import json
from typing import Any, List, Mapping, Optional

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    GeometryError,
    MeshCastError,
    NiftiDatatypeError,
    NiftiError,
    NiftiMagicError,
    NiftiTruncatedError,
    NumericalDivergenceError,
    PreprocessingError,
    ShapeError,
    SplitError,
    TapeError,
)
from .logs import configure_logging
from .settings import Settings, get_settings, worker_count


def format_table(title: str, headers: List[str], rows: List[List[str]],
                 col_widths: Optional[List[int]] = None) -> str:
    """Format data as a table.

    Args:
        title: Title for the table
        headers: Column headers
        rows: Table data rows
        col_widths: Optional column widths (auto-calculated if None)

    Returns:
        Formatted table as string
    """
    if col_widths is None:
        col_widths = []
        for i, header in enumerate(headers):
            width = len(header)
            for row in rows:
                if i < len(row):
                    width = max(width, len(str(row[i])))
            col_widths.append(width + 2)

    separator = "-" * (sum(col_widths) + 3 * (len(headers) - 1)) + "\n"
    result = f"{title}\n{separator}"
    result += " | ".join(f"{h:<{w}}" for h, w in zip(headers, col_widths)) + "\n"
    result += separator
    for row in rows:
        cells = [f"{str(cell):<{w}}" for cell, w in zip(row, col_widths)]
        result += " | ".join(cells) + "\n"
    return result


def array_digest(arrays: Mapping[str, np.ndarray]) -> str:
    """SHA-256 over arrays in sorted key order (names, shapes and raw bytes)."""
    digest = hashlib.sha256()
    for key in sorted(arrays):
        arr = np.require(arrays[key], requirements="C")
        digest.update(key.encode("utf-8"))
        digest.update(str(arr.shape).encode("ascii"))
        digest.update(arr.dtype.str.encode("ascii"))
        digest.update(arr.tobytes())
    return digest.hexdigest()


def canonical_json(value: Any) -> str:
    """JSON text with sorted keys and compact separators (byte-stable)."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


__all__ = [
    "ConfigError",
    "DataError",
    "GeometryError",
    "MeshCastError",
    "NiftiDatatypeError",
    "NiftiError",
    "NiftiMagicError",
    "NiftiTruncatedError",
    "NumericalDivergenceError",
    "PreprocessingError",
    "Settings",
    "ShapeError",
    "SplitError",
    "TapeError",
    "array_digest",
    "canonical_json",
    "configure_logging",
    "format_table",
    "get_settings",
    "worker_count",
]

"""Time-series preparation helpers."""

from __future__ import annotations

import csv

import numpy as np

from ..errors import DegenerateSeriesError, FormatError


def z_normalize(values) -> np.ndarray:
    """Center and scale one series to zero mean and unit variance.

    Uses the population standard deviation.  A constant series carries
    no shape information and cannot be scaled, so it is rejected.
    """
    series = np.asarray(values, dtype=np.float64)
    if series.ndim != 1 or series.size == 0:
        raise DegenerateSeriesError("expected a non-empty 1-d series")
    std = float(series.std())
    if std == 0.0:
        raise DegenerateSeriesError(
            "constant series cannot be z-normalized")
    return (series - float(series.mean())) / std


def z_normalize_batch(rows) -> np.ndarray:
    """Normalize each row of a 2-d batch independently."""
    batch = np.asarray(rows, dtype=np.float64)
    if batch.ndim != 2:
        raise DegenerateSeriesError("expected a 2-d batch of series")
    return np.stack([z_normalize(row) for row in batch])


def load_labeled_series(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read ``label,v1,v2,...`` rows into a (series, labels) pair.

    Labels must be 0 (anomalous) or 1 (normal); every row must carry
    the same number of samples.
    """
    labels = []
    rows = []
    with open(path, newline="", encoding="utf-8") as handle:
        for number, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise FormatError(f"row {number}: need a label and at "
                                  "least one sample")
            try:
                label = int(row[0])
                values = [float(cell) for cell in row[1:]]
            except ValueError as exc:
                raise FormatError(f"row {number}: {exc}") from None
            if label not in (0, 1):
                raise FormatError(f"row {number}: label must be 0 or 1")
            if rows and len(values) != len(rows[0]):
                raise FormatError(f"row {number}: expected "
                                  f"{len(rows[0])} samples, got "
                                  f"{len(values)}")
            labels.append(label)
            rows.append(values)
    if not rows:
        raise FormatError("no series found")
    return np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64)

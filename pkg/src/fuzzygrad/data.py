"""CSV ingestion, label encoding and min-max normalisation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "Dataset",
    "load_table",
    "load_iris",
    "range_normalize",
    "apply_range",
    "iris_path",
    "IRIS_FEATURES",
    "IRIS_LABEL",
]

IRIS_FEATURES = ("Petal.Length", "Petal.Width")
IRIS_LABEL = "Species"


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.target)

    def matrix(self) -> np.ndarray:
        """Features with the numeric target appended as the last column."""
        return np.column_stack([self.features, self.target])


def iris_path() -> Path:
    return Path(str(resources.files("fuzzygrad") / "data" / "iris.csv"))


def load_table(path, feature_columns: Sequence[str], label_column: str) -> Dataset:
    """Read a header-bearing CSV.

    Labels are encoded 1..K in order of first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in (*feature_columns, label_column) if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        cols = [header.index(c) for c in feature_columns]
        label_col = header.index(label_column)

        features, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            vals = []
            for name, j in zip(feature_columns, cols):
                try:
                    vals.append(float(row[j]))
                except (ValueError, IndexError):
                    cell = row[j] if j < len(row) else ""
                    raise DataError(
                        f"{path}: non-numeric value {cell!r} at row {lineno}, column {name!r}"
                    ) from None
            if not np.all(np.isfinite(vals)):
                raise DataError(f"{path}: non-finite value at row {lineno}")
            features.append(vals)
            labels.append(row[label_col].strip())

    if not features:
        raise DataError(f"{path}: no data rows")
    classes: dict[str, int] = {}
    for lab in labels:
        classes.setdefault(lab, len(classes) + 1)
    target = np.array([classes[lab] for lab in labels], dtype=np.float64)
    return Dataset(np.array(features, dtype=np.float64), target,
                   tuple(feature_columns), tuple(classes))


def load_iris(path=None) -> Dataset:
    return load_table(path or iris_path(), IRIS_FEATURES, IRIS_LABEL)


def range_normalize(features, names: Sequence[str] | None = None):
    """Scale each column to [0, 1].

    Returns the scaled matrix and the fitted ``(min, max)`` per column.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DataError("features must be a 2-D matrix")
    lo, hi = x.min(axis=0), x.max(axis=0)
    for j in np.flatnonzero(hi == lo):
        name = names[j] if names is not None else j
        raise DataError(f"column {name!r} is constant and cannot be range-normalised")
    bounds = list(zip(lo.tolist(), hi.tolist()))
    return apply_range(x, bounds), bounds


def apply_range(features, bounds) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return (x - lo) / (hi - lo)

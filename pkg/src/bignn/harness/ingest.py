"""Delimited-text ingestion for real benchmark data."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..core import DataError, Dataset
from .config import RealDatasetSpec


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _resolve(col, names: list[str] | None, width: int) -> int:
    if isinstance(col, str):
        if names is None or col not in names:
            raise DataError(f"column {col!r} not found in header")
        return names.index(col)
    j = col + width if col < 0 else col
    if not 0 <= j < width:
        raise DataError(f"column index {col} out of range for {width} columns")
    return j


def real_test_size(N: int) -> int:
    """min(1000, N/5), floored."""
    return min(1000, N // 5)


def load_csv(path, schema: RealDatasetSpec | None = None) -> Dataset:
    """Parse a numeric delimited file into a :class:`Dataset`.

    The label column is mapped through ``schema.label_map`` when given (keys are
    the raw text tokens); otherwise labels must already be 0/1.
    """
    schema = schema or RealDatasetSpec(path=str(path))
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh, delimiter=schema.delimiter), start=1)
                if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: file is empty")

    header = schema.header
    if header is None:
        known = schema.label_map or {}
        header = not all(_is_number(c.strip()) or c.strip() in known for c in rows[0][1])
    names = [c.strip() for c in rows[0][1]] if header else None
    body = rows[1:] if header else rows
    if not body:
        raise DataError(f"{path}: no data rows")

    width = len(body[0][1])
    label_col = _resolve(schema.label_column, names, width)
    if schema.feature_columns is None:
        feat_cols = [j for j in range(width) if j != label_col]
    else:
        feat_cols = [_resolve(c, names, width) for c in schema.feature_columns]
    if not feat_cols:
        raise DataError(f"{path}: no feature columns")

    X = np.empty((len(body), len(feat_cols)))
    y = np.empty(len(body), dtype=np.int8)
    for r, (line, cells) in enumerate(body):
        if len(cells) != width:
            raise DataError(f"{path}:{line}: expected {width} fields, found {len(cells)}")
        for c, j in enumerate(feat_cols):
            tok = cells[j].strip()
            try:
                X[r, c] = float(tok)
            except ValueError:
                col = names[j] if names else j
                raise DataError(f"{path}: row {line}, column {col!r}: non-numeric value {tok!r}") from None
            if not np.isfinite(X[r, c]):
                raise DataError(f"{path}: row {line}, column {j}: non-finite value {tok!r}")
        raw = cells[label_col].strip()
        if schema.label_map is not None:
            if raw not in schema.label_map:
                raise DataError(f"{path}: row {line}: label {raw!r} not in label_map")
            lab = schema.label_map[raw]
        else:
            try:
                lab = float(raw)
            except ValueError:
                raise DataError(f"{path}: row {line}: non-numeric label {raw!r}") from None
        if lab not in (0, 1):
            raise DataError(f"{path}: row {line}: label {raw!r} is not binary after mapping")
        y[r] = int(lab)

    if schema.expected_size is not None and len(y) != schema.expected_size:
        raise DataError(f"{path}: {len(y)} rows, metadata says {schema.expected_size}")
    if schema.expected_dim is not None and X.shape[1] != schema.expected_dim:
        raise DataError(f"{path}: dimension {X.shape[1]}, metadata says {schema.expected_dim}")
    return Dataset(X, y)


def load_queries(path, dim: int | None = None, delimiter: str = ",") -> np.ndarray:
    """Feature-only CSV (optional header) for the ``predict`` command."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh, delimiter=delimiter), start=1)
                if r and any(c.strip() for c in r)]
    if rows and not all(_is_number(c.strip()) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no query rows")
    out = []
    for line, cells in rows:
        try:
            out.append([float(c) for c in cells])
        except ValueError:
            raise DataError(f"{path}:{line}: non-numeric value") from None
        if dim is not None and len(cells) != dim:
            raise DataError(f"{path}:{line}: expected {dim} features, found {len(cells)}")
    return np.asarray(out)

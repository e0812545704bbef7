"""Delimited and JSON output with round-trippable floats (17 significant digits)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def fmt(x):
    if x is None:
        return ""
    return f"{float(x):.17g}"


def write_matrix_csv(path, matrix, header=None):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = []
    if header:
        lines.append(",".join(header))
    for row in matrix:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_vector_csv(path, vector, header=None):
    write_matrix_csv(path, np.asarray(vector, dtype=float)[:, None], header=header)


def write_rows_csv(path, header, rows):
    """Rows of mixed scalars; floats get the 17-digit format, rest str()."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if v is None:
                cells.append("")
            elif isinstance(v, (float, np.floating)):
                cells.append(fmt(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)  # strict JSON has no Infinity/NaN literals
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())

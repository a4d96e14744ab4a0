"""CSV/JSON reading and writing for the command line."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from tailentropy.errors import ValidationError


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_table(path: str | Path, delimiter: str = ",") -> tuple[list[str], np.ndarray, list[str] | None]:
    """Read a headed numeric CSV.

    A first column that does not parse as numbers (e.g. dates) is returned
    separately as the index and excluded from the matrix.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"input: file {path} does not exist")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if any(c.strip() for c in r)]
    if not rows:
        raise ValidationError("input: no data rows (file is empty)")
    header, body = rows[0], rows[1:]
    if not body:
        raise ValidationError("input: no data rows")
    index = None
    if not all(_is_number(r[0]) for r in body):
        index = [r[0] for r in body]
        header, body = header[1:], [r[1:] for r in body]
    try:
        values = np.array([[float(c) for c in r] for r in body])
    except ValueError as exc:
        raise ValidationError(f"input: non-numeric value ({exc})") from None
    if values.ndim != 2 or values.shape[1] != len(header):
        raise ValidationError("input: ragged rows or header/column mismatch")
    return [h.strip() for h in header], values, index


def write_table(path: str | Path, header: Sequence[str], columns: Sequence[Sequence[float]],
                index: Sequence[str] | None = None, index_name: str = "date") -> Path:
    """Write columns as CSV; floats use ``repr`` so they round-trip exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c) for c in columns]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(([index_name] if index is not None else []) + list(header))
        for i in range(len(cols[0]) if cols else 0):
            row = [repr(float(c[i])) for c in cols]
            w.writerow(([index[i]] if index is not None else []) + row)
    return path


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n", encoding="utf-8")
    return path


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")

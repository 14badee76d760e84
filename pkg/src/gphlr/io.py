"""CSV reading and writing.

Files are comma separated with a header row, LF line endings and optional
leading ``#`` comment lines carrying provenance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

MISSING = {"", "na", "nan", "null", "none"}


@dataclass
class Dataset:
    coords: np.ndarray
    values: np.ndarray | None
    dropped: int = 0
    comments: list[str] = field(default_factory=list)
    path: str = ""

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _parse(tok: str, path, lineno: int, col: str) -> float:
    t = tok.strip()
    if t.lower() in MISSING:
        return math.nan
    try:
        return float(t)
    except ValueError:
        raise DataError(f"{path}:{lineno}: column {col!r}: cannot parse {tok!r} as a number") from None


def read_table(path) -> tuple[list[str], list[list[str]], list[str], list[int]]:
    """Header, raw rows, comment lines (without ``#``) and row line numbers."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    comments, header, rows, linenos = [], None, [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        fields = next(csv.reader([line]))
        if header is None:
            header = [h.strip() for h in fields]
            continue
        if len(fields) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, found {len(fields)}")
        rows.append(fields)
        linenos.append(lineno)
    if header is None:
        raise DataError(f"{path}: no header line")
    return header, rows, comments, linenos


def read_points(path, require_values: bool = False) -> Dataset:
    """Read ``x,y[,value]``; rows with missing or non-finite entries are dropped."""
    header, rows, comments, linenos = read_table(path)
    for col in ("x", "y"):
        if col not in header:
            raise DataError(f"{path}: missing column {col!r} (header: {','.join(header)})")
    has_value = "value" in header
    if require_values and not has_value:
        raise DataError(f"{path}: missing column 'value'")
    cols = ["x", "y"] + (["value"] if has_value else [])
    pos = [header.index(c) for c in cols]
    data = np.array([[_parse(r[i], path, ln, c) for i, c in zip(pos, cols)] for r, ln in zip(rows, linenos)],
                    dtype=float).reshape(len(rows), len(cols))
    keep = np.all(np.isfinite(data), axis=1)
    data = data[keep]
    return Dataset(data[:, :2].copy(), data[:, 2].copy() if has_value else None,
                   int((~keep).sum()), comments, str(path))


def write_csv(path, header, rows, comments=()) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            for c in comments:
                fh.write(f"# {c}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def read_records(path, required=()) -> list[dict[str, str]]:
    header, rows, _, _ = read_table(path)
    for col in required:
        if col not in header:
            raise DataError(f"{path}: schema mismatch, missing column {col!r}")
    return [dict(zip(header, r)) for r in rows]

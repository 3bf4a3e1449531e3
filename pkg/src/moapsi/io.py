"""Reading matrices and vectors, writing solve reports.

Matrices come from MatrixMarket (``coordinate`` or ``array``, ``real``,
``general`` or ``symmetric``) or from headerless CSV. Reports are JSON or CSV;
CSV numbers use 17 significant digits so they parse back bit for bit.
"""

from __future__ import annotations

import csv
import json
import warnings
from pathlib import Path
from typing import Union

import numpy as np

from .core import DenseArray, array, vector
from .errors import FormatError

__all__ = [
    "EmptyVectorWarning",
    "load_matrix",
    "load_vector",
    "write_report",
    "read_report",
]

PathLike = Union[str, Path]


class EmptyVectorWarning(UserWarning):
    """A vector file held no values."""


def _parse_float(token: str, lineno: int, path) -> float:
    try:
        return float(token)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: non-numeric token {token!r}") from None


def _data_lines(lines):
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("%"):
            yield lineno, stripped


def _read_matrix_market(lines: list, path) -> np.ndarray:
    header = lines[0].split()
    if len(header) != 5 or header[1].lower() != "matrix":
        raise FormatError(f"{path}:1: malformed MatrixMarket header {lines[0].strip()!r}")
    fmt, field, symmetry = (h.lower() for h in header[2:])
    if fmt not in ("coordinate", "array"):
        raise FormatError(f"{path}:1: unsupported format {fmt!r}")
    if field != "real":
        raise FormatError(f"{path}:1: unsupported field {field!r}; only real is read")
    if symmetry not in ("general", "symmetric"):
        raise FormatError(f"{path}:1: unsupported symmetry {symmetry!r}")
    body = _data_lines(lines[1:])
    try:
        size_lineno, size_line = next(body)
    except StopIteration:
        raise FormatError(f"{path}: missing size line") from None
    size_lineno += 1
    try:
        dims = [int(t) for t in size_line.split()]
    except ValueError:
        raise FormatError(f"{path}:{size_lineno}: malformed size line {size_line!r}") from None
    expected_dims = 3 if fmt == "coordinate" else 2
    if len(dims) != expected_dims or dims[0] < 1 or dims[1] < 1:
        raise FormatError(f"{path}:{size_lineno}: malformed size line {size_line!r}")
    rows, cols = dims[:2]
    if symmetry == "symmetric" and rows != cols:
        raise FormatError(f"{path}: symmetric matrix must be square, got {rows}x{cols}")
    out = np.zeros((rows, cols))
    entries = [(lineno + 1, line) for lineno, line in body]

    if fmt == "coordinate":
        nnz = dims[2]
        if len(entries) != nnz:
            raise FormatError(f"{path}: header declares {nnz} entries, found {len(entries)}")
        seen = set()
        for lineno, line in entries:
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 'row col value', got {line!r}")
            try:
                i, j = int(parts[0]) - 1, int(parts[1]) - 1
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad coordinates in {line!r}") from None
            if not (0 <= i < rows and 0 <= j < cols):
                raise FormatError(
                    f"{path}:{lineno}: entry ({i + 1}, {j + 1}) outside {rows}x{cols}"
                )
            if symmetry == "symmetric" and j > i:
                raise FormatError(
                    f"{path}:{lineno}: symmetric files list the lower triangle only"
                )
            if (i, j) in seen:
                raise FormatError(f"{path}:{lineno}: duplicate entry ({i + 1}, {j + 1})")
            seen.add((i, j))
            value = _parse_float(parts[2], lineno, path)
            out[i, j] = value
            if symmetry == "symmetric":
                out[j, i] = value
        return out

    # array format lists values column by column
    if symmetry == "symmetric":
        positions = [(i, j) for j in range(cols) for i in range(j, rows)]
    else:
        positions = [(i, j) for j in range(cols) for i in range(rows)]
    values = []
    for lineno, line in entries:
        values.extend((_parse_float(t, lineno, path) for t in line.split()))
    if len(values) != len(positions):
        raise FormatError(f"{path}: expected {len(positions)} values, found {len(values)}")
    for (i, j), value in zip(positions, values):
        out[i, j] = value
        if symmetry == "symmetric":
            out[j, i] = value
    return out


def _read_csv_rows(text: str, path) -> list:
    rows = []
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        cells = [c.strip() for c in row]
        if not any(cells):
            continue
        rows.append([_parse_float(c, lineno, path) for c in cells])
    return rows


def load_matrix(path: PathLike) -> DenseArray:
    """Read a dense rank-2 matrix from MatrixMarket or CSV."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if lines and lines[0].startswith("%%MatrixMarket"):
        return array(_read_matrix_market(lines, path))
    rows = _read_csv_rows(text, path)
    if not rows:
        raise FormatError(f"{path}: no matrix rows")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise FormatError(f"{path}: row {lineno} has {len(row)} values, expected {width}")
    return array(rows)


def load_vector(path: PathLike) -> DenseArray:
    """Read one value per line, or a single CSV row or column.

    An empty file yields the empty vector and issues :class:`EmptyVectorWarning`.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    if lines and lines[0].startswith("%%MatrixMarket"):
        m = _read_matrix_market(lines, path)
        if 1 not in m.shape:
            raise FormatError(f"{path}: expected a single row or column, got {m.shape}")
        return vector(m.reshape(-1))
    rows = _read_csv_rows(text, path)
    if not rows:
        warnings.warn(f"{path}: empty vector file", EmptyVectorWarning, stacklevel=2)
        return vector([])
    if len(rows) == 1:
        return vector(rows[0])
    if all(len(r) == 1 for r in rows):
        return vector(r[0] for r in rows)
    raise FormatError(f"{path}: expected a single row or column of values")


def _report_dict(report) -> dict:
    return {
        "solution": [float(v) for v in report.solution],
        "iterations": int(report.iterations),
        "converged": bool(report.converged),
        "residual_history": [float(v) for v in report.residual_history],
    }


def _g17(v: float) -> str:
    return format(float(v), ".17g")


def format_report(report, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(_report_dict(report), indent=2) + "\n"
    if fmt == "csv":
        lines = [",".join(_g17(v) for v in report.solution)]
        lines.extend(_g17(v) for v in report.residual_history)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(report, path: PathLike, format: str = "json") -> None:
    """Write a SolveReport as JSON or CSV (solution row, then one residual per line)."""
    Path(path).write_text(format_report(report, format))


def read_report(path: PathLike, format: str = "json") -> dict:
    """Read back a report; CSV reports only carry solution and residuals."""
    text = Path(path).read_text()
    if format == "json":
        return json.loads(text)
    if format == "csv":
        rows = _read_csv_rows(text, path)
        if not rows:
            raise FormatError(f"{path}: empty report")
        return {
            "solution": rows[0],
            "residual_history": [r[0] for r in rows[1:]],
        }
    raise ValueError(f"unknown report format {format!r}")

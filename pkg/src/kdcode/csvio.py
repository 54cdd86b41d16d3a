"""Numeric CSV in the one dialect the package reads and writes.

Comma separated, '.' decimal point, mandatory header row, UTF-8, LF line
endings.
"""

from __future__ import annotations

import csv
import io

import numpy as np

__all__ = ["CSVFormatError", "parse_numeric_csv", "format_numeric_csv"]


class CSVFormatError(ValueError):
    """Malformed CSV input; ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_numeric_csv(text: str) -> np.ndarray:
    """Parse a header + rows CSV into an ``(rows, columns)`` float array."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CSVFormatError("empty file, header row required", 1) from None
    if not header or all(not h.strip() for h in header):
        raise CSVFormatError("missing header row", 1)
    try:
        float(header[0])
    except ValueError:
        pass
    else:
        raise CSVFormatError("header row required, found numbers", 1)
    width = len(header)
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not v.strip() for v in row):
            continue
        if len(row) != width:
            raise CSVFormatError(f"expected {width} fields, found {len(row)}", lineno)
        try:
            rows.append([float(v) for v in row])
        except ValueError as exc:
            raise CSVFormatError(f"non-numeric field ({exc})", lineno) from None
    if not rows:
        raise CSVFormatError("no data rows", 2)
    return np.array(rows, dtype=float)


def format_numeric_csv(array, header) -> str:
    array = np.atleast_2d(np.asarray(array, dtype=float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in array:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()

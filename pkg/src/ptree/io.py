"""CSV ingestion and output.

Input: one observation per row, comma separated, optional header line,
``.`` as the decimal mark.  Blank lines and lines starting with ``#`` are
skipped.  The first offending row aborts the read with its line number.
Output floats use 17 significant digits so they read back exactly.
"""

import csv
import io
import math
from typing import Optional, Sequence

import numpy as np

from .errors import DataParseError


def _is_number(field):
    try:
        float(field)
    except ValueError:
        return False
    return True


def parse_csv(text_or_stream, dim: Optional[int] = None):
    """Parse numeric CSV data.

    Returns
    -------
    points : ndarray of shape (n, d)
    header : list of str or None
    line_numbers : ndarray of int
        Source line of every returned row (1-based).
    """
    stream = io.StringIO(text_or_stream) if isinstance(text_or_stream, str) else text_or_stream
    rows, lines = [], []
    header = None
    width = dim
    first = True
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in next(csv.reader([line]))]
        if first:
            first = False
            if not all(_is_number(f) for f in fields):
                header = fields
                if width is None:
                    width = len(fields)
                elif width != len(fields):
                    raise DataParseError(lineno, f"header has {len(fields)} columns, "
                                                 f"expected {width}")
                continue
        if width is None:
            width = len(fields)
        if len(fields) != width:
            raise DataParseError(lineno, f"expected {width} columns, found {len(fields)}")
        vals = []
        for k, f in enumerate(fields):
            try:
                v = float(f)
            except ValueError:
                raise DataParseError(lineno, f"column {k + 1}: {f!r} is not a number") from None
            if not math.isfinite(v):
                raise DataParseError(lineno, f"column {k + 1}: non-finite value {f!r}")
            vals.append(v)
        rows.append(vals)
        lines.append(lineno)
    if width is None:
        width = 1
    points = np.array(rows, dtype=float).reshape(len(rows), width)
    return points, header, np.array(lines, dtype=np.int64)


def read_csv(path, dim: Optional[int] = None):
    with open(path, newline="") as fh:
        return parse_csv(fh, dim)


def fmt(v):
    return format(float(v), ".17g")


def write_csv(stream, header: Sequence[str], columns):
    """Write equal-length numeric ``columns`` under ``header``."""
    stream.write(",".join(header) + "\n")
    cols = [np.asarray(c, dtype=float) for c in columns]
    for row in zip(*cols):
        stream.write(",".join(fmt(v) for v in row) + "\n")

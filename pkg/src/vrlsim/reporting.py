"""JSON/CSV encoding helpers shared by the report writers."""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from numbers import Integral


def num(x):
    """JSON-safe number: exact rationals become ``"p/q"`` strings."""
    if isinstance(x, bool):
        return x
    if isinstance(x, Integral):
        return int(x)
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return float(x)


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()

"""CSV output with round-trip float formatting."""

from __future__ import annotations

import csv
import io
import math
from typing import Sequence

import numpy as np

OUT_OF_DOMAIN = "out_of_domain"


def format_float(x: float) -> str:
    """17 significant digits: enough to reproduce any float64 exactly."""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return OUT_OF_DOMAIN
    return format(x, ".17g")


def render_csv(header: Sequence[str], columns: Sequence[Sequence[float | str]]) -> str:
    """CSV text; NaN cells (and explicit tokens) are written as the out-of-domain marker."""
    n = len(columns[0]) if columns else 0
    if any(len(c) != n for c in columns):
        raise ValueError("columns must have equal length")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i in range(n):
        writer.writerow([format_float(col[i]) for col in columns])
    return buf.getvalue()


def write_csv(path: str, header: Sequence[str], columns: Sequence[Sequence[float | str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(render_csv(header, columns))


def masked(values, valid) -> np.ndarray:
    """Copy of ``values`` with NaN (rendered out-of-domain) where ``valid`` is False."""
    out = np.array(values, dtype=np.float64, copy=True)
    out[~np.asarray(valid, dtype=bool)] = np.nan
    return out

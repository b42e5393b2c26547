"""Plain CSV tables with a ``#``-comment provenance header."""

from __future__ import annotations

import csv
import io
import json
from typing import Iterable, Sequence, TextIO

import pandas as pd

from . import __version__


def provenance_lines(config: dict | None = None, seed=None) -> list[str]:
    """Header lines naming the tool version, the resolved config and the seed."""
    lines = [f"latent_corr {__version__}"]
    if config is not None:
        lines.append("config: " + json.dumps(config, sort_keys=True, default=str))
    if seed is not None:
        lines.append(f"seed: {seed}")
    return lines


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_table(
    out: TextIO,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    comments: Sequence[str] = (),
) -> None:
    for line in comments:
        out.write(f"# {line}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def table_to_string(columns, rows, comments=()) -> str:
    buf = io.StringIO()
    write_table(buf, columns, rows, comments)
    return buf.getvalue()


def read_table(source) -> pd.DataFrame:
    """Read a table written by :func:`write_table` (path or text stream)."""
    return pd.read_csv(source, comment="#")

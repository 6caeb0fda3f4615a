"""CSV persistence with provenance comment headers.

Every data file starts with `#`-prefixed comment lines: one timestamp line
(the only line allowed to differ between reruns of an identical
configuration) followed by the sorted parameter provenance, then the
column header and the rows. Floats are written with %.12g so identical
inputs give byte-identical bodies.
"""

from __future__ import annotations

import math
import os
from datetime import datetime, timezone

__all__ = ["write_csv", "format_value"]


def format_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.12g}"
    return str(v)


def write_csv(path, columns, rows, params: dict | None = None) -> str:
    """Write rows (sequences matching columns) with a provenance header."""
    path = os.fspath(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    lines = [f"# generated: {datetime.now(timezone.utc).isoformat()}"]
    for key in sorted(params or {}):
        lines.append(f"# {key} = {format_value(params[key])}")
    lines.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(
                f"row of width {len(row)} does not match {len(columns)} columns")
        lines.append(",".join(format_value(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path

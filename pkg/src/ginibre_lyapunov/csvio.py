"""Bit-stable CSV and JSON result files.

CSV layout::

    #key=value            metadata, one per line
    col_a,col_b,...       header
    1.2345678901234567,...

Floats are written with 17 significant digits, which round-trips every IEEE
double exactly.
"""

from __future__ import annotations

import datetime
import functools
import json
import math
import os
import subprocess

import numpy as np

from . import __version__

__all__ = ["format_float", "write_csv", "read_csv", "write_json", "build_id"]


def format_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


@functools.lru_cache(maxsize=1)
def build_id():
    """``git describe`` of the source tree when available, else the version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _fmt_cell(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format_float(v)


def write_csv(path, columns, data, meta=None, timestamp=True):
    """Write a 2-D table with ``#key=value`` metadata lines.

    ``data`` is a sequence of rows or a 2-D array; integer columns are kept
    as integers.  Returns the path.
    """
    lines = []
    for k, v in (meta or {}).items():
        lines.append(f"#{k}={v}")
    lines.append(f"#build={build_id()}")
    if timestamp:
        lines.append("#timestamp=" + datetime.datetime.now(datetime.timezone.utc).isoformat())
    lines.append(",".join(columns))
    for row in data:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells, expected {len(columns)}")
        lines.append(",".join(_fmt_cell(v) for v in row))
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_csv(path):
    """Read a file written by :func:`write_csv`: ``(meta, columns, float array)``."""
    meta, rows, columns = {}, [], None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                meta[k] = v
            elif columns is None:
                columns = line.split(",")
            elif line:
                rows.append([float(c) for c in line.split(",")])
    data = np.array(rows, dtype=float).reshape(len(rows), len(columns or []))
    return meta, columns, data


def _jsonable(o):
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else format_float(f)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return [_jsonable(v) for v in o.tolist()]
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    return o


def write_json(path, obj):
    try:
        with open(path, "w", newline="\n") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path

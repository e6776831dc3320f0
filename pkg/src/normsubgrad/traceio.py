"""Deterministic serialization of traces and reports.

Floats are written with ``repr`` (shortest round-trip form), JSON keys are
sorted and no timestamps are recorded, so replays are byte-identical. Files
are written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("k", "f", "beta", "alpha", "grad_norm", "dist_to_opt", "envelope_grad_norm")


def _cell(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return repr(v) if math.isfinite(v) else ""


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def trace_rows(trace, envelope_norms: dict | None = None):
    K = trace.steps
    env = envelope_norms or {}
    for k in range(len(trace.iterates)):
        yield [
            str(k),
            _cell(trace.values[k]),
            _cell(trace.betas[k]) if k < K else "",
            _cell(trace.alphas[k]) if k < K else "",
            _cell(trace.grad_norms[k]),
            _cell(trace.dist_to_opt[k]) if trace.dist_to_opt is not None else "",
            _cell(env.get(k)),
        ]


def trace_csv(trace, envelope_norms: dict | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(trace_rows(trace, envelope_norms))
    return buf.getvalue()


def write_trace_csv(path, trace, envelope_norms: dict | None = None):
    atomic_write(path, trace_csv(trace, envelope_norms))


def write_json(path, obj):
    atomic_write(path, dumps(obj))


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))

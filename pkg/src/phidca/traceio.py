"""CSV traces and JSON reports, written atomically."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

import numpy as np

COLUMNS = ("k", "F", "gap_primal", "gap_dual", "decrease_residual", "inner_residual",
           "step_norm", "wall_time_ns")
REPORT_KEYS = ("final_F", "final_gap_sum", "iterations", "certificates", "check_failures")


def fmt(v):
    """17 significant digits, enough for an exact float round trip."""
    return "%.17g" % float(v)


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file and ``os.replace``."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_to_csv(trace, dim):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(COLUMNS) + [f"x{i}" for i in range(dim)])
    for r in trace.records:
        row = [str(r.k), fmt(r.F_value), fmt(r.gap_primal), fmt(r.gap_dual),
               fmt(r.decrease_residual), fmt(r.inner_residual), fmt(r.step_norm), str(int(r.wall_time_ns))]
        row += [fmt(v) for v in np.asarray(r.x, dtype=float)]
        w.writerow(row)
    return buf.getvalue()


def write_trace_csv(trace, path, dim):
    atomic_write(path, trace_to_csv(trace, dim))


def read_trace_csv(path):
    """Read a trace CSV.

    Returns
    -------
    header : list of str
    data : ndarray, shape (K, columns)
        Every field as float (``k`` and ``wall_time_ns`` included).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace file")
    header = rows[0]
    if tuple(header[: len(COLUMNS)]) != COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, data


def x_columns(header, data):
    idx = [i for i, h in enumerate(header) if h.startswith("x")]
    return data[:, idx]


def write_report(report, path):
    missing = set(REPORT_KEYS) ^ set(report)
    if missing:
        raise ValueError(f"report keys mismatch: {sorted(missing)}")
    text = json.dumps({k: report[k] for k in REPORT_KEYS}, indent=2, allow_nan=True) + "\n"
    atomic_write(path, text)

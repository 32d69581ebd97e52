"""CSV serialization of traces and jump events (17 significant digits)."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ContractError
from .hybrid import HybridTrace, JumpRecord


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _xnames(n_x: int, suffix: str = "") -> list:
    if n_x == 1:
        return ["x" + suffix]
    return [f"x{i + 1}{suffix}" for i in range(n_x)]


def write_trace_csv(trace: HybridTrace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "j", *_xnames(trace.n_x), "xi1", "xi2"])
        for t, j, q in zip(trace.t, trace.j, trace.q):
            w.writerow([fmt(t), int(j), *map(fmt, q)])
    return path


def write_events_csv(trace: HybridTrace, path) -> Path:
    path = Path(path)
    n = trace.n_x
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "j_before", "guard", *_xnames(n, "_before"), *_xnames(n, "_after")])
        for jr in trace.jumps:
            w.writerow([fmt(jr.t), jr.j_before, jr.active_guard,
                        *map(fmt, jr.state_before[:n]), *map(fmt, jr.state_after[:n])])
    return path


def read_trace_csv(path, meta: dict | None = None) -> HybridTrace:
    """Rebuild a trace from its sample CSV.

    Jump records are recovered from consecutive samples whose jump counter
    increments; the firing neuron is the one whose potential was reset.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ContractError(f"{path}: empty trace file")
    header, body = rows[0], rows[1:]
    if len(header) < 5 or header[:2] != ["t", "j"] or header[-2:] != ["xi1", "xi2"]:
        raise ContractError(f"{path}: unexpected trace header {header}")
    if not body:
        raise ContractError(f"{path}: trace has no samples")
    n_x = len(header) - 4
    try:
        t = np.array([float(r[0]) for r in body])
        j = np.array([int(r[1]) for r in body], dtype=np.int64)
        q = np.array([[float(v) for v in r[2:]] for r in body])
    except (ValueError, IndexError) as exc:
        raise ContractError(f"{path}: malformed trace row ({exc})") from exc
    if q.shape[1] != n_x + 2:
        raise ContractError(f"{path}: ragged trace rows")
    jumps = []
    for k in np.flatnonzero(np.diff(j)):
        before, after = q[k], q[k + 1]
        if j[k + 1] != j[k] + 1 or t[k + 1] != t[k]:
            raise ContractError(f"{path}: inconsistent hybrid time at row {k + 2}")
        if after[n_x] == 0.0 and before[n_x] > 0.0:
            guard = 1
        elif after[n_x + 1] == 0.0 and before[n_x + 1] > 0.0:
            guard = 2
        else:
            guard = 1 if after[n_x] == 0.0 else 2
        jumps.append(JumpRecord(float(t[k]), int(j[k]), guard, tuple(map(float, before)), tuple(map(float, after))))
    return HybridTrace(t, j, q, tuple(jumps), n_x, dict(meta or {}))


def read_events_csv(path) -> list:
    """Rows of the events CSV as dicts with floats and ints decoded."""
    with Path(path).open(newline="") as fh:
        rd = csv.DictReader(fh)
        out = []
        for row in rd:
            d = {k: float(v) for k, v in row.items()}
            d["j_before"] = int(row["j_before"])
            d["guard"] = int(row["guard"])
            out.append(d)
    return out

"""Binary field snapshots and trace CSV files.

Snapshot layout (all little-endian)::

    b"GPEF"  u32 version=1  u32 dim  u32 n[dim]  f64 (a, b)[dim]
    payload: n_0 * ... * n_{dim-1} complex values as interleaved (re, im) f64,
             row-major
"""

from __future__ import annotations

import csv
import os
import struct

import numpy as np

from .grid import SpectralGrid, WaveField
from .solvers import IterationTrace

MAGIC = b"GPEF"
VERSION = 1


class SnapshotError(ValueError):
    pass


def snapshot_bytes(f: WaveField) -> bytes:
    g = f.grid
    head = MAGIC + struct.pack("<II", VERSION, g.dim)
    head += struct.pack(f"<{g.dim}I", *g.n)
    head += struct.pack(f"<{2 * g.dim}d", *(v for ab in g.bounds for v in ab))
    return head + np.ascontiguousarray(f.values, dtype="<c16").tobytes()


def write_field_snapshot(f: WaveField, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(snapshot_bytes(f))
    os.replace(tmp, path)


def parse_snapshot(data: bytes, grid: SpectralGrid | None = None) -> WaveField:
    if data[:4] != MAGIC:
        raise SnapshotError("not a field snapshot (bad magic)")
    try:
        version, dim = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        if dim not in (1, 2):
            raise SnapshotError(f"unsupported dimension {dim}")
        off = 12
        n = struct.unpack_from(f"<{dim}I", data, off)
        off += 4 * dim
        flat = struct.unpack_from(f"<{2 * dim}d", data, off)
        off += 16 * dim
    except struct.error:
        raise SnapshotError("truncated snapshot header") from None
    bounds = tuple(zip(flat[::2], flat[1::2]))
    stored = SpectralGrid(bounds, n)
    if grid is not None and grid != stored:
        raise SnapshotError(f"snapshot grid {stored} does not match requested {grid}")
    payload = data[off:]
    if len(payload) != 16 * stored.size:
        raise SnapshotError(
            f"payload has {len(payload)} bytes, expected {16 * stored.size}"
        )
    values = np.frombuffer(payload, dtype="<c16").reshape(stored.shape)
    return WaveField(stored, values.astype(np.complex128))


def read_field_snapshot(path, grid: SpectralGrid | None = None) -> WaveField:
    with open(path, "rb") as fh:
        return parse_snapshot(fh.read(), grid)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_trace_csv(trace: IterationTrace, path) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IterationTrace.COLUMNS)
        for row in trace.rows():
            w.writerow([_fmt(v) for v in row])


def read_trace_csv(path) -> IterationTrace:
    trace = IterationTrace()
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        missing = set(IterationTrace.COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: trace CSV lacks column(s) {sorted(missing)}")
        for row in reader:
            trace.append(
                int(row["iter"]), float(row["tau"]), float(row["kappa"]),
                float(row["E_relaxed"]), float(row["E_original"]),
                float(row["residual"]), int(row["wall_ns"]), int(row["stage"]),
            )
    trace.status = "loaded"
    return trace

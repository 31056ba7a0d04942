"""
On-disk formats: binary field snapshots and CSV tables.

Snapshot layout (little-endian): 8-byte magic ``TVSNAP01``, uint32 dim,
uint32 node count per axis, float64 time, then the nodal values as float64
in row-major (first axis slowest) order. Round trips are bit-exact.
"""

from __future__ import annotations

import csv
import math
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TVSNAP01"


def write_snapshot(path, nodes, t: float, values) -> None:
    nodes = tuple(int(n) for n in nodes)
    values = np.asarray(values, dtype="<f8").reshape(-1)
    if values.size != int(np.prod(nodes)):
        raise ValueError(f"{values.size} values do not fit grid {nodes}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(f"<I{len(nodes)}I", len(nodes), *nodes))
        fh.write(struct.pack("<d", float(t)))
        fh.write(values.tobytes(order="C"))


def read_snapshot(path):
    """Return ``(nodes, t, values)`` with ``values`` shaped like the grid."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a snapshot file (bad magic)")
    (dim,) = struct.unpack_from("<I", data, 8)
    nodes = struct.unpack_from(f"<{dim}I", data, 12)
    off = 12 + 4 * dim
    (t,) = struct.unpack_from("<d", data, off)
    values = np.frombuffer(data, dtype="<f8", offset=off + 8)
    if values.size != int(np.prod(nodes)):
        raise ValueError(f"{path}: payload size does not match header")
    return tuple(nodes), t, values.reshape(nodes).astype(float)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def write_csv(path, header, rows) -> None:
    """Rows of dicts or sequences; floats written with round-trip precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            vals = [row.get(h, "") for h in header] if isinstance(row, dict) else row
            w.writerow([_fmt(v) for v in vals])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


LEDGER_HEADER = ("step", "t", "energy", "diss_bilap", "diss_lap_u", "num_diss_v", "num_diss_u", "residual")


def ledger_rows(traj):
    """Row 0 carries the initial energy; row n the energy after step n."""
    rows = [(0, traj.times[0], traj.initial_energy, 0.0, 0.0, 0.0, 0.0, 0.0)]
    for r in traj.ledger:
        rows.append((r.step, r.t, r.energy, r.diss_bilap, r.diss_lap_u, r.num_diss_v, r.num_diss_u, r.residual))
    return rows


def write_ledger(path, traj) -> None:
    write_csv(path, LEDGER_HEADER, ledger_rows(traj))


def audit_ledger(path) -> float:
    """Largest ``|E_n - E_{n-1} + dissipation_n|`` recomputed from the file alone."""
    rows = read_csv(path)
    worst = 0.0
    for prev, cur in zip(rows, rows[1:]):
        lhs = (float(cur["energy"]) - float(prev["energy"]) + float(cur["diss_bilap"]) + float(cur["diss_lap_u"])
               + float(cur["num_diss_v"]) + float(cur["num_diss_u"]))
        worst = max(worst, abs(lhs))
    return worst


def write_monitor(path, series) -> None:
    write_csv(path, ("t", "value"), zip(series.times, series.values))

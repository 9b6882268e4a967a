"""Field and trajectory serialization.

Binary container: a flat little-endian layout (magic, version, n, v_max,
eps, then the raw float64 node values in C order).  CSV: one row per node
with columns ix, iy, iz, vx, vy, vz, f.  All text output uses shortest
round-trip float formatting so identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .grid import DistributionField, VelocityGrid

_MAGIC = b"LFDF"
_VERSION = 1
_HEADER = struct.Struct("<4sIQdd")  # magic, version, n, v_max, eps


def save_field(path, field: DistributionField) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, field.grid.n,
                              field.grid.v_max, field.eps))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_field(path) -> DistributionField:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, n, v_max, eps = _HEADER.unpack(head)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError(f"not a field container: {path}")
        raw = fh.read(8 * n**3)
    values = np.frombuffer(raw, dtype="<f8").reshape(n, n, n).copy()
    return DistributionField(VelocityGrid(n, v_max), values, eps)


def fmt(x) -> str:
    """Shortest round-trip decimal form, deterministic across runs."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def save_field_csv(path, field: DistributionField) -> None:
    g = field.grid
    idx = np.arange(g.n)
    ix, iy, iz = np.meshgrid(idx, idx, idx, indexing="ij")
    with open(path, "w") as fh:
        fh.write("ix,iy,iz,vx,vy,vz,f\n")
        rows = zip(ix.ravel(), iy.ravel(), iz.ravel(),
                   g.vx.ravel(), g.vy.ravel(), g.vz.ravel(),
                   field.values.ravel())
        for a, b, c, x, y, z, f in rows:
            fh.write(f"{a},{b},{c},{fmt(x)},{fmt(y)},{fmt(z)},{fmt(f)}\n")


def load_field_csv(path, grid: VelocityGrid, eps: float) -> DistributionField:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    values = np.zeros(grid.shape)
    ii = data[:, 0].astype(int)
    jj = data[:, 1].astype(int)
    kk = data[:, 2].astype(int)
    values[ii, jj, kk] = data[:, 6]
    return DistributionField(grid, values, eps)


TRAJECTORY_COLUMNS = ("t", "m0", "m2", "m3", "m4", "M0", "Mg2", "Dg2",
                      "S_eps", "D_eps", "H_rel", "L12_dist", "fmin", "fmax",
                      "one_minus_eps_f_min")


def save_trajectory_csv(path, records) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(fmt(getattr(rec, col))
                              for col in TRAJECTORY_COLUMNS) + "\n")


def dump_json(path, payload) -> None:
    """Canonical JSON: sorted keys, no trailing whitespace drift."""
    def default(obj):
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        raise TypeError(f"not JSON serializable: {type(obj)}")

    text = json.dumps(payload, sort_keys=True, indent=2, default=default,
                      allow_nan=True)
    with open(path, "w") as fh:
        fh.write(text + "\n")

"""Grids, sampled fields, directions and the snapshot/CSV formats.

Fields are stored C-ordered with the x axis slowest, so ``values[i, j, k]``
is the sample at ``origin + h * (i, j, k)``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import FormatError, OutOfDomainError

MAGIC = b"WBSL"
VERSION = 1
_HEADER = struct.Struct("<4sI3Id3dd")


def unit(v, tol=None):
    """Return ``v`` as a float unit 3-vector.

    With ``tol`` given the input must already be unit length within ``tol``;
    otherwise it is normalised.
    """
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise OutOfDomainError("zero vector has no direction")
    if tol is not None and abs(n - 1.0) > tol:
        raise OutOfDomainError(f"direction has norm {n}, expected 1")
    return v / n


def fibonacci_directions(n):
    """Near-uniform unit vectors on the sphere (golden-angle spiral).

    Returns the directions and equal quadrature weights summing to 4*pi.
    """
    if n < 1:
        raise OutOfDomainError("need at least one direction")
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * np.arange(n)
    dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return dirs, np.full(n, 4.0 * np.pi / n)


@dataclass(frozen=True)
class Grid3D:
    origin: tuple
    spacing: float
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", float(self.spacing))
        if len(self.origin) != 3 or len(self.dims) != 3:
            raise ValueError("origin and dims must have three entries")
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if min(self.dims) < 2:
            raise ValueError("each axis needs at least two nodes")

    @classmethod
    def cube(cls, half_width, spacing):
        """Grid on ``[-L, L]^3``; ``2L/h`` must be an integer."""
        cells = 2.0 * half_width / spacing
        n = int(round(cells))
        if abs(cells - n) > 1e-9 * max(1.0, cells):
            raise ValueError(f"2L/h = {cells} is not an integer")
        return cls((-half_width,) * 3, spacing, (n + 1,) * 3)

    @property
    def size(self):
        return int(np.prod(self.dims))

    @property
    def lower(self):
        return np.array(self.origin)

    @property
    def upper(self):
        return np.array(self.origin) + self.spacing * (np.array(self.dims) - 1)

    def axis(self, a):
        return self.origin[a] + self.spacing * np.arange(self.dims[a])

    def mesh(self):
        return np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij")

    def contains(self, points, pad=0.0):
        p = np.asarray(points, dtype=float)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(self.upper))))
        return np.all((p >= self.lower + pad - tol) & (p <= self.upper - pad + tol), axis=-1)

    def index_of(self, point):
        """Integer node index of ``point``, which must coincide with a node."""
        rel = (np.asarray(point, dtype=float) - self.lower) / self.spacing
        idx = np.rint(rel)
        if np.any(np.abs(rel - idx) > 1e-9) or np.any(idx < 0) or np.any(idx >= self.dims):
            raise OutOfDomainError(f"{point} is not a grid node")
        return tuple(int(i) for i in idx)

    def node(self, index):
        return self.lower + self.spacing * np.asarray(index, dtype=float)


@dataclass
class ScalarField3D:
    grid: Grid3D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"{v.size} values for a grid of {self.grid.size} nodes")
        v = v.reshape(self.grid.dims)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        self.values = v

    @classmethod
    def sample(cls, grid, f, time=0.0):
        X, Y, Z = grid.mesh()
        pts = np.stack([X, Y, Z], axis=-1)
        return cls(grid, f(pts), time)


@dataclass
class TimeSeries:
    t0: float
    dt: float
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self.samples))

    def __call__(self, t):
        """Cubic-spline value at ``t``; zero outside the sampled window."""
        t = np.asarray(t, dtype=float)
        times = self.times
        out = CubicSpline(times, self.samples)(np.clip(t, times[0], times[-1]))
        return np.where((t < times[0]) | (t > times[-1]), 0.0, out)

    def to_csv(self, path, header=None):
        write_series_csv(path, self.times, self.samples, header or self.meta)


def trilinear_eval(field_, point):
    """Trilinear interpolation of a sampled field at one point."""
    g = field_.grid
    p = np.asarray(point, dtype=float).reshape(3)
    if not g.contains(p):
        raise OutOfDomainError(f"point {p} lies outside the field box")
    rel = (p - g.lower) / g.spacing
    i0 = np.minimum(np.floor(rel).astype(int), np.array(g.dims) - 2)
    i0 = np.maximum(i0, 0)
    f = rel - i0
    v = field_.values
    out = 0.0
    for di in (0, 1):
        wx = f[0] if di else 1.0 - f[0]
        for dj in (0, 1):
            wy = f[1] if dj else 1.0 - f[1]
            for dk in (0, 1):
                wz = f[2] if dk else 1.0 - f[2]
                out += wx * wy * wz * v[i0[0] + di, i0[1] + dj, i0[2] + dk]
    return float(out)


def write_field(field_, path):
    g = field_.grid
    head = _HEADER.pack(MAGIC, VERSION, *g.dims, g.spacing, *g.origin, float(field_.time))
    payload = np.ascontiguousarray(field_.values, dtype="<f8").tobytes()
    Path(path).write_bytes(head + payload)


def read_field(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("file shorter than the snapshot header")
    magic, version, nx, ny, nz, h, ox, oy, oz, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if min(nx, ny, nz) < 2 or not h > 0:
        raise FormatError(f"invalid dims {(nx, ny, nz)} or spacing {h}")
    count = nx * ny * nz
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise FormatError(f"payload holds {len(body)} bytes, header declares {8 * count}")
    values = np.frombuffer(body, dtype="<f8").astype(float).reshape(nx, ny, nz)
    return ScalarField3D(Grid3D((ox, oy, oz), h, (nx, ny, nz)), values, t)


def fmt(x):
    """Deterministic shortest round-trip float formatting for CSV output."""
    return repr(float(x))


def write_series_csv(path, t, values, header=None):
    lines = []
    if header:
        lines.append("# " + json.dumps(header, sort_keys=True))
    lines.append("t,value")
    lines.extend(f"{fmt(a)},{fmt(b)}" for a, b in zip(t, values))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")

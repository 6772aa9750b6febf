"""Leapfrog simulation of the scattered field of a plane-wave impulse.

The scattered field solves ``u_tt - Lap u + q u = s(x) delta_eps(t - x.w)``
with ``s = -q`` by default, a Gaussian ``delta_eps`` of width eps, zero data
before the source switches on, and homogeneous Dirichlet walls on the box
``[-L, L]^3``. No absorbing layer is used: probes carry a causality horizon
computed from the source support and the walls, and a run refuses probes
whose recording window extends past it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange
from scipy.ndimage import map_coordinates

from .errors import ConfigurationError, InstabilityError, OutOfDomainError
from .geometry import Grid3D, ScalarField3D, TimeSeries, unit
from .potential import Zero

CFL = 0.9 / math.sqrt(3.0)
# Source tail beyond this many widths is below 1e-30 of the peak.
_SOURCE_CUT = 12.0
# Stepping is restricted to the light cone of the source widened by this
# many cells; the discrete field beyond it stays below round-off.
_ACTIVE_PAD = 12


def gauss_delta(s, eps):
    s = np.asarray(s, dtype=float)
    return np.exp(-0.5 * (s / eps) ** 2) / (eps * math.sqrt(2.0 * math.pi))


def set_threads(n):
    if n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


@njit(parallel=True, cache=True)
def _free_step(prev, cur, nxt, c2):
    nx, ny, nz = cur.shape
    for i in prange(1, nx - 1):
        for j in range(1, ny - 1):
            for k in range(1, nz - 1):
                c = cur[i, j, k]
                lap = (cur[i + 1, j, k] + cur[i - 1, j, k] + cur[i, j + 1, k]
                       + cur[i, j - 1, k] + cur[i, j, k + 1] + cur[i, j, k - 1] - 6.0 * c)
                nxt[i, j, k] = 2.0 * c - prev[i, j, k] + c2 * lap


@njit(parallel=True, cache=True)
def _free_step_box(prev, cur, nxt, c2, lo0, hi0, lo1, hi1, lo2, hi2):
    for i in prange(lo0, hi0):
        for j in range(lo1, hi1):
            for k in range(lo2, hi2):
                c = cur[i, j, k]
                lap = (cur[i + 1, j, k] + cur[i - 1, j, k] + cur[i, j + 1, k]
                       + cur[i, j - 1, k] + cur[i, j, k + 1] + cur[i, j, k - 1] - 6.0 * c)
                nxt[i, j, k] = 2.0 * c - prev[i, j, k] + c2 * lap


@njit(parallel=True, cache=True)
def _local_terms(cur, nxt, qloc, sloc, phase, i0, j0, k0, t, eps, dt2, cut):
    nx, ny, nz = qloc.shape
    norm = 1.0 / (eps * math.sqrt(2.0 * math.pi))
    for a in prange(nx):
        for b in range(ny):
            for c in range(nz):
                i, j, k = i0 + a, j0 + b, k0 + c
                val = -qloc[a, b, c] * cur[i, j, k]
                sv = sloc[a, b, c]
                if sv != 0.0:
                    arg = (t - phase[a, b, c]) / eps
                    if abs(arg) < cut:
                        val += sv * norm * math.exp(-0.5 * arg * arg)
                nxt[i, j, k] += dt2 * val


@njit(cache=True)
def _reflect_accumulate(acc, vals, wts, phase, t, tau0, dtau, dt):
    # G(tau_m) += w(x) u(x, t) * hat((2 tau_m - x.w - t) / dt)
    n = acc.shape[0]
    for p in range(vals.shape[0]):
        lo = (t + phase[p] - dt) / 2.0
        m0 = int(math.ceil((lo - tau0) / dtau))
        if m0 < 0:
            m0 = 0
        m = m0
        while m < n:
            arg = (2.0 * (tau0 + m * dtau) - phase[p] - t) / dt
            if arg >= 1.0:
                break
            if arg > -1.0:
                acc[m] += wts[p] * vals[p] * (1.0 - abs(arg))
            m += 1


def _ball_box(grid, center, radius, pad=1):
    """Index bounds of the node box covering a ball, clipped to the interior."""
    lo = np.floor((np.asarray(center) - radius - grid.lower) / grid.spacing).astype(int) - pad
    hi = np.ceil((np.asarray(center) + radius - grid.lower) / grid.spacing).astype(int) + pad + 1
    lo = np.maximum(lo, 1)
    hi = np.minimum(hi, np.array(grid.dims) - 1)
    if np.any(hi <= lo):
        return None
    return lo, hi


def _box_points(grid, lo, hi):
    axes = [grid.axis(a)[lo[a]:hi[a]] for a in range(3)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@dataclass
class WaveScenario:
    """One forward simulation.

    ``source`` is an optional callable s(x) replacing the default -q(x) in
    the right-hand side s(x) delta_eps(t - x.w); ``source_support`` is a
    ball (center, radius) containing its support.
    """

    potential: object
    omega: np.ndarray
    half_width: float = 3.0
    h: float = 1.0 / 16
    t_end: float = 2.0
    dt: float | None = None
    eps: float | None = None
    t_start: float | None = None
    source: object = None
    source_support: tuple | None = None

    def __post_init__(self):
        self.omega = unit(self.omega, tol=1e-12)
        if self.eps is None:
            self.eps = 4.0 * self.h
        if self.dt is None:
            self.dt = CFL * self.h
        if self.dt > CFL * self.h * (1.0 + 1e-12):
            raise ConfigurationError(
                f"dt = {self.dt} violates the CFL bound dt <= 0.9 h/sqrt(3) = {CFL * self.h}")
        if not self.eps > 0:
            raise ConfigurationError("source width must be positive")
        if self.source is None:
            q = self.potential
            self.source = lambda x: -q.value(x)
            self.source_support = q.support()
        elif self.source_support is None:
            raise ConfigurationError("a custom source needs its support ball")
        c, R = self.source_support
        self.source_support = (np.asarray(c, dtype=float), float(R))
        if self.t_start is None:
            self.t_start = self.t_emit - 3.0 * self.eps
        if self.t_start > self.t_emit:
            raise ConfigurationError(
                f"t_start = {self.t_start} is after the source switches on at {self.t_emit}")
        if self.t_end <= self.t_start:
            raise ConfigurationError("empty time range")
        self.grid = Grid3D.cube(self.half_width, self.h)

    @property
    def t_emit(self):
        """Earliest time the source is non-negligible (3 widths ahead of it)."""
        c, R = self.source_support
        if R == 0.0:
            return -1.0 - 3.0 * self.eps
        return float(c @ self.omega) - R - 3.0 * self.eps

    @property
    def nsteps(self):
        return int(math.ceil((self.t_end - self.t_start) / self.dt - 1e-9)) + 1

    def times(self):
        return self.t_start + self.dt * np.arange(self.nsteps)

    def clean_until_point(self, y):
        """Time before which no wall reflection can reach the point y."""
        c, R = self.source_support
        y = np.asarray(y, dtype=float)
        L = self.half_width
        best = np.inf
        for k in range(3):
            for side in (-1.0, 1.0):
                img = c.copy()
                img[k] = 2.0 * side * L - c[k]
                best = min(best, float(np.linalg.norm(y - img)) - R)
        return self.t_emit + best

    def clean_until_ball(self, center, radius):
        center = np.asarray(center, dtype=float)
        c, R = self.source_support
        L = self.half_width
        best = np.inf
        for k in range(3):
            for side in (-1.0, 1.0):
                img = c.copy()
                img[k] = 2.0 * side * L - c[k]
                best = min(best, float(np.linalg.norm(center - img)) - R - radius)
        return self.t_emit + best

    def clean_until_plane(self):
        """Whole-plane integrals are exact until the signal first meets a wall."""
        c, R = self.source_support
        return self.t_emit + self.half_width - float(np.max(np.abs(c))) - R


def min_half_width(t_end, t_emit, extent=1.0, margin=0.0, kind="ball"):
    """Smallest box half-width keeping a probe clean until ``t_end``.

    ``kind="ball"`` covers probes inside the ball of radius ``extent`` about
    the origin (reflections must travel out and back); ``kind="plane"``
    covers whole-plane integrals, which see the outgoing signal reach the
    walls directly.
    """
    span = t_end - t_emit
    if kind == "plane":
        return extent + span + margin
    return extent + span / 2.0 + margin


# ----------------------------------------------------------------- probes


class Probe:
    name: str

    def setup(self, sc):
        pass

    def clean_until(self, sc):
        return np.inf

    def record(self, n, t, prev, cur, nxt):
        raise NotImplementedError

    def result(self, sc):
        raise NotImplementedError


def _plane_weights(grid, stack, npts):
    """Trilinear plane sums as node weights: layer j sum = W[j] . u[nodes].

    ``stack`` holds the quadrature points of the four normal layers one after
    another; each layer's sum of interpolated values is a fixed linear
    combination of grid nodes, accumulated here once.
    """
    rel = (stack - grid.lower) / grid.spacing
    i0 = np.clip(np.floor(rel).astype(np.int64), 0, np.array(grid.dims) - 2)
    f = rel - i0
    layer = np.repeat(np.arange(4), npts)
    flat, wts, lay = [], [], []
    for di in (0, 1):
        for dj in (0, 1):
            for dk in (0, 1):
                idx = np.ravel_multi_index(
                    ((i0[:, 0] + di), (i0[:, 1] + dj), (i0[:, 2] + dk)), grid.dims)
                w = ((f[:, 0] if di else 1 - f[:, 0]) * (f[:, 1] if dj else 1 - f[:, 1])
                     * (f[:, 2] if dk else 1 - f[:, 2]))
                flat.append(idx)
                wts.append(w)
                lay.append(layer)
    flat, wts, lay = np.concatenate(flat), np.concatenate(wts), np.concatenate(lay)
    nodes, inv = np.unique(flat, return_inverse=True)
    W = np.zeros((4, len(nodes)))
    np.add.at(W, (lay, inv), wts)
    return nodes, W


@dataclass
class PlaneProbe(Probe):
    """Records int u dS and int (theta . grad u) dS on x . theta = offset."""

    name: str
    theta: np.ndarray
    offset: float = 1.0
    t_max: float = np.inf  # recording stops here; later samples are not needed
    _u: list = field(default_factory=list, repr=False)
    _du: list = field(default_factory=list, repr=False)

    def setup(self, sc):
        self.theta = unit(self.theta, tol=1e-12)
        g = sc.grid
        h = g.spacing
        self._u, self._du = [], []
        axis = np.flatnonzero(np.abs(self.theta) == 1.0)
        self._lattice = None
        if len(axis) == 1:
            k = int(axis[0])
            sign = float(self.theta[k])
            idx = (sign * self.offset - g.origin[k]) / h
            if abs(idx - round(idx)) < 1e-9:
                m = int(round(idx))
                step = int(sign)
                planes = [m + step * j for j in range(4)]
                if min(planes) < 0 or max(planes) >= g.dims[k]:
                    raise OutOfDomainError(f"plane probe {self.name} lies outside the box")
                self._lattice = (k, planes)
        if self._lattice is None:
            e1 = np.cross(self.theta, np.eye(3)[int(np.argmin(np.abs(self.theta)))])
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(self.theta, e1)
            # the field is zero on the plane farther than this from the source
            c, R = sc.source_support
            foot = c + (self.offset - c @ self.theta) * self.theta
            reach = min(sc.t_end, self.t_max) - sc.t_emit + R + 4.0 * h
            n = int(math.ceil(reach / h))
            a = h * np.arange(-n, n + 1)
            pts = foot + a[:, None, None] * e1 + a[None, :, None] * e2
            pts = pts.reshape(-1, 3)
            far = pts + 3.0 * h * self.theta
            near = np.sum((pts - foot) ** 2, axis=1) <= reach * reach
            keep = near & g.contains(pts, pad=h) & g.contains(far, pad=h)
            pts = pts[keep]
            if not len(pts):
                raise OutOfDomainError(f"plane probe {self.name} lies outside the box")
            stack = np.concatenate([pts + j * h * self.theta for j in range(4)])
            self._nodes, self._weights = _plane_weights(g, stack, len(pts))

    def clean_until(self, sc):
        return sc.clean_until_plane() + max(0.0, sc.t_end - self.t_max)

    def record(self, n, t, prev, cur, nxt):
        if t > self.t_max + 1e-12:
            return
        h = self.h_
        if self._lattice is not None:
            k, planes = self._lattice
            s = [float(np.take(cur, p, axis=k).sum()) for p in planes]
        else:
            s = [float(x) for x in self._weights @ cur.ravel()[self._nodes]]
        self._u.append(h * h * s[0])
        self._du.append(h * (-11.0 * s[0] + 18.0 * s[1] - 9.0 * s[2] + 2.0 * s[3]) / 6.0)

    def result(self, sc):
        meta = {"probe": "plane", "theta": self.theta.tolist(), "offset": self.offset}
        return {
            "u": TimeSeries(sc.t_start, sc.dt, np.array(self._u), {**meta, "quantity": "int u dS"}),
            "dn": TimeSeries(sc.t_start, sc.dt, np.array(self._du),
                             {**meta, "quantity": "int theta.grad u dS"}),
        }


@dataclass
class PointProbe(Probe):
    name: str
    point: np.ndarray
    _v: list = field(default_factory=list, repr=False)

    def setup(self, sc):
        self.point = np.asarray(self.point, dtype=float).reshape(3)
        if not sc.grid.contains(self.point):
            raise OutOfDomainError(f"point probe {self.name} lies outside the box")
        self._coords = ((self.point - sc.grid.lower) / sc.h).reshape(3, 1)
        self._v = []

    def clean_until(self, sc):
        return sc.clean_until_point(self.point)

    def record(self, n, t, prev, cur, nxt):
        self._v.append(float(map_coordinates(cur, self._coords, order=1)[0]))

    def result(self, sc):
        return TimeSeries(sc.t_start, sc.dt, np.array(self._v),
                          {"probe": "point", "point": self.point.tolist()})


@dataclass
class NodeHistory(Probe):
    """Full time histories of u at a list of grid nodes."""

    name: str
    points: np.ndarray
    needed: np.ndarray | None = None  # per-point time the record must stay clean
    _rows: list = field(default_factory=list, repr=False)

    def setup(self, sc):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        idx = np.array([sc.grid.index_of(p) for p in self.points]).reshape(-1, 3)
        self._idx = tuple(idx.T)
        self._rows = []

    def clean_until(self, sc):
        clean = np.array([sc.clean_until_point(p) for p in self.points])
        if self.needed is None:
            return float(clean.min())
        return sc.t_end + float(np.min(clean - np.asarray(self.needed)))

    def record(self, n, t, prev, cur, nxt):
        self._rows.append(cur[self._idx].copy())

    def result(self, sc):
        return np.array(self._rows)  # (steps, points)


@dataclass
class RegionHistory(Probe):
    """Full time histories of u on the node box covering a ball."""

    name: str
    center: np.ndarray
    radius: float
    t_max: float = np.inf
    _rows: list = field(default_factory=list, repr=False)

    def setup(self, sc):
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        box = _ball_box(sc.grid, self.center, self.radius)
        if box is None:
            raise OutOfDomainError(f"region {self.name} lies outside the box")
        self._lo, self._hi = box
        self._rows = []

    def clean_until(self, sc):
        return sc.clean_until_ball(self.center, self.radius * math.sqrt(3.0))

    def record(self, n, t, prev, cur, nxt):
        if t <= self.t_max + 1e-12:
            lo, hi = self._lo, self._hi
            self._rows.append(cur[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]].copy())

    def result(self, sc):
        return {"lo": self._lo, "hi": self._hi, "points": _box_points(sc.grid, self._lo, self._hi),
                "values": np.array(self._rows)}


@dataclass
class StarNorm(Probe):
    """Running max of |u| + |u_t| over |x| <= 1, -1 <= x.w, x.w + gap <= t <= 0.

    ``gap`` (in source widths) keeps the smeared wavefront, where u_t carries
    the delta_eps spike of the jump, out of the maximum.
    """

    name: str
    gap: float = 4.0
    t_max: float = 0.0
    value: float = 0.0

    def setup(self, sc):
        box = _ball_box(sc.grid, np.zeros(3), 1.0)
        self._lo, self._hi = box
        pts = _box_points(sc.grid, *box)
        self._phase = pts @ sc.omega
        self._inside = (np.sum(pts * pts, axis=-1) <= 1.0 + 1e-12) & (self._phase >= -1.0 - 1e-12)
        self._gap = self.gap * sc.eps
        self._inv2dt = 0.5 / sc.dt
        self.value = 0.0

    def clean_until(self, sc):
        return sc.clean_until_ball(np.zeros(3), math.sqrt(3.0))

    def record(self, n, t, prev, cur, nxt):
        if t > self.t_max + 1e-12:
            return
        mask = self._inside & (self._phase <= t - self._gap)
        if not mask.any():
            return
        lo, hi = self._lo, self._hi
        sl = (slice(lo[0], hi[0]), slice(lo[1], hi[1]), slice(lo[2], hi[2]))
        val = np.abs(cur[sl]) + np.abs(nxt[sl] - prev[sl]) * self._inv2dt
        self.value = max(self.value, float(val[mask].max()))

    def result(self, sc):
        return self.value


@dataclass
class ReflectedKernel(Probe):
    """G(tau) = sum_x w(x) u(x, 2 tau - x.w) on a tau grid (linear in time).

    ``weights`` is a callable giving w at grid points; it is nonzero only
    inside the ball ``support``.
    """

    name: str
    weights: object
    support: tuple
    tau0: float
    ntau: int
    dtau: float | None = None

    def setup(self, sc):
        box = _ball_box(sc.grid, self.support[0], self.support[1])
        pts = _box_points(sc.grid, *box).reshape(-1, 3)
        w = self.weights(pts)
        keep = w != 0.0
        lo = box[0]
        idx = np.round((pts[keep] - sc.grid.lower) / sc.h).astype(int)
        self._idx = tuple(idx.T)
        self._w = np.ascontiguousarray(w[keep])
        self._phase = np.ascontiguousarray(pts[keep] @ sc.omega)
        if self.dtau is None:
            self.dtau = sc.dt / 2.0
        self._acc = np.zeros(self.ntau)
        del lo

    def clean_until(self, sc):
        return sc.clean_until_ball(self.support[0], self.support[1] * math.sqrt(3.0))

    def record(self, n, t, prev, cur, nxt):
        _reflect_accumulate(self._acc, np.ascontiguousarray(cur[self._idx]), self._w,
                            self._phase, t, self.tau0, self.dtau, self.dt_)

    def result(self, sc):
        return TimeSeries(self.tau0, self.dtau, self._acc.copy(), {"probe": "reflected-kernel"})


@dataclass
class Snapshots(Probe):
    name: str
    times: tuple
    _fields: list = field(default_factory=list, repr=False)

    def setup(self, sc):
        self._steps = {int(round((t - sc.t_start) / sc.dt)): t for t in self.times}
        self._fields = []

    def record(self, n, t, prev, cur, nxt):
        if n in self._steps:
            self._fields.append(ScalarField3D(self._grid, cur.copy(), t))

    def result(self, sc):
        return list(self._fields)


# ------------------------------------------------------------------ runs


@dataclass
class State:
    prev: np.ndarray
    cur: np.ndarray
    n: int = 0


class _Operator:
    """Precomputed potential/source arrays on the box covering both supports."""

    def __init__(self, sc):
        g = sc.grid
        balls = [sc.source_support]
        qc, qr = sc.potential.support()
        if qr > 0:
            balls.append((np.asarray(qc, dtype=float), qr))
        lo = np.array(g.dims)
        hi = np.zeros(3, dtype=int)
        found = False
        for c, r in balls:
            if r <= 0:
                continue
            box = _ball_box(g, c, r)
            if box is not None:
                lo, hi = np.minimum(lo, box[0]), np.maximum(hi, box[1])
                found = True
        self.active = found
        if not found:
            return
        pts = _box_points(g, lo, hi)
        self.lo = lo
        self.q = np.ascontiguousarray(sc.potential.value(pts))
        self.s = np.ascontiguousarray(sc.source(pts))
        self.phase = np.ascontiguousarray(pts @ sc.omega)
        for arr in (self.q, self.s):
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError("potential or source is not finite on the grid")

    def apply(self, cur, nxt, t, sc):
        if self.active:
            lo = self.lo
            _local_terms(cur, nxt, self.q, self.s, self.phase, int(lo[0]), int(lo[1]), int(lo[2]),
                         float(t), float(sc.eps), float(sc.dt ** 2), _SOURCE_CUT)


def initial_state(sc):
    z = np.zeros(sc.grid.dims)
    return State(z.copy(), z, 0)


def step(state, sc, op=None):
    """Advance one leapfrog level; returns the new state."""
    op = op or _Operator(sc)
    nxt = np.zeros_like(state.cur)
    _free_step(state.prev, state.cur, nxt, (sc.dt / sc.h) ** 2)
    op.apply(state.cur, nxt, sc.t_start + state.n * sc.dt, sc)
    if not np.isfinite(nxt).all():
        raise InstabilityError(f"non-finite values at step {state.n + 1}")
    return State(state.cur, nxt, state.n + 1)


@dataclass
class WaveRun:
    scenario: WaveScenario
    records: dict
    steps: int

    def __getitem__(self, name):
        return self.records[name]

    @property
    def times(self):
        return self.scenario.times()


def run(sc, probes=(), check_every=64, strict=True):
    """Integrate the scenario over its time range, feeding every probe.

    With ``strict`` a probe whose causality horizon ends before ``t_end``
    raises a configuration error naming the horizon.
    """
    for p in probes:
        p.setup(sc)
        p.h_ = sc.h
        p.dt_ = sc.dt
        p._grid = sc.grid
        if strict:
            horizon = p.clean_until(sc)
            if horizon < sc.t_end:
                raise ConfigurationError(
                    f"probe {p.name} is only reflection-free until t = {horizon:.4f} "
                    f"< t_end = {sc.t_end:.4f}; enlarge the box")
    op = _Operator(sc)
    dims = sc.grid.dims
    prev, cur, nxt = np.zeros(dims), np.zeros(dims), np.zeros(dims)
    c2 = (sc.dt / sc.h) ** 2
    times = sc.times()
    c, R = sc.source_support
    pad = _ACTIVE_PAD * sc.h
    for n, t in enumerate(times):
        # nodes beyond the light cone of the source (plus a pad) are still zero
        box = _ball_box(sc.grid, c, R + (t - sc.t_start) + pad)
        if box is None:
            _free_step(prev, cur, nxt, c2)
        else:
            lo, hi = box
            _free_step_box(prev, cur, nxt, c2, lo[0], hi[0], lo[1], hi[1], lo[2], hi[2])
        op.apply(cur, nxt, t, sc)
        if n % check_every == 0 and not math.isfinite(float(nxt[::7, ::7, ::7].sum())):
            raise InstabilityError(f"non-finite values at step {n + 1}")
        for p in probes:
            p.record(n, t, prev, cur, nxt)
        prev, cur, nxt = cur, nxt, prev
    if not math.isfinite(float(cur.sum())):
        raise InstabilityError("non-finite values at the final step")
    records = {}
    for p in probes:
        records[p.name] = p.result(sc)
        if isinstance(p, NodeHistory):
            records[p.name + ":points"] = p.points
    return WaveRun(sc, records, len(times))


def zero_source_scenario(**kw):
    return WaveScenario(potential=Zero(), **kw)

"""Wavefront traces of the simulated field and the smallness bounds.

Behind the front t = x.w the scattered field is smooth, so with a Gaussian
source of width eps the simulated field near the front is

    u_eps(x, x.w + k eps) = sum_j a_j(x) eps^j Phi_j(k) + O(eps^J),
    Phi_j(k) = E[(k - Z)_+^j] / j!,  Z ~ N(0, 1),

where a_j are the one-sided time derivatives of u on the front. Fitting the
node histories against Phi_j recovers the jump a_0 and the trace a_1 of u_t,
which are compared with their line-integral formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, PreconditionError
from .geometry import unit
from .potential import c2_norm, ray_integrals
from . import wave


def smeared_ramps(k, terms):
    """Columns Phi_j(k) for j < terms (closed forms up to j = 3)."""
    k = np.asarray(k, dtype=float)
    Phi = ndtr(k)
    phi = np.exp(-0.5 * k * k) / math.sqrt(2.0 * math.pi)
    cols = [Phi, k * Phi + phi, 0.5 * ((k * k + 1.0) * Phi + k * phi),
            ((k ** 3 + 3.0 * k) * Phi + (k * k + 2.0) * phi) / 6.0]
    if not 1 <= terms <= len(cols):
        raise ConfigurationError(f"trace fits support 1 to {len(cols)} terms")
    return np.stack(cols[:terms], axis=-1)


def trace_points(omega, spacing=0.125, radius=1.0, min_depth=0.0):
    """Lattice points in the ball |x| <= radius (spacing shared by all grids).

    ``min_depth`` drops points whose ray entered the unit ball less than
    that distance ago, where the trace is small and dominated by noise.
    """
    omega = unit(omega)
    n = int(round(radius / spacing))
    ax = spacing * np.arange(-n, n + 1)
    pts = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    r2 = np.sum(pts * pts, axis=1)
    keep = r2 <= radius * radius + 1e-12
    if min_depth > 0:
        b = pts @ omega
        entry = -np.sqrt(np.clip(1.0 - (r2 - b * b), 0.0, None))
        keep &= (b - entry) >= min_depth
    return pts[keep]


def fit_traces(history, times, phase, eps, window=(-3.0, 3.0), terms=3):
    """Least-squares trace coefficients a_j at each point.

    ``history`` has shape (steps, points); returns (points, terms) with
    column j holding the estimate of a_j (u_t-trace for j = 1).
    """
    out = np.zeros((history.shape[1], terms))
    scale = eps ** np.arange(terms)
    for p in range(history.shape[1]):
        k = (times - phase[p]) / eps
        sel = (k >= window[0]) & (k <= window[1])
        if sel.sum() < 2 * terms:
            raise ConfigurationError("recording does not cover the trace window")
        A = smeared_ramps(k[sel], terms) * scale
        out[p], *_ = np.linalg.lstsq(A, history[sel, p], rcond=None)
    return out


def jump_trace(q, points, omega):
    """u on the front: -1/2 int_{-inf}^0 q(x + s w) ds."""
    return -0.5 * ray_integrals(q.value, points, omega, q.support())


def transverse_laplacian(q, omega):
    omega = unit(omega)

    def f(x):
        H = q.hessian(x)
        return np.trace(H, axis1=-2, axis2=-1) - np.einsum("...ij,i,j->...", H, omega, omega)

    return f


def ut_trace(q, points, omega):
    """u_t on the front: -q/4 - 1/4 int |s| Lap_perp q(x + s w) ds + C^2/8.

    C is the chord integral int_{-inf}^0 q(x + s w) ds. The middle term is
    the double ray integral of the transverse Laplacian.
    """
    omega = unit(omega)
    pts = np.asarray(points, dtype=float)
    supp = q.support()
    C = ray_integrals(q.value, pts, omega, supp)
    lap = ray_integrals(transverse_laplacian(q, omega), pts, omega, supp, moment=1)
    return -0.25 * q.value(pts) - 0.25 * lap + C * C / 8.0


def trace_probe(omega, eps, spacing=0.125, min_depth=0.0, window=(-3.0, 3.0), name="trace"):
    """Node histories at the trace points, each needed until its window closes."""
    pts = trace_points(omega, spacing, min_depth=min_depth)
    return wave.NodeHistory(name, pts, needed=pts @ unit(omega) + window[1] * eps)


def trace_scenario(q, omega, h, eps=None, half_width=3.0, window=(-3.0, 3.0)):
    """Scenario long enough to cover the trace window at every point of B."""
    eps = 4.0 * h if eps is None else eps
    return wave.WaveScenario(q, omega, half_width=half_width, h=h, eps=eps,
                             t_end=1.0 + window[1] * eps + 2 * h)


@dataclass
class TraceReport:
    points: np.ndarray
    measured: np.ndarray
    expected: np.ndarray
    mismatch: float


def _relative(measured, expected):
    den = float(np.linalg.norm(expected))
    num = float(np.linalg.norm(measured - expected))
    if den == 0.0:
        return num
    return num / den


def wavefront_trace_check(run, q, probe="trace", window=(-3.0, 3.0), terms=3):
    """Fitted jump a_0 against -1/2 chord integral; relative L2 mismatch."""
    sc = run.scenario
    pts = _probe_points(run, probe)
    fit = fit_traces(run[probe], sc.times(), pts @ sc.omega, sc.eps, window, terms)
    expected = jump_trace(q, pts, sc.omega)
    return TraceReport(pts, fit[:, 0], expected, _relative(fit[:, 0], expected))


def ut_characteristic_check(run, q, probe="trace", window=(-3.0, 3.0), terms=3):
    """Fitted u_t trace a_1 against its line-integral formula."""
    sc = run.scenario
    pts = _probe_points(run, probe)
    fit = fit_traces(run[probe], sc.times(), pts @ sc.omega, sc.eps, window, terms)
    expected = ut_trace(q, pts, sc.omega)
    return TraceReport(pts, fit[:, 1], expected, _relative(fit[:, 1], expected))


def _probe_points(run, probe):
    pts = run.records.get(probe + ":points")
    if pts is None:
        raise ConfigurationError(f"run has no point list for probe {probe!r}")
    return pts


def u_star_norm(run, q=None, probe="star", trace="trace"):
    """max |u| + |u_t| over |x| <= 1, -1 <= x.w <= t <= 0.

    Off the front the maximum comes from the running recorder, which skips a
    strip of a few source widths behind t = x.w where u_t carries the smeared
    jump. On the front the fitted traces |a_0| + |a_1| are used instead.
    """
    if probe not in run.records:
        raise ConfigurationError("run did not record the star-norm region")
    best = float(run[probe])
    if trace in run.records:
        sc = run.scenario
        pts = _probe_points(run, trace)
        sel = (pts @ sc.omega) <= 0.0
        if sel.any():
            fit = fit_traces(run[trace][:, sel], sc.times(), pts[sel] @ sc.omega, sc.eps)
            best = max(best, float(np.max(np.abs(fit[:, 0]) + np.abs(fit[:, 1]))))
    return best


@dataclass
class StarReport:
    u_star: float
    c2: float
    ratio: float  # ||u||_* / ||q||_C2, bounded by 8
    holds: bool


def star_bound_check(q, omega, h=1.0 / 16, half_width=3.0):
    """Measure ||u||_* for the plane-wave problem and compare with 8 ||q||_C2."""
    omega = unit(omega)
    eps = 4.0 * h
    sc = wave.WaveScenario(q, omega, half_width=half_width, h=h, eps=eps, t_end=3.0 * eps + 2 * h)
    pts = trace_points(omega, 0.125)
    pts = pts[pts @ omega <= 0.0]
    probes = [wave.StarNorm("star"),
              wave.NodeHistory("trace", pts, needed=pts @ omega + 3.0 * eps)]
    r = wave.run(sc, probes)
    u = u_star_norm(r)
    c2 = c2_norm(q).total
    ratio = u / c2 if c2 > 0 else 0.0
    return StarReport(u, c2, ratio, bool(u <= 8.0 * c2 * (1.0 + 1e-12)))


def cylinder_profile(radial, axial, omega):
    """f(x) = b(|x_perp|) c(x.w) with b, c given as (value, derivative) pairs.

    Returns callables for f and g = w . grad f, and a bounding ball for the
    part of supp f with x.w <= the end of the axial profile.
    """
    omega = unit(omega)

    def parts(x):
        x = np.asarray(x, dtype=float)
        z = x @ omega
        perp = np.linalg.norm(x - z[..., None] * omega, axis=-1)
        return perp, z

    def f(x):
        perp, z = parts(x)
        return radial[0](perp) * axial[0](z)

    def g(x):
        perp, z = parts(x)
        return radial[0](perp) * axial[1](z)

    return f, g


def cylinder_pairs(omega=(0.0, 0.0, 1.0)):
    """Three (q, f, g, f_support) cases with ||q||_inf <= 1/4.

    Each f is b(|x_perp|) c(x.w) with b supported in the unit disk and c
    vanishing for x.w <= -1, so f lives in the half cylinder of the bound.
    """
    from .potential import Zero, exponential_bump, polynomial_bump

    omega = unit(omega)

    def b(k):
        return lambda r: np.where(r < 1.0, np.clip(1.0 - r * r, 0.0, None) ** k, 0.0)

    def c(k):
        return (lambda z: np.clip(1.0 + z, 0.0, None) ** k,
                lambda z: k * np.clip(1.0 + z, 0.0, None) ** (k - 1))

    support = (-0.5 * omega, math.sqrt(1.25))
    cases = []
    for q, kb, kc in ((Zero(), 3, 3), (exponential_bump(0.25), 3, 3),
                      (polynomial_bump(4, 0.2), 4, 4)):
        f, g = cylinder_profile((b(kb), None), c(kc), omega)
        cases.append((q, f, g, support))
    return cases


@dataclass
class CharacteristicReport:
    a_max: float
    f_star: float
    holds: bool
    ratio: float
    a_simulated: float  # the part of a_max measured off the front


def characteristic_bound_check(q, f, g, f_support, omega, h=1.0 / 16, half_width=3.0,
                               z_top=0.0, samples=None):
    """Solve the characteristic problem a(x, x.w) = f and test max|a| <= 2 ||f||_*.

    ``f`` and ``g = w . grad f`` are callables; ``f_support`` is a ball
    containing the part of supp f that can influence the region t <= 0.
    The jump construction a H(t - x.w) solves the wave equation with source
    2 g(x) delta(t - x.w), so the solver is driven by 2g. ``||a||_inf`` is
    the max of the simulated |a| over |x| <= 1, -1 <= x.w <= t <= 0,
    together with |f| on the front itself.
    """
    omega = unit(omega)
    qmax = c2_norm(q).sup_value
    if qmax > 0.25 + 1e-12:
        raise PreconditionError(f"||q||_inf = {qmax:.4f} exceeds 1/4")
    sc = wave.WaveScenario(q, omega, half_width=half_width, h=h, t_end=z_top,
                           source=lambda x: 2.0 * g(x), source_support=f_support)
    # |a| alone needs no gap: the smeared jump stays within the range of a
    star = wave.StarNorm("a", gap=0.0)
    r = wave.run(sc, [_AbsMax(star)])
    a_off = float(r["a"])
    pts = samples if samples is not None else trace_points(omega, 1.0 / 32)
    on_region = (pts @ omega >= -1.0) & (pts @ omega <= 0.0)
    a_front = float(np.max(np.abs(f(pts[on_region])))) if on_region.any() else 0.0
    # ||f||_* = sup |g| over x.w <= 0: sample the region near the support
    grid_pts = trace_points(omega, 1.0 / 64, radius=float(f_support[1]) + np.linalg.norm(f_support[0]))
    grid_pts = grid_pts[grid_pts @ omega <= 0.0]
    f_star = float(np.max(np.abs(g(grid_pts)))) if len(grid_pts) else 0.0
    a_inf = max(a_off, a_front)
    holds = a_inf <= 2.0 * f_star * (1.0 + 1e-12)
    ratio = a_inf / f_star if f_star else 0.0
    return CharacteristicReport(a_inf, f_star, bool(holds), ratio, a_off)


class _AbsMax(wave.Probe):
    """StarNorm variant tracking max |u| only."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name

    def setup(self, sc):
        self.inner.setup(sc)

    def clean_until(self, sc):
        return self.inner.clean_until(sc)

    def record(self, n, t, prev, cur, nxt):
        st = self.inner
        if t > st.t_max + 1e-12:
            return
        mask = st._inside & (st._phase <= t - st._gap)
        if mask.any():
            lo, hi = st._lo, st._hi
            v = np.abs(cur[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]])
            st.value = max(st.value, float(v[mask].max()))

    def result(self, sc):
        return self.inner.value

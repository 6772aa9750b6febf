"""Far-field data alpha(theta, w, s) extracted from simulated runs.

The pattern is read off a plane probe on x . theta = c (c = 1 by default):

    alpha(theta, w, s) = -(1/2 pi) int_{x.theta = c} theta . grad u (x, c - s) dS,

which for c > 1 uses the transport of plane integrals to map a farther
plane back to the unit one. All data carry the delta_eps smearing of the
source.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, OutOfDomainError
from .geometry import TimeSeries, fmt, unit
from .potential import ball_integral
from . import wave


def _plane_record(run, probe):
    rec = run.records.get(probe)
    if not isinstance(rec, dict) or "dn" not in rec:
        raise ConfigurationError(f"run has no plane probe named {probe!r}")
    return rec


def _to_delay(series, offset, scale):
    """Map a series in t on the plane x.theta = offset to a series in s = offset - t."""
    t_last = series.t0 + series.dt * (len(series.samples) - 1)
    meta = {**series.meta, "variable": "s"}
    return TimeSeries(offset - t_last, series.dt, scale * series.samples[::-1], meta)


def extract_alpha(run, probe):
    """Gradient form of alpha on the s-grid (spacing dt) from a plane probe."""
    rec = _plane_record(run, probe)
    dn = rec["dn"]
    out = _to_delay(dn, dn.meta["offset"], -1.0 / (2.0 * math.pi))
    out.meta.update(form="gradient", eps=run.scenario.eps)
    return out


def extract_alpha_ut(run, probe):
    """u_t form: alpha = (1/2 pi) d/dt int u dS at t = c - s."""
    rec = _plane_record(run, probe)
    u = rec["u"]
    du = TimeSeries(u.t0, u.dt, np.gradient(u.samples, u.dt, edge_order=2), u.meta)
    out = _to_delay(du, u.meta["offset"], 1.0 / (2.0 * math.pi))
    out.meta.update(form="u_t", eps=run.scenario.eps)
    return out


def relative_l2(a, b):
    """||a - b|| / ||b|| (plain difference when b vanishes)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    den = float(np.linalg.norm(b))
    num = float(np.linalg.norm(a - b))
    return num / den if den > 0 else num


def transport_check(run, near, far):
    """Normalized sup discrepancy of int u dS between two parallel planes.

    ``near`` and ``far`` name plane probes with the same normal on
    x.theta = tau_1 and tau_2 (both >= 1). The far-plane integral at t is
    compared with the near-plane integral at t - tau_2 + tau_1.
    """
    a, b = _plane_record(run, near)["u"], _plane_record(run, far)["u"]
    t1, t2 = a.meta["offset"], b.meta["offset"]
    if min(t1, t2) < 1.0 - 1e-12:
        raise OutOfDomainError("transport holds for planes with tau >= 1")
    if not np.allclose(a.meta["theta"], b.meta["theta"]):
        raise ConfigurationError("transport compares parallel planes")
    shift = t2 - t1
    t = b.times
    t = t[(t - shift >= a.times[0]) & (t <= run.scenario.clean_until_plane())]
    lhs = b(t)
    rhs = a(t - shift)
    peak = float(np.max(np.abs(lhs)))
    if peak == 0.0:
        return float(np.max(np.abs(lhs - rhs), initial=0.0))
    return float(np.max(np.abs(lhs - rhs)) / peak)


def peak_scattering_coefficient(run, probe, q, window=6.0):
    """Weight of the delta at s = 0 in the forward pattern alpha(w, w, s).

    Returns ``(measured, predicted)``: the integral of the smeared forward
    alpha over |s| <= window * eps, and the coefficient -(1/4 pi) int q
    that the linearization predicts (the smooth O(q^2) part contributes only
    over the short window).
    """
    alpha = extract_alpha(run, probe)
    if not np.allclose(alpha.meta["theta"], run.scenario.omega):
        raise ConfigurationError("the peak coefficient needs the forward plane theta = w")
    s = alpha.times
    sel = np.abs(s) <= window * run.scenario.eps
    measured = float(np.trapezoid(alpha.samples[sel], s[sel]))
    predicted = -ball_integral(q) / (4.0 * math.pi)
    return measured, predicted


def support_tail(alpha, bound):
    """max |alpha(s)| for s > bound, relative to the peak of |alpha|."""
    s = alpha.times
    peak = float(np.max(np.abs(alpha.samples)))
    tail = np.abs(alpha.samples[s > bound])
    if peak == 0.0:
        return 0.0
    return float(tail.max(initial=0.0)) / peak


@dataclass
class FriedlanderReport:
    radii: np.ndarray
    deviations: np.ndarray
    rate: float
    offset_gap: float | None
    s: np.ndarray
    limit: np.ndarray


def friedlander_probes(theta, radii, offset=None):
    """Point probes at r theta (and x* + r theta) for each radius."""
    theta = unit(theta)
    probes = [wave.PointProbe(f"r{k}", r * theta) for k, r in enumerate(radii)]
    if offset is not None:
        off = np.asarray(offset, dtype=float)
        if abs(off @ theta) > 1e-12:
            raise ConfigurationError("the offset x* must be orthogonal to theta")
        probes += [wave.PointProbe(f"x{k}", off + r * theta) for k, r in enumerate(radii)]
    return probes


def friedlander_estimate(run, probe, radii, s_grid, offset=False):
    """Deviation of r u(r theta, r - s) from alpha(theta, w, s), and its decay rate.

    The run must carry the plane probe ``probe`` and the point probes made by
    :func:`friedlander_probes`. The rate is the negative log-log slope of the
    relative L2 deviation against r; ``offset_gap`` compares the x*-offset
    series with the axial one at the largest radius.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 3:
        raise ConfigurationError("the decay fit needs at least three radii")
    s = np.asarray(s_grid, dtype=float)
    alpha = extract_alpha(run, probe)
    limit = alpha(s)
    dev = []
    for k, r in enumerate(radii):
        series = run[f"r{k}"]
        dev.append(relative_l2(r * series(r - s), limit))
    dev = np.array(dev)
    rate = float(-np.polyfit(np.log(radii), np.log(dev), 1)[0])
    gap = None
    if offset:
        k = int(np.argmax(radii))
        r = radii[k]
        gap = relative_l2(r * run[f"x{k}"](r - s), r * run[f"r{k}"](r - s))
    return FriedlanderReport(radii, dev, rate, gap, s, limit)


@dataclass
class FarFieldTable:
    """alpha on a shared s-grid for a list of (theta, w) pairs."""

    directions: np.ndarray
    pairs: np.ndarray  # (P, 2) indices into directions: (theta, w)
    s: np.ndarray
    values: np.ndarray  # (P, len(s))
    eps: float
    weights: np.ndarray | None = None  # quadrature weights per pair, when used on S
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.directions = np.atleast_2d(np.asarray(self.directions, dtype=float))
        self.pairs = np.atleast_2d(np.asarray(self.pairs, dtype=int))
        self.s = np.asarray(self.s, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape != (len(self.pairs), len(self.s)):
            raise ValueError("values must be (pairs, s-grid)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("far-field values must be finite")

    def theta(self, k):
        return self.directions[self.pairs[k, 0]]

    def omega(self, k):
        return self.directions[self.pairs[k, 1]]

    def to_csv(self, path):
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta_index", "omega_index", "s", "alpha"])
            for k, (i, j) in enumerate(self.pairs):
                for s, a in zip(self.s, self.values[k]):
                    w.writerow([int(i), int(j), fmt(s), fmt(a)])
        side = {
            "directions": [[float(c) for c in d] for d in self.directions],
            "eps": float(self.eps),
        }
        if self.weights is not None:
            side["weights"] = [float(x) for x in self.weights]
        path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def backscatter_table(runs, probe, directions, weights=None, s_grid=None):
    """Collect alpha(-w, w, s) from one run per direction on a shared s-grid."""
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    series = [extract_alpha(r, probe) for r in runs]
    if s_grid is None:
        lo = max(a.times[0] for a in series)
        hi = min(a.times[-1] for a in series)
        ds = series[0].dt
        s_grid = lo + ds * np.arange(int(math.floor((hi - lo) / ds + 1e-9)) + 1)
    vals = np.array([a(s_grid) for a in series])
    n = len(directions)
    allv = np.concatenate([-directions, directions])
    pairs = np.stack([np.arange(n), n + np.arange(n)], axis=1)
    eps = runs[0].scenario.eps
    return FarFieldTable(allv, pairs, s_grid, vals, eps, weights)

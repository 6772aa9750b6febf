"""Backscattering identities and experiments built on the forward solver.

Conventions. ``alpha(-w, w, s)`` is read off the plane x . (-w) = 1 (or a
farther plane). For two potentials with p = q2 - q1 and alpha = alpha_1 -
alpha_2 the identity checked here is

    8 pi alpha(-w, w, -2 tau) = int_{x.w = tau} p dS
                                + int_{-1}^{tau} int_{x.w = t} k p dS dt.

With the Gaussian source every simulated quantity is the delta_eps time
convolution of the exact one. The left side at -2 tau therefore equals the
exact right side convolved in tau with delta_{eps/2}; the Radon term is
convolved explicitly and the linear kernel term is exactly the reflected
sum of the smeared fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite_e, legendre
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.signal import savgol_filter

from . import farfield, harmonics, radon, wave
from .errors import ConfigurationError, OutOfDomainError, PreconditionError
from .geometry import Grid3D, ScalarField3D, fibonacci_directions, unit
from .potential import Scale, Sum, Zero


# ------------------------------------------------------------ shared helpers


def difference(q2, q1):
    """p = q2 - q1 as a potential."""
    if isinstance(q1, Zero):
        return q2
    return Sum((q2, Scale(q1, -1.0)))


def _is_zero(q):
    return isinstance(q, Zero) or q.support()[1] == 0.0


def smear(f, tau, width, nodes=24):
    """(delta_width * f)(tau) by Gauss-Hermite quadrature; ``f`` is scalar."""
    z, w = hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2.0 * math.pi)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    return np.array([sum(wk * f(t + width * zk) for zk, wk in zip(z, w)) for t in tau])


def plane_scenario(q, omega, h, s_min, offset=1.0, eps=None, t_start=None, margin=0.0,
                   half_width=None):
    """Scenario whose backscatter plane stays reflection-free down to delay ``s_min``.

    The box half-width defaults to the smallest one the plane rule allows; a
    given ``half_width`` below that minimum is rejected.
    """
    eps = 4.0 * h if eps is None else eps
    t_end = offset - s_min + margin
    probe = wave.WaveScenario(q, omega, h=h, eps=eps, t_end=t_end, t_start=t_start)
    c, R = probe.source_support
    extent = max(float(np.max(np.abs(c))) + R, 1.0)
    L = wave.min_half_width(t_end, probe.t_emit, extent=extent, kind="plane")
    L = h * math.ceil(L / h - 1e-9)
    if half_width is not None:
        if half_width < L - 1e-12:
            raise ConfigurationError(
                f"half_width {half_width} is below the causality minimum L = {L} "
                f"for plane data down to s = {s_min}")
        L = float(half_width)
    probe.half_width = L
    probe.grid = Grid3D.cube(L, h)
    return probe


def series_at(run, probe, x):
    """u(x, t) from a region history, trilinear in space."""
    rec = run[probe]
    sc = run.scenario
    pts = rec["points"]
    lo = pts[0, 0, 0]
    rel = (np.asarray(x, dtype=float) - lo) / sc.h
    i0 = np.floor(rel).astype(int)
    shape = np.array(pts.shape[:3])
    if np.any(i0 < 0) or np.any(i0 + 1 >= shape):
        raise OutOfDomainError(f"{x} lies outside the recorded region")
    f = rel - i0
    vals = rec["values"]
    out = np.zeros(vals.shape[0])
    for di in (0, 1):
        for dj in (0, 1):
            for dk in (0, 1):
                wgt = ((f[0] if di else 1 - f[0]) * (f[1] if dj else 1 - f[1])
                       * (f[2] if dk else 1 - f[2]))
                out += wgt * vals[:, i0[0] + di, i0[1] + dj, i0[2] + dk]
    return out


# ------------------------------------------------------------------ kernel


def kernel_k(run1, run2, x, tau, probe="region"):
    """k(x, w, tau) from the region histories of two runs sharing w and grid.

    k = 2 (u1 + u2)(x, 2 tau - x.w) + 2 int_{x.w}^{2 tau - x.w} u1(x, s) u2(x, 2 tau - s) ds,
    linear in time between samples and trapezoidal in s with step close to dt.
    """
    sc1, sc2 = run1.scenario, run2.scenario
    if not np.allclose(sc1.omega, sc2.omega) or sc1.h != sc2.h or sc1.dt != sc2.dt:
        raise ConfigurationError("both runs must share the direction and the grid")
    omega = sc1.omega
    x = np.asarray(x, dtype=float).reshape(3)
    phase = float(x @ omega)
    if not -1.0 - 1e-12 <= phase <= tau + 1e-12:
        raise OutOfDomainError("kernel k is defined for -1 <= x.w <= tau")
    t1, t2 = sc1.times(), sc2.times()
    u1, u2 = series_at(run1, probe, x), series_at(run2, probe, x)
    return _kernel_from_series(t1, u1, t2, u2, phase, tau, sc1.dt)


def _kernel_from_series(t1, u1, t2, u2, phase, tau, dt):
    top = 2.0 * tau - phase
    lin = 2.0 * (np.interp(top, t1, u1) + np.interp(top, t2, u2))
    span = top - phase
    if span <= 0.0:
        return float(lin)
    n = max(1, int(math.ceil(span / dt - 1e-9)))
    s = phase + span * np.arange(n + 1) / n
    prod = np.interp(s, t1, u1) * np.interp(2.0 * tau - s, t2, u2)
    return float(lin + 2.0 * np.trapezoid(prod, s))


# --------------------------------------------------------- identity check


@dataclass
class IdentityReport:
    tau: np.ndarray
    omegas: np.ndarray
    lhs: np.ndarray  # (omegas, tau): 8 pi alpha(-w, w, -2 tau), smeared
    radon: np.ndarray  # Radon term convolved with delta_{eps/2}
    kernel: np.ndarray  # int int k p, smeared
    discrepancy: float
    scale: float
    grid: dict = field(default_factory=dict)

    @property
    def rhs(self):
        return self.radon + self.kernel

    def flipped(self):
        """The same data in the tau -> -tau, w -> -w form used for positive tau."""
        return IdentityReport(-self.tau[::-1], -self.omegas, self.lhs[:, ::-1],
                              self.radon[:, ::-1], self.kernel[:, ::-1],
                              self.discrepancy, self.scale, dict(self.grid))


def identity_check(q1, q2, omegas, tau_range=(-1.25, 1.0), h=1.0 / 16, eps=None,
                   half_width=None):
    """Both sides of the backscatter identity on the tau grid of spacing dt/2.

    The discrepancy is ||lhs - rhs|| / scale over all (w, tau), where the
    scale is the larger of ||8 pi alpha_1|| and ||8 pi alpha_2||.
    """
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    p = difference(q2, q1)
    eps = 4.0 * h if eps is None else eps
    lo, hi = tau_range
    rows = {"lhs": [], "radon": [], "kernel": []}
    scale2 = 0.0
    tau_out = None
    for omega in omegas:
        omega = unit(omega)
        t_start = -1.0 - 6.0 * eps
        runs, datas = [], []
        pc, pr = p.support()
        quadratic = not (_is_zero(q1) or _is_zero(q2))
        for q in (q1, q2):
            if _is_zero(q):
                runs.append(None)
                continue
            sc = plane_scenario(q, omega, h, s_min=-2.0 * hi, eps=eps, t_start=t_start,
                                margin=2 * h, half_width=half_width)
            tau0 = (sc.t_start - 1.0) / 2.0
            probes = [wave.PlaneProbe("back", -omega, 1.0),
                      wave.ReflectedKernel("lin", lambda x, h=h: 2.0 * h ** 3 * p.value(x),
                                           (pc, pr), tau0, sc.nsteps)]
            if quadratic:
                probes.append(wave.RegionHistory("region", pc, pr))
            runs.append(wave.run(sc, probes))
        ref = next(r for r in runs if r is not None) if any(runs) else None
        if ref is None:
            raise ConfigurationError("identity check needs at least one nonzero potential")
        sc = ref.scenario
        tau = (sc.times() - 1.0) / 2.0
        G = [r["back"]["dn"].samples if r is not None else np.zeros(len(tau)) for r in runs]
        lhs = -4.0 * (G[0] - G[1])  # 8 pi * (-1/2 pi) * (G1 - G2)
        kern = sum(r["lin"].samples for r in runs if r is not None)
        if quadratic:
            kern = kern + _quadratic_term(runs[0], runs[1], p, tau)
        sel = (tau >= lo - 1e-12) & (tau <= hi + 1e-12)
        tau = tau[sel]
        rad = smear(lambda t: radon.radon_plane(p, omega, t), tau, eps / 2.0)
        rows["lhs"].append(lhs[sel])
        rows["radon"].append(rad)
        rows["kernel"].append(kern[sel])
        scale2 = max(scale2, *(float(np.sum((4.0 * g[sel]) ** 2)) for g in G))
        tau_out = tau
    lhs = np.array(rows["lhs"])
    rad = np.array(rows["radon"])
    ker = np.array(rows["kernel"])
    scale = math.sqrt(scale2)
    diff = float(np.linalg.norm(lhs - rad - ker))
    disc = diff / scale if scale > 0 else diff
    grid = {"h": h, "eps": eps, "dt": sc.dt, "half_width": sc.half_width}
    return IdentityReport(tau_out, omegas, lhs, rad, ker, disc, scale, grid)


def _quadratic_term(run1, run2, p, tau):
    """sum_x 2 h^3 p(x) int u1(x, s) u2(x, 2 tau - s) ds on the tau grid.

    Causality restricts the s-integral to [x.w, 2 tau - x.w]; the discrete
    time convolution gives the values at 2 tau = 2 t_start + m dt, which are
    then interpolated to ``tau``.
    """
    sc = run1.scenario
    rec1, rec2 = run1["region"], run2["region"]
    pts = rec1["points"].reshape(-1, 3)
    w = 2.0 * sc.h ** 3 * p.value(pts)
    keep = w != 0.0
    u1 = rec1["values"].reshape(rec1["values"].shape[0], -1)[:, keep]
    u2 = rec2["values"].reshape(rec2["values"].shape[0], -1)[:, keep]
    n = u1.shape[0]
    size = 2 * n
    spec = np.fft.rfft(u1, size, axis=0) * np.fft.rfft(u2, size, axis=0)
    conv = np.fft.irfft(spec, size, axis=0)[: 2 * n - 1] @ w[keep] * sc.dt
    tau_c = sc.t_start + 0.5 * sc.dt * np.arange(2 * n - 1)
    return np.interp(tau, tau_c, conv)


# ----------------------------------------------------------- linearization


def linearized_forward(p, theta, omega, s, convention="general"):
    """Derivative of the far-field map at q = 0 applied to p.

    For theta != w this is -1/(4 pi |theta - w|) times the integral of p over
    x . (theta - w) = s; for theta = w the data are a delta at s = 0 and the
    returned value is its coefficient -(1/4 pi) int p. ``convention="double-delay"``
    gives the backscatter variant -1/(8 pi) int_{x.w = -2 s} p dS.
    """
    theta, omega = unit(theta), unit(omega)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    d = theta - omega
    nd = float(np.linalg.norm(d))
    if nd < 1e-12:
        from .potential import ball_integral
        val = -ball_integral(p) / (4.0 * math.pi)
        out = np.full(s_arr.shape, val)
    elif convention == "double-delay":
        if not np.allclose(theta, -omega):
            raise ConfigurationError("the double-delay convention covers backscatter only")
        out = np.array([-radon.radon_plane(p, omega, -2.0 * si) / (8.0 * math.pi) for si in s_arr])
    elif convention == "general":
        n = d / nd
        out = np.array([-radon.radon_plane(p, n, si / nd) / (4.0 * math.pi * nd) for si in s_arr])
    else:
        raise ConfigurationError(f"unknown convention {convention!r}")
    return out if np.ndim(s) else float(out[0])


def linearized_smeared(p, theta, omega, s, eps, convention="general"):
    """delta_eps * linearized_forward in s (the form the solver produces)."""
    return smear(lambda t: linearized_forward(p, theta, omega, t, convention), s, eps)


@dataclass
class BornReport:
    amplitudes: np.ndarray
    errors: np.ndarray
    order: float
    ratios: np.ndarray
    s: np.ndarray


def born_convergence(p, amplitudes, omega=(0.0, 0.0, 1.0), theta=None, h=1.0 / 16,
                     s_range=None, convention="general", half_width=None):
    """Relative L2 error of alpha_a / a against the linearized map, per amplitude a.

    The fitted order is the log-log slope of error against amplitude.
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    if len(amplitudes) < 3 or np.any(np.diff(amplitudes) >= 0):
        raise ConfigurationError("give at least three decreasing amplitudes")
    omega = unit(omega)
    theta = -omega if theta is None else unit(theta)
    eps = 4.0 * h
    lo, hi = s_range or (-2.0 - 3.0 * eps, 2.0 + 3.0 * eps)
    errs = []
    s = ref = None
    for a in amplitudes:
        q = Scale(p, float(a))
        sc = plane_scenario(q, omega, h, s_min=lo, margin=2 * h, half_width=half_width)
        r = wave.run(sc, [wave.PlaneProbe("ff", theta, 1.0)])
        alpha = farfield.extract_alpha(r, "ff")
        if s is None:
            s = alpha.times[(alpha.times >= lo) & (alpha.times <= hi)]
            ref = linearized_smeared(p, theta, omega, s, eps, convention)
        errs.append(farfield.relative_l2(alpha(s) / a, ref))
    errs = np.array(errs)
    order = float(np.polyfit(np.log(amplitudes), np.log(errs), 1)[0])
    return BornReport(amplitudes, errs, order, errs[:-1] / errs[1:], s)


def backscatter_runs(q, directions, h=1.0 / 16, s_min=-2.0, margin=None, half_width=None):
    """One run per direction recording alpha(-w, w, s) down to delay ``s_min``."""
    margin = 6 * CFL_dt(h) if margin is None else margin
    runs = []
    for w in np.atleast_2d(directions):
        sc = plane_scenario(q, w, h, s_min=s_min, margin=margin, half_width=half_width)
        runs.append(wave.run(sc, [wave.PlaneProbe("back", -unit(w), 1.0)]))
    return runs


def CFL_dt(h):
    return wave.CFL * h


def born_reconstruct(table, target, convention="general", window=7):
    """Born estimate q_b on ``target`` (a Grid3D or an (N, 3) point array).

    General convention: q_b(x) = (4/pi) int_S alpha_ss(-w, w, -2 x.w) dw.
    Double-delay convention: q_b(x) = (1/4 pi) int_S alpha_ss(-w, w, -x.w/2) dw.
    alpha_ss comes from a local quadratic least-squares fit over ``window``
    samples; the sphere integral uses the table's direction weights.
    """
    if convention == "general":
        factor, arg = 4.0 / math.pi, -2.0
    elif convention == "double-delay":
        factor, arg = 1.0 / (4.0 * math.pi), -0.5
    else:
        raise ConfigurationError(f"unknown convention {convention!r}")
    if isinstance(target, Grid3D):
        X, Y, Z = target.mesh()
        pts = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
    else:
        pts = np.atleast_2d(np.asarray(target, dtype=float))
    n = len(table.pairs)
    weights = table.weights if table.weights is not None else np.full(n, 4.0 * math.pi / n)
    s = table.s
    ds = s[1] - s[0]
    half = window // 2
    out = np.zeros(len(pts))
    for k in range(n):
        if not np.allclose(table.theta(k), -table.omega(k)):
            raise ConfigurationError("Born reconstruction uses backscatter pairs only")
        ass = savgol_filter(table.values[k], window, 2, deriv=2, delta=ds, mode="interp")
        args = arg * (pts @ table.omega(k))
        if args.min() < s[half] - 1e-12 or args.max() > s[-1 - half] + 1e-12:
            raise OutOfDomainError(
                f"data cover s in [{s[0]:.3f}, {s[-1]:.3f}], reconstruction needs "
                f"[{args.min():.3f}, {args.max():.3f}]")
        out += weights[k] * np.interp(args, s, ass)
    out *= factor
    if isinstance(target, Grid3D):
        return ScalarField3D(target, out.reshape(target.dims))
    return out


def ball_points(spacing=1.0 / 16, radius=1.0):
    n = int(round(radius / spacing))
    ax = spacing * np.arange(-n, n + 1)
    pts = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    return pts[np.sum(pts * pts, axis=1) <= radius * radius + 1e-12]


@dataclass
class ReconstructionReport:
    amplitudes: np.ndarray
    errors: np.ndarray
    radial_spread: np.ndarray
    tables: list


def radial_spread(table, peak, shells=(0.25, 0.5, 0.75), n_points=256, convention="general"):
    """max over spheres |x| = rho of (max - min of q_b) relative to ``peak``.

    q_b is evaluated on Fibonacci points lying exactly on each sphere, so
    the spread measures angular variation only.
    """
    dirs, _ = fibonacci_directions(n_points)
    if not peak:
        return 0.0
    worst = 0.0
    for rho in shells:
        vals = born_reconstruct(table, rho * dirs, convention)
        worst = max(worst, float(np.ptp(vals)))
    return worst / abs(peak)


def born_experiment(p, amplitudes, n_directions=64, h=1.0 / 16, spacing=1.0 / 16,
                    convention="general", directions=None, weights=None, half_width=None):
    """Reconstruct q = a p from simulated backscatter for each amplitude a.

    ``directions`` (with optional quadrature ``weights``) replace the
    Fibonacci set of ``n_directions`` points.
    """
    if directions is None:
        dirs, wts = fibonacci_directions(n_directions)
    else:
        dirs = np.atleast_2d(np.asarray(directions, dtype=float))
        wts = np.full(len(dirs), 4.0 * math.pi / len(dirs)) if weights is None else weights
    pts = ball_points(spacing)
    target = p.value(pts)
    errs, spreads, tables = [], [], []
    for a in amplitudes:
        q = Scale(p, float(a))
        runs = backscatter_runs(q, dirs, h, half_width=half_width)
        table = farfield.backscatter_table(runs, "back", dirs, wts)
        qb = born_reconstruct(table, pts, convention)
        errs.append(farfield.relative_l2(qb, a * target))
        spreads.append(radial_spread(table, float(np.max(np.abs(qb))), convention=convention))
        tables.append(table)
    return ReconstructionReport(np.asarray(amplitudes), np.array(errs), np.array(spreads), tables)


# -------------------------------------------------------------- translation


@dataclass
class TranslationReport:
    shift: float
    discrepancy: float
    s: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray


def translation_check(q, a, theta, omega, h=1.0 / 16, s_range=(-1.0, 3.0), half_width=None):
    """Compare the pattern of q(. + a) with alpha(theta, w, s + a.(theta - w)).

    Both runs measure on the plane x.theta = c with c clear of both
    supports; the discrepancy is the sup difference over ``s_range``
    normalized by the peak of |beta|.
    """
    from .potential import Translate

    a = np.asarray(a, dtype=float).reshape(3)
    theta, omega = unit(theta), unit(omega)
    qa = Translate(q, a) if np.any(a) else q
    shift = float(a @ (theta - omega))
    c_max = 1.0
    for pot in (q, qa):
        c, R = pot.support()
        c_max = max(c_max, float(c @ theta) + R)
    lo, hi = s_range
    out = {}
    for name, pot, s_lo in (("alpha", q, lo + shift), ("beta", qa, lo)):
        sc = plane_scenario(pot, omega, h, s_min=s_lo, offset=c_max, margin=2 * h,
                            half_width=half_width)
        r = wave.run(sc, [wave.PlaneProbe("ff", theta, c_max)])
        out[name] = farfield.extract_alpha(r, "ff")
    ds = out["beta"].dt
    s = np.arange(lo, hi + 1e-12, ds)
    beta = out["beta"](s)
    alpha = out["alpha"](s + shift)
    peak = float(np.max(np.abs(beta)))
    disc = float(np.max(np.abs(beta - alpha))) / peak if peak else float(np.max(np.abs(alpha)))
    return TranslationReport(shift, disc, s, alpha, beta)


# ------------------------------------------------------- energy and Abel


@dataclass
class EnergyProfile:
    rho: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0):
            raise ValueError("energies are nonnegative")

    def __call__(self, r):
        if len(self.rho) < 2:
            return np.full(np.shape(r), self.values[0])
        return CubicSpline(self.rho, self.values)(r)


def energy_profile(p, rho_grid, quad_order=16):
    """E(rho) = int_S |p(rho w)|^2 dw."""
    rho_grid = np.asarray(rho_grid, dtype=float)
    if np.any(rho_grid <= 0.0) or np.any(rho_grid > 1.0):
        raise OutOfDomainError("rho grid must lie in (0, 1]")
    sq = harmonics.make_sphere_quadrature(quad_order)
    vals = np.array([sq.integrate(p.value(r * sq.nodes) ** 2) for r in rho_grid])
    return EnergyProfile(rho_grid, np.maximum(vals, 0.0))


def beta_integral(tau, s):
    """int_tau^s d rho / (sqrt(rho - tau) sqrt(s - rho)), equal to pi."""
    if not s > tau:
        raise OutOfDomainError("need tau < s")
    val, _ = quad(lambda r: 1.0, tau, s, weight="alg", wvar=(-0.5, -0.5))
    return float(val)


def abel_chain(E, tau, n=64):
    """(E(tau), int_tau^1 E/sqrt(rho - tau), pi int_tau^1 E).

    The Abel integral uses rho = tau + sigma^2, turning the weight into
    2 d sigma on [0, sqrt(1 - tau)].
    """
    if not 0.0 < tau < 1.0:
        raise OutOfDomainError("tau must lie in (0, 1)")
    x, w = legendre.leggauss(n)
    top = math.sqrt(1.0 - tau)
    sig = 0.5 * top * (x + 1.0)
    abel = float(2.0 * np.sum(0.5 * top * w * E(tau + sig * sig)))
    rho = tau + 0.5 * (1.0 - tau) * (x + 1.0)
    iterated = float(math.pi * np.sum(0.5 * (1.0 - tau) * w * E(rho)))
    return float(E(np.array(tau))), abel, iterated


# ------------------------------------------------------ monotone experiment


@dataclass
class MonotoneReport:
    tau: np.ndarray
    radon: np.ndarray
    gronwall_rhs: np.ndarray
    residual: np.ndarray
    k_max: float
    data_gap: float
    noise_floor: float
    s: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray


def monotone_experiment(q1, q2, omega, h=1.0 / 16, k_spacing=0.25, tau_step=0.05):
    """Backscatter slices of q1 <= q2 at one direction and the Gronwall log.

    ``residual`` is |P(tau)| - k_max int_{-1}^{tau} P dt: the identity with
    equal data would force it to be <= 0. ``data_gap`` is the sup difference
    of the two slices and ``noise_floor`` the largest |alpha| where the data
    must vanish (s > 2 + 3 eps).
    """
    omega = unit(omega)
    p = difference(q2, q1)
    c, R = p.support()
    if R > 0:
        pts = ball_points(1.0 / 32, R) + c
        if np.min(p.value(pts)) < -1e-14:
            raise PreconditionError("q2 - q1 must be nonnegative")
    eps = 4.0 * h
    t_start = -1.0 - 6.0 * eps
    slices, runs = [], []
    for q in (q1, q2):
        if _is_zero(q):
            runs.append(None)
            slices.append(None)
            continue
        sc = plane_scenario(q, omega, h, s_min=-2.0 - 3 * eps, t_start=t_start, margin=2 * h)
        sc.half_width = max(sc.half_width, 3.0)
        sc.grid = Grid3D.cube(sc.half_width, h)
        r = wave.run(sc, [wave.PlaneProbe("back", -omega, 1.0),
                          wave.RegionHistory("region", np.zeros(3), 1.0)])
        runs.append(r)
        slices.append(farfield.extract_alpha(r, "back"))
    ref = next(a for a in slices if a is not None)
    s = ref.times
    a1 = slices[0].samples if slices[0] is not None else np.zeros(len(s))
    a2 = slices[1].samples if slices[1] is not None else np.zeros(len(s))
    tail = s > 2.0 + 3.0 * eps
    noise = float(max(np.abs(a1[tail]).max(initial=0.0), np.abs(a2[tail]).max(initial=0.0)))
    gap = float(np.max(np.abs(a1 - a2)))
    tau = np.arange(-1.0, 1.0 + 1e-12, tau_step)
    P = np.array([radon.radon_plane(p, omega, t) for t in tau])
    k_max = _k_max(runs, omega, k_spacing, tau_step)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (P[1:] + P[:-1]) * np.diff(tau))])
    rhs = k_max * cum
    return MonotoneReport(tau, P, rhs, np.abs(P) - rhs, k_max, gap, noise, s, a1, a2)


def _k_max(runs, omega, spacing, tau_step):
    """max (|k| + |k_tau|) over sampled x in B and tau in [-1, 1], x.w <= tau."""
    live = [r for r in runs if r is not None]
    if not live:
        return 0.0
    sc = live[0].scenario
    pts = ball_points(spacing)
    series = []
    for r in runs:
        if r is None:
            series.append([np.zeros(len(sc.times()))] * len(pts))
        else:
            series.append([series_at(r, "region", x) for x in pts])
    t = sc.times()
    best = 0.0
    taus = np.arange(-1.0, 1.0 + 1e-12, tau_step)
    d = 0.5 * tau_step
    for i, x in enumerate(pts):
        ph = float(x @ omega)
        for tau in taus:
            if ph > tau - d:
                continue
            k0 = _kernel_from_series(t, series[0][i], t, series[1][i], ph, tau, sc.dt)
            kp = _kernel_from_series(t, series[0][i], t, series[1][i], ph, tau + d, sc.dt)
            km = _kernel_from_series(t, series[0][i], t, series[1][i], ph, tau - d, sc.dt)
            best = max(best, abs(k0) + abs(kp - km) / (2 * d))
    return best

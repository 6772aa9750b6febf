"""Smooth compactly supported potentials with analytic derivatives.

Every potential exposes vectorised ``value``, ``gradient`` and ``hessian``
over arrays of shape (..., 3), plus ``support()`` returning a ball
``(center, radius)`` outside of which it vanishes identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre
from scipy.integrate import quad

from . import harmonics
from .errors import DegenerateInputError, OutOfDomainError
from .geometry import unit

# Below this distance to the unit sphere exp(-1/(1-s)) and its derivatives
# underflow to zero; cutting there avoids inf * 0.
_EXP_CUTOFF = 2e-3


@dataclass(frozen=True)
class ExponentialProfile:
    """g(s) = exp(-1/(1-s)) for s = |x|^2 < 1."""

    def derivs(self, s):
        s = np.asarray(s, dtype=float)
        d = 1.0 - s
        inside = d > _EXP_CUTOFF
        dd = np.where(inside, d, 1.0)
        g = np.where(inside, np.exp(-1.0 / dd), 0.0)
        g1 = g * (-1.0 / dd ** 2)
        g2 = g * (1.0 / dd ** 4 - 2.0 / dd ** 3)
        return g, g1, g2

    def to_spec(self):
        return {"profile": "exponential"}


@dataclass(frozen=True)
class PolynomialProfile:
    """g(s) = (1-s)^k for s = |x|^2 <= 1; C^(k-1) across the unit sphere."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise OutOfDomainError("polynomial order must be at least 1")

    def derivs(self, s):
        s = np.asarray(s, dtype=float)
        d = np.clip(1.0 - s, 0.0, None)
        inside = s < 1.0
        k = self.k
        g = d ** k
        # mask: d**0 would be 1 outside the ball
        g1 = np.where(inside, -k * d ** (k - 1), 0.0)
        g2 = np.where(inside, k * (k - 1) * d ** max(k - 2, 0), 0.0)
        return g, g1, g2

    def to_spec(self):
        return {"profile": "polynomial", "k": self.k}


class Potential:
    """Base class; subclasses implement value/gradient/hessian/support."""

    def __call__(self, x):
        return self.value(x)

    def __add__(self, other):
        return Sum((self, other))

    def __mul__(self, c):
        return Scale(self, float(c))

    __rmul__ = __mul__

    def translate(self, a):
        return Translate(self, a)


@dataclass(frozen=True, eq=False)
class Zero(Potential):
    def value(self, x):
        return np.zeros(np.shape(x)[:-1])

    def gradient(self, x):
        return np.zeros(np.shape(x))

    def hessian(self, x):
        return np.zeros(np.shape(x) + (3,))

    def support(self):
        return np.zeros(3), 0.0

    def to_spec(self):
        return {"variant": "zero"}


@dataclass(frozen=True, eq=False)
class RadialBump(Potential):
    """A * g(|x|^2) for a radial profile g supported in the unit ball."""

    profile: object
    amplitude: float = 1.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        g, _, _ = self.profile.derivs(np.sum(x * x, axis=-1))
        return self.amplitude * g

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        _, g1, _ = self.profile.derivs(np.sum(x * x, axis=-1))
        return (2.0 * self.amplitude * g1)[..., None] * x

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        _, g1, g2 = self.profile.derivs(np.sum(x * x, axis=-1))
        xx = x[..., :, None] * x[..., None, :]
        return self.amplitude * (4.0 * g2[..., None, None] * xx + 2.0 * g1[..., None, None] * np.eye(3))

    def support(self):
        return np.zeros(3), 1.0

    def to_spec(self):
        if isinstance(self.profile, ExponentialProfile):
            return {"variant": "exponential-bump", "amplitude": self.amplitude}
        return {"variant": "polynomial-bump", "k": self.profile.k, "amplitude": self.amplitude}


def exponential_bump(amplitude=1.0):
    return RadialBump(ExponentialProfile(), float(amplitude))


def polynomial_bump(k, amplitude=1.0):
    return RadialBump(PolynomialProfile(int(k)), float(amplitude))


@dataclass(frozen=True, eq=False)
class Modulated(Potential):
    """A * g(|x|^2) * H(x) for a radial profile g and a polynomial H.

    With H a solid harmonic of degree d this is p(rho w) = A g(rho^2) rho^d Y(w),
    i.e. a single harmonic shell.
    """

    profile: object
    poly: object
    amplitude: float = 1.0
    label: tuple = ()

    def value(self, x):
        x = np.asarray(x, dtype=float)
        g, _, _ = self.profile.derivs(np.sum(x * x, axis=-1))
        return self.amplitude * g * self.poly.value(x)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        g, g1, _ = self.profile.derivs(np.sum(x * x, axis=-1))
        H = self.poly.value(x)
        dH = self.poly.gradient(x)
        return self.amplitude * ((2.0 * g1 * H)[..., None] * x + g[..., None] * dH)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        g, g1, g2 = self.profile.derivs(np.sum(x * x, axis=-1))
        H = self.poly.value(x)
        dH = self.poly.gradient(x)
        d2H = self.poly.hessian(x)
        xx = x[..., :, None] * x[..., None, :]
        cross = x[..., :, None] * dH[..., None, :]
        cross = cross + np.swapaxes(cross, -1, -2)
        out = (4.0 * (g2 * H)[..., None, None] * xx
               + 2.0 * (g1 * H)[..., None, None] * np.eye(3)
               + 2.0 * g1[..., None, None] * cross
               + g[..., None, None] * d2H)
        return self.amplitude * out

    def support(self):
        return np.zeros(3), 1.0

    def to_spec(self):
        if not self.label:
            raise DegenerateInputError("only harmonic-modulated potentials are serialisable")
        degree, order = self.label
        return {"variant": "harmonic", **self.profile.to_spec(), "degree": degree,
                "order": order, "amplitude": self.amplitude}


def harmonic_potential(profile, degree, order, amplitude=1.0):
    """Radial profile times the real orthonormal solid harmonic (degree, order)."""
    poly = harmonics.solid_harmonic(degree, order)
    return Modulated(profile, poly, float(amplitude), (int(degree), int(order)))


@dataclass(frozen=True, eq=False)
class Translate(Potential):
    """x -> base(x + a); the support moves to the ball about center - a."""

    base: Potential
    shift: tuple

    def __post_init__(self):
        object.__setattr__(self, "shift", tuple(float(v) for v in np.reshape(self.shift, 3)))

    def _moved(self, x):
        return np.asarray(x, dtype=float) + np.array(self.shift)

    def value(self, x):
        return self.base.value(self._moved(x))

    def gradient(self, x):
        return self.base.gradient(self._moved(x))

    def hessian(self, x):
        return self.base.hessian(self._moved(x))

    def support(self):
        c, r = self.base.support()
        return c - np.array(self.shift), r

    def to_spec(self):
        return {"variant": "translate", "base": self.base.to_spec(), "shift": list(self.shift)}


@dataclass(frozen=True, eq=False)
class Scale(Potential):
    base: Potential
    factor: float

    def value(self, x):
        return self.factor * self.base.value(x)

    def gradient(self, x):
        return self.factor * self.base.gradient(x)

    def hessian(self, x):
        return self.factor * self.base.hessian(x)

    def support(self):
        return self.base.support()

    def to_spec(self):
        return {"variant": "scale", "base": self.base.to_spec(), "factor": self.factor}


@dataclass(frozen=True, eq=False)
class Sum(Potential):
    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise DegenerateInputError("sum of no potentials")
        object.__setattr__(self, "terms", tuple(self.terms))

    def value(self, x):
        return sum(t.value(x) for t in self.terms)

    def gradient(self, x):
        return sum(t.gradient(x) for t in self.terms)

    def hessian(self, x):
        return sum(t.hessian(x) for t in self.terms)

    def support(self):
        balls = [b for b in (t.support() for t in self.terms) if b[1] > 0.0]
        if not balls:
            return np.zeros(3), 0.0
        c = np.mean([b[0] for b in balls], axis=0)
        return c, max(np.linalg.norm(b[0] - c) + b[1] for b in balls)

    def to_spec(self):
        return {"variant": "sum", "terms": [t.to_spec() for t in self.terms]}


def from_spec(spec):
    """Build a potential from its scenario-file dictionary."""
    if not isinstance(spec, dict) or "variant" not in spec:
        raise OutOfDomainError("potential spec must be an object with a 'variant' field")
    v = spec["variant"]
    amp = float(spec.get("amplitude", 1.0))
    if v == "zero":
        return Zero()
    if v == "exponential-bump":
        return exponential_bump(amp)
    if v == "polynomial-bump":
        return polynomial_bump(int(spec.get("k", 4)), amp)
    if v == "harmonic":
        prof = spec.get("profile", "exponential")
        if prof == "exponential":
            profile = ExponentialProfile()
        elif prof == "polynomial":
            profile = PolynomialProfile(int(spec.get("k", 4)))
        else:
            raise OutOfDomainError(f"unknown radial profile {prof!r}")
        return harmonic_potential(profile, int(spec["degree"]), int(spec.get("order", 0)), amp)
    if v == "translate":
        return Translate(from_spec(spec["base"]), spec["shift"])
    if v == "scale":
        return Scale(from_spec(spec["base"]), float(spec["factor"]))
    if v == "sum":
        return Sum(tuple(from_spec(t) for t in spec["terms"]))
    raise OutOfDomainError(f"unknown potential variant {v!r}")


def min_smoothness(q):
    """Smallest polynomial order among the bumps making up ``q`` (inf if none)."""
    if isinstance(q, (RadialBump, Modulated)):
        return q.profile.k if isinstance(q.profile, PolynomialProfile) else np.inf
    if isinstance(q, (Translate, Scale)):
        return min_smoothness(q.base)
    if isinstance(q, Sum):
        return min(min_smoothness(t) for t in q.terms)
    return np.inf


@dataclass(frozen=True)
class C2Norm:
    sup_value: float
    sup_grad: float
    sup_hess: float
    resolution: float

    @property
    def total(self):
        return self.sup_value + self.sup_grad + self.sup_hess


def _sampled_sups(q, h, center, radius, chunk=200_000):
    n = int(np.ceil(radius / h))
    ax = h * np.arange(-n, n + 1)
    pts = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3) + center
    sv = sg = sh = 0.0
    for i in range(0, len(pts), chunk):
        p = pts[i:i + chunk]
        sv = max(sv, float(np.max(np.abs(q.value(p)))))
        sg = max(sg, float(np.max(np.linalg.norm(q.gradient(p), axis=-1))))
        sh = max(sh, float(np.max(np.abs(q.hessian(p)))))
    return np.array([sv, sg, sh])


def c2_norm(q, h=1.0 / 16):
    """Sup of |q|, |grad q| and max |Hessian entry|, by sampling.

    Samples on cubic lattices of spacing h and h/2 through the support
    center and combines them with one Richardson step (sampling error of an
    interior maximum is O(h^2)).
    """
    center, radius = q.support()
    if radius == 0.0:
        return C2Norm(0.0, 0.0, 0.0, h)
    coarse = _sampled_sups(q, h, center, radius)
    fine = _sampled_sups(q, h / 2, center, radius)
    est = np.maximum(fine + (fine - coarse) / 3.0, fine)
    return C2Norm(float(est[0]), float(est[1]), float(est[2]), h)


def _ray_interval(q, x, omega, upper):
    c, r = q.support()
    d = np.asarray(x, dtype=float) - c
    b = d @ omega
    disc = b * b - (d @ d - r * r)
    if r == 0.0 or disc <= 0.0:
        return None
    lo, hi = -b - np.sqrt(disc), min(-b + np.sqrt(disc), upper)
    return (lo, hi) if hi > lo else None


def chord_integral(q, x, omega, upper=0.0):
    """int_{-inf}^{upper} q(x + sigma w) d sigma by adaptive quadrature."""
    omega = unit(omega)
    x = np.asarray(x, dtype=float).reshape(3)
    span = _ray_interval(q, x, omega, upper)
    if span is None:
        return 0.0
    val, _ = quad(lambda s: float(q.value(x + s * omega)), *span,
                  epsabs=1e-13, epsrel=1e-11, limit=200)
    return float(val)


def ray_integrals(f, points, omega, support, upper=0.0, n=64, panels=4, moment=0):
    """Fixed-order int_{-inf}^{upper} |sigma|^moment f(x + sigma w) d sigma.

    ``f`` maps (..., 3) arrays to values; ``support`` is a ball (center,
    radius) containing supp f. Composite Gauss-Legendre on the intersection
    of each ray with the ball.
    """
    omega = unit(omega)
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    c, r = support
    d = pts - c
    b = d @ omega
    disc = b * b - (np.sum(d * d, axis=1) - r * r)
    root = np.sqrt(np.clip(disc, 0.0, None))
    lo = -b - root
    hi = np.minimum(-b + root, upper)
    ok = (disc > 0) & (hi > lo)
    lo, hi = np.where(ok, lo, 0.0), np.where(ok, hi, 0.0)
    xg, wg = legendre.leggauss(n)
    edges = np.linspace(0.0, 1.0, panels + 1)
    u = np.concatenate([0.5 * (a + e) + 0.5 * (e - a) * xg for a, e in zip(edges[:-1], edges[1:])])
    w = np.concatenate([0.5 * (e - a) * wg for a, e in zip(edges[:-1], edges[1:])])
    sig = lo[:, None] + (hi - lo)[:, None] * u[None, :]
    vals = f(pts[:, None, :] + sig[..., None] * omega)
    if moment:
        vals = vals * np.abs(sig) ** moment
    out = (vals @ w) * (hi - lo)
    return np.where(ok, out, 0.0).reshape(np.shape(points)[:-1])


def ball_integral(q, n_r=48, order=24):
    """int q dx over its support ball (radial Gauss-Legendre x sphere rule)."""
    if isinstance(q, Sum):
        return sum(ball_integral(t, n_r, order) for t in q.terms)
    c, r = q.support()
    if r == 0.0:
        return 0.0
    sq = harmonics.make_sphere_quadrature(order)
    x, w = legendre.leggauss(n_r)
    rr = 0.5 * r * (x + 1.0)
    wr = 0.5 * r * w * rr ** 2
    pts = c + rr[:, None, None] * sq.nodes[None, :, :]
    return float(wr @ (q.value(pts) @ sq.weights))


def angular_condition_constant(p, rho_grid, order=16, floor=1e-14):
    """max over rho and (i, j) of int |Omega_ij p(rho w)|^2 / int |p(rho w)|^2."""
    rho_grid = np.asarray(rho_grid, dtype=float)
    if np.any(rho_grid <= 0.0) or np.any(rho_grid > 1.0):
        raise OutOfDomainError("rho grid must lie in (0, 1]")
    sq = harmonics.make_sphere_quadrature(order)
    best, seen = 0.0, False
    for rho in rho_grid:
        x = rho * sq.nodes
        den = sq.integrate(p.value(x) ** 2)
        if den < floor:
            continue
        seen = True
        for i, j in harmonics.PAIRS:
            best = max(best, float(sq.integrate(harmonics.omega_ij(p, i, j, x) ** 2) / den))
    if not seen:
        raise DegenerateInputError("potential is negligible on every sphere of the grid")
    return best

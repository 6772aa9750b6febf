"""Plane Radon transforms and the geometry of their tau-derivative.

Plane integrals use a tensor Gauss rule on the disk where the plane meets
the support ball, with in-plane Cartesian coordinates
``u = a sin(phi)``, ``v = a cos(phi) eta`` so that integrands vanishing on
the rim (with a kink) still converge spectrally.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import legendre

from . import harmonics
from .errors import OutOfDomainError, SingularGeometryError
from .geometry import fmt, unit


def plane_basis(omega):
    """Two unit vectors completing ``omega`` to a right-handed frame."""
    omega = unit(omega)
    helper = np.eye(3)[int(np.argmin(np.abs(omega)))]
    e1 = np.cross(omega, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(omega, e1)


def disk_rule(center, radius, omega, tau, n=48):
    """Nodes and weights on {x . w = tau} intersected with a ball.

    Returns ``(points, weights)``; both empty when the plane misses the ball.
    """
    omega = unit(omega)
    c = np.asarray(center, dtype=float)
    off = tau - c @ omega
    if radius <= 0.0 or abs(off) >= radius:
        return np.zeros((0, 3)), np.zeros(0)
    a = np.sqrt(radius * radius - off * off)
    foot = c + off * omega
    e1, e2 = plane_basis(omega)
    x, w = legendre.leggauss(n)
    phi = 0.5 * np.pi * x
    u = a * np.sin(phi)
    v = a * np.cos(phi)[:, None] * x[None, :]
    jac = a * a * np.cos(phi) ** 2 * (0.5 * np.pi)
    wts = (jac * w)[:, None] * w[None, :]
    pts = foot + u[:, None, None] * e1 + v[..., None] * e2
    return pts.reshape(-1, 3), wts.ravel()


def plane_integral(f, support, omega, tau, n=48):
    """int_{x . w = tau} f dS for ``f`` vanishing outside the ball ``support``."""
    pts, wts = disk_rule(support[0], support[1], omega, tau, n)
    if not len(wts):
        return 0.0
    return float(f(pts) @ wts)


def radon_plane(p, omega, tau, n=48):
    return plane_integral(p.value, p.support(), omega, tau, n)


def radon_tau_derivative(p, omega, tau, dtau=1e-3, n=48):
    """P_tau two ways: central difference of P, and int (w . grad p) dS."""
    omega = unit(omega)
    fd = (radon_plane(p, omega, tau + dtau, n) - radon_plane(p, omega, tau - dtau, n)) / (2 * dtau)
    div = plane_integral(lambda x: p.gradient(x) @ omega, p.support(), omega, tau, n)
    return fd, div


@dataclass(frozen=True)
class RadonProfile:
    directions: np.ndarray
    tau: np.ndarray
    values: np.ndarray  # (len(tau), len(directions))

    def to_csv(self, path):
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega_index", "tau", "P"])
            for k in range(len(self.directions)):
                for i, t in enumerate(self.tau):
                    w.writerow([k, fmt(t), fmt(self.values[i, k])])
        side = {"directions": [[float(c) for c in d] for d in self.directions]}
        path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def radon_profile(p, directions, tau, n=48):
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    tau = np.asarray(tau, dtype=float)
    vals = np.array([[radon_plane(p, d, t, n) for d in directions] for t in tau])
    return RadonProfile(directions, tau, vals)


@dataclass(frozen=True)
class TangentFrame:
    x: np.ndarray
    vectors: tuple  # T_12, T_13, T_23


def tangent_frame(x):
    """T_ij = x_i e_j - x_j e_i for i < j."""
    x = np.asarray(x, dtype=float).reshape(3)
    e = np.eye(3)
    vecs = tuple(x[i - 1] * e[j - 1] - x[j - 1] * e[i - 1] for i, j in harmonics.PAIRS)
    return TangentFrame(x, vecs)


def tangential_decomposition_check(x, v):
    """| |x|^2 v - sum (v . T_ij) T_ij - (v . x) x |."""
    x = np.asarray(x, dtype=float).reshape(3)
    v = np.asarray(v, dtype=float).reshape(3)
    rhs = sum((v @ T) * T for T in tangent_frame(x).vectors) + (v @ x) * x
    return float(np.linalg.norm((x @ x) * v - rhs))


def alpha_direction(x, omega, tau, tol=1e-10):
    """Unit alpha with w = (rho/r) alpha + (tau/r) r_hat, orthogonal to x.

    ``x`` lies on the plane x . w = tau, r is its distance from the w axis
    and r_hat the in-plane radial direction.
    """
    omega = unit(omega)
    x = np.asarray(x, dtype=float).reshape(3)
    if not tau > 0:
        raise OutOfDomainError("tau must be positive")
    if abs(x @ omega - tau) > tol:
        raise OutOfDomainError("x is not on the plane x . w = tau")
    radial = x - tau * omega
    r = np.linalg.norm(radial)
    if r <= tol:
        raise SingularGeometryError("x lies on the w axis; alpha is undefined")
    rho = np.linalg.norm(x)
    return (r * omega - tau * radial / r) / rho


def ptau_decomposition(p, omega, tau, n=48):
    """Split P_tau into -2 pi tau p(tau w) plus the angular-derivative term.

    The angular term int (rho/r)(alpha . grad p) dS is computed in polar
    coordinates about tau w, where dS = r dr dtheta cancels the 1/r.
    """
    if not 0.0 < tau < 1.0:
        raise OutOfDomainError("tau must lie in (0, 1)")
    omega = unit(omega)
    point = -2.0 * np.pi * tau * float(p.value(tau * omega))
    c, R = p.support()
    off = tau - c @ omega
    if abs(off) >= R:
        return point, 0.0, point
    foot = c + off * omega
    r_max = np.linalg.norm(foot - tau * omega) + np.sqrt(R * R - off * off)
    e1, e2 = plane_basis(omega)
    xg, wg = legendre.leggauss(n)
    r = 0.5 * r_max * (xg + 1.0)
    wr = 0.5 * r_max * wg
    n_theta = 2 * n
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    rhat = np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2  # (T, 3)
    pts = tau * omega + r[None, :, None] * rhat[:, None, :]  # (T, R, 3)
    rho = np.sqrt(tau * tau + r * r)
    alpha = (r[None, :, None] * omega - tau * rhat[:, None, :]) / rho[None, :, None]
    integrand = rho[None, :] * np.sum(alpha * p.gradient(pts), axis=-1)
    angular = float(np.sum(integrand @ wr) * (2.0 * np.pi / n_theta))
    return point, angular, point + angular


def sphere_delta_weight(x, tau):
    """int_S delta(x . w - tau) dw = (2 pi/|x|) H(|x| - |tau|).

    The Heaviside takes the value 1/2 at |x| = |tau|.
    """
    r = float(np.linalg.norm(np.asarray(x, dtype=float)))
    if r == 0.0:
        raise SingularGeometryError("the weight is singular at x = 0")
    gap = r - abs(tau)
    return 2.0 * np.pi / r * (1.0 if gap > 0 else 0.5 if gap == 0 else 0.0)


def sphere_delta_mollified(x, tau, width=1e-3, n_phi=8, panel_nodes=8):
    """int_S delta_width(x . w - tau) dw with a Gaussian delta_width, by quadrature.

    The product rule has its pole on x: composite Gauss-Legendre panels of
    length ~ width / |x| in the polar cosine resolve the narrow band, and
    the azimuthal rule is exact since the integrand does not depend on the
    azimuth.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise SingularGeometryError("the weight is singular at x = 0")
    panels = max(16, int(np.ceil(2.0 * r / width)))
    g, gw = legendre.leggauss(panel_nodes)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mu = ((edges[:-1] + half)[:, None] + half[:, None] * g).ravel()
    w_mu = (half[:, None] * gw).ravel()
    e1, e2 = plane_basis(x / r)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    ring = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
    nodes = (mu[:, None, None] * (x / r) + np.sqrt(1.0 - mu * mu)[:, None, None] * ring)
    z = (nodes @ x - tau) / width
    vals = np.exp(-0.5 * z * z) / (width * np.sqrt(2.0 * np.pi))
    return float(np.sum(w_mu[:, None] * vals) * (2.0 * np.pi / n_phi))


def ptaudiff_terms(p, tau, order=16, n=48, n_sigma=48):
    """(tau^2 int_S |p(tau w)|^2, int_S |P_tau(tau, w)|^2, Abel angular term)."""
    if not 0.0 < tau < 1.0:
        raise OutOfDomainError("tau must lie in (0, 1)")
    sq = harmonics.make_sphere_quadrature(order)
    lhs = tau * tau * float(sq.integrate(p.value(tau * sq.nodes) ** 2))
    supp = p.support()
    ptau = np.array([
        plane_integral(lambda x, w=w: p.gradient(x) @ w, supp, w, tau, n) for w in sq.nodes
    ])
    radon_term = float(sq.integrate(ptau ** 2))
    # rho = sqrt(tau^2 + sigma^2) turns rho/sqrt(rho^2 - tau^2) d rho into d sigma
    xg, wg = legendre.leggauss(n_sigma)
    top = np.sqrt(1.0 - tau * tau)
    sig = 0.5 * top * (xg + 1.0)
    ws = 0.5 * top * wg
    rho = np.sqrt(tau * tau + sig * sig)
    ang = np.array([
        sum(sq.integrate(harmonics.omega_ij(p, i, j, r * sq.nodes) ** 2) for i, j in harmonics.PAIRS)
        for r in rho
    ])
    return lhs, radon_term, float(ang @ ws)

"""Sphere quadrature, real spherical harmonics and the angular derivatives.

Harmonics are carried as homogeneous solid-harmonic polynomials, so their
values, gradients and Hessians are exact and the rotation generators
``Omega_ij = x_i d_j - x_j d_i`` can be applied analytically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations
from math import factorial, pi, sqrt
from pathlib import Path

import numpy as np
from numpy.polynomial import legendre, polynomial

from .errors import DegenerateInputError, OutOfDomainError
from .geometry import fmt

PAIRS = ((1, 2), (1, 3), (2, 3))


class Poly:
    """Real polynomial in (x1, x2, x3) stored as ``{(a, b, c): coef}``."""

    def __init__(self, terms=None):
        self.terms = {k: float(v) for k, v in (terms or {}).items() if v != 0.0}

    @classmethod
    def coordinate(cls, i):
        e = [0, 0, 0]
        e[i - 1] = 1
        return cls({tuple(e): 1.0})

    @classmethod
    def constant(cls, c):
        return cls({(0, 0, 0): c})

    @classmethod
    def radius_squared(cls):
        return cls({(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0})

    @property
    def degree(self):
        return max((sum(k) for k in self.terms), default=0)

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) + v
        return Poly(out)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly({k: v * other for k, v in self.terms.items()})
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = (k1[0] + k2[0], k1[1] + k2[1], k1[2] + k2[2])
                out[k] = out.get(k, 0.0) + v1 * v2
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, n):
        out = Poly.constant(1.0)
        for _ in range(n):
            out = out * self
        return out

    def derivative(self, axis):
        out = {}
        for k, v in self.terms.items():
            if k[axis]:
                kk = list(k)
                kk[axis] -= 1
                out[tuple(kk)] = out.get(tuple(kk), 0.0) + v * k[axis]
        return Poly(out)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        if not self.terms:
            return out
        d = self.degree
        pw = [[np.ones(x.shape[:-1])] for _ in range(3)]
        for a in range(3):
            for _ in range(d):
                pw[a].append(pw[a][-1] * x[..., a])
        for (a, b, c), v in self.terms.items():
            out = out + v * pw[0][a] * pw[1][b] * pw[2][c]
        return out

    __call__ = value

    def gradient(self, x):
        return np.stack([self.derivative(a).value(x) for a in range(3)], axis=-1)

    def hessian(self, x):
        rows = []
        for a in range(3):
            da = self.derivative(a)
            rows.append(np.stack([da.derivative(b).value(x) for b in range(3)], axis=-1))
        return np.stack(rows, axis=-2)


def solid_harmonic(degree, order):
    """Homogeneous harmonic polynomial whose restriction to S is the real
    orthonormal spherical harmonic of the given degree and order."""
    l, m = degree, order
    if l < 0 or abs(m) > l:
        raise OutOfDomainError(f"invalid harmonic ({l}, {m})")
    am = abs(m)
    c = legendre.leg2poly([0.0] * l + [1.0])
    d = polynomial.polyder(c, am) if am else c
    x, y, z = (Poly.coordinate(i) for i in (1, 2, 3))
    r2 = Poly.radius_squared()
    radial = Poly()
    for k, dk in enumerate(np.atleast_1d(d)):
        if dk != 0.0:
            radial = radial + float(dk) * (z ** k) * (r2 ** ((l - am - k) // 2))
    # Re/Im of (x + i y)^|m|
    re, im = Poly.constant(1.0), Poly()
    for _ in range(am):
        re, im = re * x + im * y * -1.0, re * y + im * x
    norm = sqrt((2 * l + 1) / (4 * pi) * factorial(l - am) / factorial(l + am))
    if m > 0:
        return radial * re * (sqrt(2.0) * norm)
    if m < 0:
        return radial * im * (sqrt(2.0) * norm)
    return radial * norm


@dataclass(frozen=True)
class SphereQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, values):
        """Sum ``values`` (nodes along the last axis) against the weights."""
        return np.asarray(values) @ self.weights


def make_sphere_quadrature(order):
    """Gauss-Legendre in the polar cosine times a uniform azimuthal rule.

    Exact for every spherical harmonic of degree <= ``order``.
    """
    if order < 0:
        raise OutOfDomainError("quadrature order must be nonnegative")
    n_mu = order // 2 + 1
    n_phi = order + 1
    mu, w_mu = legendre.leggauss(n_mu)
    phi = 2.0 * pi * np.arange(n_phi) / n_phi
    s = np.sqrt(1.0 - mu ** 2)
    nodes = np.stack(
        [np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)), np.outer(mu, np.ones(n_phi))],
        axis=-1,
    ).reshape(-1, 3)
    weights = np.outer(w_mu, np.full(n_phi, 2.0 * pi / n_phi)).ravel()
    return SphereQuadrature(nodes, weights, order)


@dataclass(frozen=True)
class BasisEntry:
    index: int
    degree: int
    order: int
    poly: Poly

    def __call__(self, omega):
        return self.poly.value(omega)


@dataclass(frozen=True)
class HarmonicBasis:
    entries: tuple

    @property
    def degrees(self):
        return np.array([e.degree for e in self.entries])

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def values(self, omega):
        """Matrix of basis values, shape (nodes, entries)."""
        return np.stack([e.poly.value(omega) for e in self.entries], axis=-1)


def make_basis(max_degree=6):
    entries = []
    n = 1
    for l in range(max_degree + 1):
        for m in range(-l, l + 1):
            entries.append(BasisEntry(n, l, m, solid_harmonic(l, m)))
            n += 1
    return HarmonicBasis(tuple(entries))


@dataclass
class HarmonicExpansion:
    rho: np.ndarray
    coefficients: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.coefficients = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        self.degrees = np.asarray(self.degrees, dtype=int)
        if self.coefficients.shape != (len(self.rho), len(self.degrees)):
            raise ValueError("coefficient matrix must be (len(rho), len(basis))")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rho", "n", "d_n", "p_n"])
            for i, r in enumerate(self.rho):
                for n, d in enumerate(self.degrees):
                    w.writerow([fmt(r), n + 1, int(d), fmt(self.coefficients[i, n])])


def expand(p, rho, basis, quad):
    """Coefficients p_n(rho) = int_S p(rho w) phi_n(w) dw."""
    if not 0.0 < rho <= 1.0:
        raise OutOfDomainError("expansion radius must lie in (0, 1]")
    vals = p.value(rho * quad.nodes)
    return (vals * quad.weights) @ basis.values(quad.nodes)


def expansion(p, rho_grid, basis, quad):
    coefs = np.array([expand(p, r, basis, quad) for r in rho_grid])
    return HarmonicExpansion(rho_grid, coefs, basis.degrees)


def omega_ij(f, i, j, x):
    """(x_i d_j - x_j d_i) f at ``x``; indices are 1-based."""
    if i == j or not {i, j} <= {1, 2, 3}:
        raise OutOfDomainError(f"invalid index pair ({i}, {j})")
    x = np.asarray(x, dtype=float)
    g = f.gradient(x)
    return x[..., i - 1] * g[..., j - 1] - x[..., j - 1] * g[..., i - 1]


def omega_ij_squared(f, i, j, x):
    """Omega_ij applied twice, from the gradient and Hessian of ``f``."""
    x = np.asarray(x, dtype=float)
    g = f.gradient(x)
    H = f.hessian(x)
    a, b = i - 1, j - 1
    xi, xj = x[..., a], x[..., b]
    return (xi * xi * H[..., b, b] + xj * xj * H[..., a, a] - 2.0 * xi * xj * H[..., a, b]
            - xi * g[..., a] - xj * g[..., b])


def laplace_beltrami(f, x):
    return sum(omega_ij_squared(f, i, j, x) for i, j in PAIRS)


def laplace_beltrami_check(entry, quad):
    """sup over the nodes of |Delta_S phi + d(d+1) phi|."""
    w = quad.nodes
    resid = laplace_beltrami(entry.poly, w) + entry.degree * (entry.degree + 1) * entry.poly.value(w)
    return float(np.max(np.abs(resid)))


def angular_energy(p, rho, quad, basis=None):
    """Angular Dirichlet energy at radius rho, computed directly and spectrally.

    Returns ``(direct, spectral)``; the two agree when ``p(rho .)`` lies in the
    span of the basis and the quadrature integrates the products exactly.
    """
    if not 0.0 < rho <= 1.0:
        raise OutOfDomainError("radius must lie in (0, 1]")
    basis = basis or make_basis()
    x = rho * quad.nodes
    direct = sum(quad.integrate(omega_ij(p, i, j, x) ** 2) for i, j in PAIRS)
    coefs = expand(p, rho, basis, quad)
    d = basis.degrees
    spectral = float(np.sum(d * (d + 1) * coefs ** 2))
    return float(direct), spectral


def ibyp_check(f, g, i, j, quad):
    """|int_S (Omega_ij f) g + int_S f (Omega_ij g)|."""
    w = quad.nodes
    lhs = quad.integrate(omega_ij(f, i, j, w) * g.value(w))
    rhs = quad.integrate(f.value(w) * omega_ij(g, i, j, w))
    return float(abs(lhs + rhs))


def angcond_constant_spectral(exp, floor=1e-14):
    """max over rho of sum d(d+1) p_n^2 / sum p_n^2."""
    d = exp.degrees
    num = exp.coefficients ** 2 @ (d * (d + 1))
    den = np.sum(exp.coefficients ** 2, axis=1)
    keep = den >= floor
    if not np.any(keep):
        raise DegenerateInputError("expansion vanishes at every radius")
    return float(np.max(num[keep] / den[keep]))


def pair_list():
    return list(combinations((1, 2, 3), 2))


def write_expansion(exp, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    exp.to_csv(path)

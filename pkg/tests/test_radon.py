import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad

from backscatter_lab import potential as P
from backscatter_lab import radon as R
from backscatter_lab.errors import OutOfDomainError, SingularGeometryError

PARAB = P.polynomial_bump(1)  # 1 - |x|^2 on the unit ball
VEC = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


def closed_P(t):
    return math.pi * (1 - t * t) ** 2 / 2


def closed_Ptau(t):
    return -2 * math.pi * t * (1 - t * t)


@pytest.mark.parametrize("tau", [-1.5, -1.0, 1.0, 1.2])
def test_plane_misses_support(tau):
    assert R.radon_plane(PARAB, [0, 0, 1], tau) == 0.0


def test_paraboloid_center_plane():
    # oracle: 2-D quadrature over the unit disk
    val = dblquad(lambda r, th: (1 - r * r) * r, 0, 2 * math.pi, 0, 1)[0]
    assert val == pytest.approx(math.pi / 2)
    assert R.radon_plane(PARAB, [0, 0, 1], 0.0) == pytest.approx(val, rel=1e-12)


@pytest.mark.parametrize("tau", [-0.7, 0.1, 0.5, 0.9])
def test_paraboloid_closed_form(tau):
    assert R.radon_plane(PARAB, [0.6, 0, 0.8], tau) == pytest.approx(closed_P(tau), rel=1e-10)


def test_radial_rotation_invariance():
    q = P.exponential_bump()
    a = R.radon_plane(q, [0, 0, 1], 0.3)
    b = R.radon_plane(q, [1 / math.sqrt(3)] * 3, 0.3)
    assert abs(a - b) <= 1e-10


def test_tau_derivative_closed_form():
    fd, div = R.radon_tau_derivative(PARAB, [0, 0, 1], 0.5)
    assert fd == pytest.approx(-0.75 * math.pi, rel=1e-3)
    assert div == pytest.approx(-0.75 * math.pi, rel=1e-3)


def test_tau_derivative_outside():
    assert R.radon_tau_derivative(PARAB, [0, 0, 1], 1.5) == (0.0, 0.0)


def test_tau_derivative_even():
    fd, div = R.radon_tau_derivative(P.exponential_bump(), [0, 1, 0], 0.0)
    assert abs(fd) <= 1e-12 and abs(div) <= 1e-12


@pytest.mark.parametrize("x, v", [([1, 0, 0], [0, 1, 0]), ([0, 0, 0], [3, -1, 2]),
                                  ([1, 2, 3], [4, 5, 6])])
def test_tangential_examples(x, v):
    assert R.tangential_decomposition_check(x, v) <= 1e-12


@given(VEC, VEC)
def test_tangential_property(x, v):
    scale = max(1.0, float(x @ x) * float(np.linalg.norm(v)))
    assert R.tangential_decomposition_check(x, v) <= 1e-14 * scale * 10


@given(VEC)
def test_tangent_vectors_bounded_by_radius(x):
    # |T_ij| = sqrt(x_i^2 + x_j^2), so the bound holds with constant 1
    for T in R.tangent_frame(x).vectors:
        assert np.linalg.norm(T) <= np.linalg.norm(x) * (1 + 1e-12)


def test_alpha_direction_example():
    w, tau, x = np.array([0.0, 0, 1]), 0.5, np.array([0.5, 0, 0.5])
    a = R.alpha_direction(x, w, tau)
    rho, r = math.sqrt(0.5), 0.5
    rhat = np.array([1.0, 0, 0])
    assert np.allclose((rho / r) * a + (tau / r) * rhat, w, atol=1e-12)
    assert abs(np.linalg.norm(a) - 1) <= 1e-12


@settings(max_examples=50)
@given(st.floats(0.05, 0.95), st.floats(0.05, 2.0), st.floats(0, 2 * math.pi))
def test_alpha_orthogonal_to_x(tau, r, th):
    w = np.array([0.0, 0.6, 0.8])
    e1, e2 = R.plane_basis(w)
    x = tau * w + r * (math.cos(th) * e1 + math.sin(th) * e2)
    assert abs(R.alpha_direction(x, w, tau) @ x) <= 1e-12


def test_alpha_on_axis_raises():
    with pytest.raises(SingularGeometryError):
        R.alpha_direction([0, 0, 0.5], [0, 0, 1], 0.5)
    with pytest.raises(OutOfDomainError):
        R.alpha_direction([0.3, 0, 0.4], [0, 0, 1], 0.5)


def test_ptau_decomposition_radial():
    point, ang, total = R.ptau_decomposition(PARAB, [0, 0, 1], 0.5)
    assert abs(ang) <= 1e-8
    assert total == pytest.approx(-0.75 * math.pi, rel=1e-10)


@pytest.mark.parametrize("tau", [0.2, 0.5, 0.8])
def test_ptau_decomposition_degree_one(tau):
    p = P.harmonic_potential(P.PolynomialProfile(3), 1, 1)
    w = np.array([0.36, 0.48, 0.8])
    _, ang, total = R.ptau_decomposition(p, w, tau)
    fd, _ = R.radon_tau_derivative(p, w, tau)
    assert abs(ang) > 1e-4
    assert total == pytest.approx(fd, rel=1e-3, abs=1e-6)


def test_ptau_decomposition_near_edge():
    point, ang, total = R.ptau_decomposition(P.polynomial_bump(6), [0, 0, 1], 0.999)
    assert max(abs(point), abs(ang), abs(total)) <= 1e-12


def test_sphere_delta_weight_examples():
    assert R.sphere_delta_weight([0, 0, 1], 0.5) == pytest.approx(2 * math.pi)
    assert R.sphere_delta_weight([0, 0.4, 0], 0.5) == 0.0
    assert R.sphere_delta_weight([0, 0.5, 0], -0.5) == pytest.approx(math.pi / 0.5)
    with pytest.raises(SingularGeometryError):
        R.sphere_delta_weight([0, 0, 0], 0.1)


def test_sphere_delta_mollified_cross_check():
    rng = np.random.default_rng(9)
    n = 0
    while n < 20:
        x = rng.uniform(-1.5, 1.5, 3)
        t = rng.uniform(-1, 1)
        r = np.linalg.norm(x)
        if r < 0.1 or abs(r - abs(t)) < 5e-3:
            continue
        n += 1
        assert abs(R.sphere_delta_mollified(x, t, 1e-3) - R.sphere_delta_weight(x, t)) <= 0.01 * 2 * math.pi / r


def test_ptaudiff_zero():
    assert R.ptaudiff_terms(P.Zero(), 0.5) == (0.0, 0.0, 0.0)


def test_ptaudiff_radial_and_scaling():
    q = P.exponential_bump()
    lhs, rad, ang = R.ptaudiff_terms(q, 0.4)
    assert ang == pytest.approx(0.0, abs=1e-14)
    assert lhs > 0 and rad > 0
    lhs2, rad2, _ = R.ptaudiff_terms(P.Scale(q, 3.0), 0.4)
    assert lhs2 == pytest.approx(9 * lhs, rel=1e-12) and rad2 == pytest.approx(9 * rad, rel=1e-12)


def test_radon_profile_csv(tmp_path):
    prof = R.radon_profile(PARAB, [[0, 0, 1], [1, 0, 0]], [-0.5, 0.0, 0.5])
    prof.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "omega_index,tau,P" and len(lines) == 7
    assert (tmp_path / "r.json").exists()
    assert np.allclose(prof.values[:, 0], prof.values[:, 1])

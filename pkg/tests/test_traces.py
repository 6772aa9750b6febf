import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from backscatter_lab import potential as P
from backscatter_lab import traces as T
from backscatter_lab.errors import ConfigurationError, PreconditionError

EZ = np.array([0.0, 0.0, 1.0])


def _ramp_oracle(k, j):
    dens = lambda z: (k - z) ** j * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return integrate.quad(dens, -np.inf, k, epsabs=1e-13)[0] / math.factorial(j)


@pytest.mark.parametrize("j", range(4))
@pytest.mark.parametrize("k", [-2.5, -0.3, 0.0, 1.1, 3.0])
def test_smeared_ramps_match_quadrature(j, k):
    assert T.smeared_ramps(k, 4)[j] == pytest.approx(_ramp_oracle(k, j), abs=1e-10)


def test_smeared_ramps_term_limit():
    with pytest.raises(ConfigurationError):
        T.smeared_ramps(0.0, 5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_fit_recovers_synthetic_traces(a):
    eps, dt = 0.25, 0.02
    times = np.arange(-1.5, 1.5, dt)
    phase = np.array([-0.2, 0.3])
    k = (times[:, None] - phase) / eps
    hist = T.smeared_ramps(k, 3) @ (np.array(a) * eps ** np.arange(3))
    fit = T.fit_traces(hist, times, phase, eps)
    assert np.allclose(fit, np.array(a)[None, :], atol=1e-8)


def test_fit_needs_window_coverage():
    with pytest.raises(ConfigurationError, match="window"):
        T.fit_traces(np.zeros((3, 1)), np.array([0.0, 0.1, 0.2]), np.array([5.0]), 0.25)


def test_trace_points_geometry():
    pts = T.trace_points(EZ, 0.25)
    assert np.all(np.linalg.norm(pts, axis=1) <= 1 + 1e-12)
    deep = T.trace_points(EZ, 0.25, min_depth=0.5)
    b = deep @ EZ
    entry = -np.sqrt(1 - np.sum(deep[:, :2] ** 2, axis=1))
    assert np.all(b - entry >= 0.5 - 1e-12) and len(deep) < len(pts)


def test_jump_trace_matches_line_quadrature():
    q = P.exponential_bump(0.2)
    x = np.array([[0.1, -0.2, 0.3]])
    oracle = integrate.quad(lambda s: q.value(x[0] + s * EZ), -2, 0, epsabs=1e-13)[0]
    assert T.jump_trace(q, x, EZ)[0] == pytest.approx(-0.5 * oracle, rel=1e-8)


def test_traces_of_zero_potential_vanish():
    pts = T.trace_points(EZ, 0.5)
    assert not np.any(T.jump_trace(P.Zero(), pts, EZ))
    assert not np.any(T.ut_trace(P.Zero(), pts, EZ))


def test_transverse_laplacian_of_radial_bump():
    q = P.exponential_bump(0.2)
    x = np.array([0.2, 0.1, -0.3])
    H = q.hessian(x)
    assert T.transverse_laplacian(q, EZ)(x) == pytest.approx(H[0, 0] + H[1, 1])


def test_star_bound_zero_potential():
    rep = T.star_bound_check(P.Zero(), EZ, h=1 / 8)
    assert rep.u_star == 0.0 and rep.holds


def test_cylinder_pairs_shape():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1.5, 1.5, (200, 3))
    for q, f, g, (c, R) in T.cylinder_pairs(EZ):
        assert c2_sup(q) <= 0.25 + 1e-12
        outside = (x[:, 2] <= -1) | (np.hypot(x[:, 0], x[:, 1]) >= 1)
        assert not np.any(f(x[outside]))
        d = 1e-6
        fd = (f(x + d * EZ) - f(x - d * EZ)) / (2 * d)
        assert np.allclose(g(x), fd, atol=1e-6)
        inside = (x[:, 2] <= 0) & (f(x) != 0)
        assert np.all(np.linalg.norm(x[inside] - c, axis=1) <= R)


def c2_sup(q):
    return P.c2_norm(q).sup_value


def test_characteristic_precondition():
    _, f, g, supp = T.cylinder_pairs(EZ)[0]
    with pytest.raises(PreconditionError):
        T.characteristic_bound_check(P.exponential_bump(1.0), f, g, supp, EZ, h=1 / 8)


def test_characteristic_bound_free_transport():
    q, f, g, supp = T.cylinder_pairs(EZ)[0]
    rep = T.characteristic_bound_check(q, f, g, supp, EZ, h=1 / 8, half_width=4.0)
    assert rep.holds and rep.ratio <= 2.0
    assert rep.a_simulated <= 1.05

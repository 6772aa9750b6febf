import json
import math

import numpy as np
import pytest

from backscatter_lab import farfield as F
from backscatter_lab import inverse as I
from backscatter_lab import potential as P
from backscatter_lab import wave as W
from backscatter_lab.errors import ConfigurationError, OutOfDomainError
from backscatter_lab.geometry import TimeSeries

EZ = np.array([0.0, 0.0, 1.0])


def fake_run(u, dn, offset=1.0, theta=EZ, t0=-1.0, dt=0.01):
    sc = W.WaveScenario(P.exponential_bump(0.1), EZ, h=1 / 8)
    meta = {"offset": offset, "theta": np.asarray(theta)}
    rec = {"u": TimeSeries(t0, dt, u, dict(meta)), "dn": TimeSeries(t0, dt, dn, dict(meta))}
    return W.WaveRun(sc, {"p": rec}, len(u))


@pytest.fixture(scope="module")
def plane_run():
    q = P.exponential_bump(0.2)
    sc = I.plane_scenario(q, EZ, 1 / 8, s_min=-1.0, offset=1.5)
    probes = [W.PlaneProbe("near", EZ, 1.0), W.PlaneProbe("far", EZ, 1.5),
              W.PlaneProbe("back", -EZ, 1.0)]
    return W.run(sc, probes)


def test_relative_l2():
    assert F.relative_l2([1, 1], [1, 1]) == 0.0
    assert F.relative_l2([3, 4], [0, 0]) == 5.0
    assert F.relative_l2([2, 0], [1, 0]) == 1.0


def test_extract_alpha_maps_time_to_delay():
    t = -1.0 + 0.01 * np.arange(301)
    dn = np.sin(t)
    alpha = F.extract_alpha(fake_run(np.zeros_like(t), dn, offset=1.0), "p")
    s = alpha.times
    assert np.allclose(alpha.samples, -np.sin(1.0 - s) / (2 * math.pi), atol=1e-12)
    assert alpha.meta["variable"] == "s"


def test_missing_plane_probe():
    with pytest.raises(ConfigurationError):
        F.extract_alpha(fake_run(np.zeros(5), np.zeros(5)), "nope")


def test_gradient_and_ut_forms_agree(plane_run):
    for name in ("near", "back"):
        a = F.extract_alpha(plane_run, name)
        b = F.extract_alpha_ut(plane_run, name)
        assert F.relative_l2(a.samples, b.samples) < 0.05


def test_transport_between_parallel_planes(plane_run):
    assert F.transport_check(plane_run, "near", "far") < 0.02


def test_transport_preconditions():
    t = np.zeros(10)
    run = fake_run(t, t, offset=0.5)
    with pytest.raises(OutOfDomainError):
        F.transport_check(run, "p", "p")


def test_zero_potential_far_field_vanishes():
    sc = I.plane_scenario(P.Zero(), EZ, 1 / 8, s_min=-0.5)
    r = W.run(sc, [W.PlaneProbe("back", -EZ, 1.0)])
    assert not np.any(F.extract_alpha(r, "back").samples)


def test_support_tail():
    a = TimeSeries(0.0, 0.1, [0.0, 2.0, 1.0, 0.5])
    assert F.support_tail(a, 0.15) == pytest.approx(0.5)
    assert F.support_tail(TimeSeries(0.0, 0.1, np.zeros(3)), 0.0) == 0.0


def test_friedlander_probe_errors():
    with pytest.raises(ConfigurationError):
        F.friedlander_probes(EZ, [2, 3], offset=[0, 0, 1])
    with pytest.raises(ConfigurationError, match="three radii"):
        F.friedlander_estimate(None, "p", [2, 3], [0.0])
    names = [p.name for p in F.friedlander_probes(EZ, [2, 3, 4], offset=[1, 0, 0])]
    assert names == ["r0", "r1", "r2", "x0", "x1", "x2"]


def test_table_csv_and_sidecar(tmp_path):
    dirs = np.array([[0, 0, -1.0], [0, 0, 1.0]])
    tab = F.FarFieldTable(dirs, [[0, 1]], [0.0, 0.5], [[1.0, -2.5]], eps=0.25, weights=[4 * math.pi])
    tab.to_csv(tmp_path / "t.csv")
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0] == "theta_index,omega_index,s,alpha" and len(rows) == 3
    side = json.loads((tmp_path / "t.json").read_text())
    assert side["eps"] == 0.25 and side["weights"] == [4 * math.pi]
    assert np.allclose(tab.theta(0), -tab.omega(0))


def test_table_validation():
    with pytest.raises(ValueError):
        F.FarFieldTable(np.eye(3), [[0, 1]], [0.0, 1.0], [[1.0]], eps=0.1)
    with pytest.raises(ValueError):
        F.FarFieldTable(np.eye(3), [[0, 1]], [0.0], [[np.nan]], eps=0.1)


def test_backscatter_table_shared_grid():
    t = -1.0 + 0.01 * np.arange(201)
    runs = [fake_run(t, np.cos(t)), fake_run(t, np.cos(t), t0=-0.9)]
    tab = F.backscatter_table(runs, "p", [[0, 0, 1.0], [1.0, 0, 0]])
    assert tab.values.shape == (2, len(tab.s))
    assert tab.s[0] >= 1.0 - (-0.9 + 2.0) - 1e-12
    assert np.allclose(tab.theta(1), [-1, 0, 0])

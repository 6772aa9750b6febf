import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backscatter_lab.errors import FormatError, OutOfDomainError
from backscatter_lab.geometry import (
    Grid3D, ScalarField3D, TimeSeries, fibonacci_directions, read_field, trilinear_eval, unit,
    write_field,
)


@pytest.fixture
def grid():
    return Grid3D.cube(1.0, 0.25)


def affine(x):
    return x[..., 0] + 2.0 * x[..., 1] - x[..., 2]


def test_cube_dims(grid):
    assert grid.dims == (9, 9, 9)
    assert np.allclose(grid.lower, -1.0) and np.allclose(grid.upper, 1.0)


def test_cube_rejects_non_integer_cells():
    with pytest.raises(ValueError):
        Grid3D.cube(1.0, 0.3)


@given(st.tuples(*[st.floats(-1.0, 1.0)] * 3))
def test_trilinear_exact_on_affine(p):
    f = ScalarField3D.sample(Grid3D.cube(1.0, 0.25), affine)
    assert trilinear_eval(f, p) == pytest.approx(affine(np.array(p)), abs=1e-12)


def test_trilinear_node_value_exact(grid):
    rng = np.random.default_rng(1)
    f = ScalarField3D(grid, rng.normal(size=grid.dims))
    idx = (3, 5, 7)
    assert trilinear_eval(f, grid.node(idx)) == f.values[idx]


def test_trilinear_outside_raises(grid):
    f = ScalarField3D.sample(grid, affine)
    with pytest.raises(OutOfDomainError):
        trilinear_eval(f, [1.25, 0.0, 0.0])


def test_snapshot_round_trip(tmp_path, grid):
    rng = np.random.default_rng(2)
    f = ScalarField3D(grid, rng.normal(size=grid.dims), time=0.375)
    write_field(f, tmp_path / "f.wbsl")
    g = read_field(tmp_path / "f.wbsl")
    assert g.grid == grid
    assert g.time == 0.375
    assert g.values.tobytes() == f.values.tobytes()


def test_snapshot_truncated(tmp_path, grid):
    write_field(ScalarField3D.sample(grid, affine), tmp_path / "f.wbsl")
    raw = (tmp_path / "f.wbsl").read_bytes()
    (tmp_path / "t.wbsl").write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        read_field(tmp_path / "t.wbsl")
    (tmp_path / "h.wbsl").write_bytes(raw[:10])
    with pytest.raises(FormatError):
        read_field(tmp_path / "h.wbsl")


def test_snapshot_bad_magic(tmp_path, grid):
    write_field(ScalarField3D.sample(grid, affine), tmp_path / "f.wbsl")
    raw = bytearray((tmp_path / "f.wbsl").read_bytes())
    raw[:4] = b"XXXX"
    (tmp_path / "b.wbsl").write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        read_field(tmp_path / "b.wbsl")


def test_unit_checks_norm():
    assert np.allclose(unit([0, 0, 2]), [0, 0, 1])
    with pytest.raises(OutOfDomainError):
        unit([0, 0, 2], tol=1e-12)
    with pytest.raises(OutOfDomainError):
        unit([0, 0, 0])


@pytest.mark.parametrize("n", [1, 16, 64])
def test_fibonacci_directions(n):
    d, w = fibonacci_directions(n)
    assert d.shape == (n, 3)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
    assert w.sum() == pytest.approx(4 * np.pi)


def test_fibonacci_moments():
    d, w = fibonacci_directions(400)
    assert abs(w @ d[:, 2]) < 1e-2
    assert w @ d[:, 2] ** 2 == pytest.approx(4 * np.pi / 3, rel=1e-2)


def test_time_series_interpolation_and_csv(tmp_path):
    ts = TimeSeries(0.0, 0.1, np.sin(np.arange(50) * 0.1), {"probe": "x"})
    assert ts(0.55) == pytest.approx(np.sin(0.55), abs=1e-5)
    assert ts(-1.0) == 0.0
    ts.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("# ") and lines[1] == "t,value"
    assert len(lines) == 52


def test_time_series_rejects_nonfinite():
    with pytest.raises(ValueError):
        TimeSeries(0.0, 0.1, [0.0, np.nan])

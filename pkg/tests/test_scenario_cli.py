import json

import numpy as np
import pytest

from backscatter_lab import cli
from backscatter_lab.errors import ConfigurationError
from backscatter_lab.scenario import CRITERIA, TOLERANCES, parse_scenario, run_scenario

BUMP = {"variant": "exponential-bump", "amplitude": 0.2}


def doc(**kw):
    return json.dumps(kw)


def test_forward_defaults():
    sc = parse_scenario(doc(kind="forward", potential=BUMP))
    assert sc.h == pytest.approx(1 / 16)
    assert sc.eps == pytest.approx(4 * sc.h)
    assert sc.dt == pytest.approx(0.9 * sc.h / 3 ** 0.5)
    assert sc.half_width >= 3.0 and sc.half_width >= sc.min_half_width
    assert sc.t_end == pytest.approx(1 + 3 * sc.eps + 2 * sc.h)
    assert sc.tolerances["wavefront_trace"] == TOLERANCES["wavefront_trace"]


def test_every_check_names_a_criterion():
    assert set(CRITERIA.values()) == set(range(1, 20))


def test_bad_json():
    with pytest.raises(ConfigurationError):
        parse_scenario("{kind: forward")


def test_unknown_kind_reports_path():
    with pytest.raises(ConfigurationError, match="schema violation at kind"):
        parse_scenario(doc(kind="nope"))


def test_field_path_in_schema_error():
    with pytest.raises(ConfigurationError, match=r"grid\.h"):
        parse_scenario(doc(kind="forward", potential=BUMP, grid={"h": "small"}))


def test_cfl_error_text():
    with pytest.raises(ConfigurationError, match=r"violates the CFL bound dt <= 0\.9 h/sqrt\(3\)"):
        parse_scenario(doc(kind="forward", potential=BUMP, grid={"h": 0.0625, "dt": 0.05}))


def test_half_width_below_minimum_names_it():
    with pytest.raises(ConfigurationError, match="causality minimum L = "):
        parse_scenario(doc(kind="farfield", potential=BUMP, grid={"half_width": 2.0}))


def test_unknown_tolerance():
    with pytest.raises(ConfigurationError):
        parse_scenario(doc(kind="radon", tolerances={"nonsense": 1.0}))


def test_identity_needs_two_potentials():
    with pytest.raises(ConfigurationError):
        parse_scenario(doc(kind="identity", potentials=[BUMP]))


def test_explicit_directions_are_normalized():
    sc = parse_scenario(doc(kind="born", potential=BUMP, directions={"list": [[0, 0, 2]]}))
    assert np.allclose(sc.directions, [[0, 0, 1]])


@pytest.mark.parametrize("kind", ["harmonics", "radon", "energy"])
def test_cheap_kinds_pass(kind, tmp_path):
    status, summary = run_scenario(parse_scenario(doc(kind=kind)), tmp_path, seed=3)
    assert status == 0 and summary["passed"]
    assert (tmp_path / "summary.json").exists()
    assert all(c["criterion"] == CRITERIA[c["name"]] for c in summary["checks"])
    assert set(summary["artifacts"]) <= {p.name for p in tmp_path.iterdir()}


def test_truncated_basis_breaks_angular_energy_identity(tmp_path):
    # the default potential carries a degree-5 term
    _, summary = run_scenario(parse_scenario(doc(kind="harmonics", max_degree=3)), tmp_path)
    check = next(c for c in summary["checks"] if c["name"] == "angular_energy_identity")
    assert not check["passed"] and check["value"] > 0.1


def test_validate_subcommand(tmp_path, capsys):
    f = tmp_path / "s.json"
    f.write_text(doc(kind="radon"))
    assert cli.main(["validate", "--scenario", str(f)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["kind"] == "radon"


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(doc(kind="forward", potential=BUMP, grid={"h": 0.0625, "dt": 1.0}))
    assert cli.main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err
    assert cli.main(["validate", "--scenario", str(tmp_path / "missing.json")]) == 2
    good = tmp_path / "good.json"
    good.write_text(doc(kind="energy"))
    assert cli.main(["run", "--scenario", str(good), "--out", str(tmp_path / "o")]) == 0
    assert "PASS criterion  5 beta_integral" in capsys.readouterr().out


def test_tight_tolerance_fails_run(tmp_path):
    sc = parse_scenario(doc(kind="energy", tolerances={"beta_integral": 1e-300}))
    status, summary = run_scenario(sc, tmp_path, seed=0)
    assert status in (0, 1)
    check = next(c for c in summary["checks"] if c["name"] == "beta_integral")
    assert check["passed"] == (check["value"] <= 1e-300)
    assert status == (0 if summary["passed"] else 1)


@pytest.mark.slow
def test_identity_noise_floor(tmp_path):
    sc = parse_scenario(doc(kind="identity", potentials=[BUMP, BUMP], grid={"h": 0.125}))
    _, summary = run_scenario(sc, tmp_path, seed=0)
    check = next(c for c in summary["checks"] if c["name"] == "pair_identity_noise_floor")
    assert check["passed"]

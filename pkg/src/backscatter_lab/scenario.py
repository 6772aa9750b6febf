"""Declarative experiment scenarios: schema, defaults, sizing rules and runners.

A scenario is a single JSON document::

    {"kind": "farfield",
     "potential": {"variant": "exponential-bump", "amplitude": 0.2},
     "grid": {"h": 0.0625},
     "params": {"omega": [0, 0, 1]},
     "tolerances": {"peak_scattering": 0.05}}

Top-level fields

kind
    forward, farfield, identity, born, translate, harmonics, radon, energy
    or smallness.
potential / potentials
    One potential block, or a list of them (identity takes two: q1, q2).
    A block is ``{"variant": ..., ...}`` with variants zero,
    exponential-bump, polynomial-bump (``k``), harmonic (``degree``,
    ``order``, ``profile``, ``k``), translate (``base``, ``shift``), scale
    (``base``, ``factor``) and sum (``terms``); every variant but the
    combinators takes ``amplitude``.
grid
    ``half_width`` (L, default 3, raised to the causality minimum when
    omitted), ``h`` (1/16), ``dt`` (0.9 h / sqrt 3) and ``eps`` (4 h).
directions
    ``{"fibonacci": N}`` (default N = 64) or ``{"list": [[x, y, z], ...]}``.
time
    ``t_start`` and ``t_end`` for the kinds that run a single simulation.
tolerances
    Overrides for the check thresholds in :data:`TOLERANCES`.
params
    Kind-specific settings, listed in :data:`PARAM_SCHEMAS`.
max_degree
    Largest spherical-harmonic degree (default 6).

Every check in the summary carries the number of the acceptance criterion
it implements (see :data:`CRITERIA`).
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, farfield, harmonics, inverse, radon, traces, wave
from .errors import ConfigurationError, LabError
from .geometry import fibonacci_directions, fmt, unit, write_field, write_json
from .potential import Scale, from_spec

KINDS = ("forward", "farfield", "identity", "born", "translate", "harmonics", "radon",
         "energy", "smallness")

CRITERIA = {
    "tangential_identity": 1,
    "sphere_area": 2,
    "gram_matrix": 2,
    "laplace_beltrami": 2,
    "angular_energy_identity": 3,
    "radial_ptau_reduction": 4,
    "ptau_angular_term": 4,
    "beta_integral": 5,
    "sphere_delta_weight": 6,
    "wavefront_trace": 7,
    "wavefront_trace_order": 7,
    "ut_characteristic_trace": 8,
    "ut_characteristic_trace_order": 8,
    "transport_identity": 9,
    "dn_equivalence": 10,
    "friedlander_rate": 11,
    "friedlander_offset": 11,
    "peak_scattering": 12,
    "backscatter_support": 13,
    "pair_identity": 14,
    "pair_identity_order": 14,
    "pair_identity_noise_floor": 14,
    "born_linearization": 15,
    "translation_property": 16,
    "translation_shift": 16,
    "star_norm_bound": 17,
    "characteristic_bound": 18,
    "born_reconstruction": 19,
}

# upper bounds, except the *_order / *_rate entries, which are lower bounds
TOLERANCES = {
    "tangential_identity": 1e-12,
    "sphere_area": 1e-10,
    "gram_matrix": 1e-8,
    "laplace_beltrami": 1e-8,
    "angular_energy_identity": 1e-6,
    "radial_ptau_reduction": 1e-3,
    "ptau_angular_term": 1e-8,
    "beta_integral": 1e-6,
    "sphere_delta_weight": 0.01,
    "wavefront_trace": 0.05,
    "wavefront_trace_order": 1.0,
    "ut_characteristic_trace": 0.08,
    "ut_characteristic_trace_order": 1.0,
    "transport_identity": 0.02,
    "dn_equivalence": 0.02,
    "friedlander_rate": 0.8,
    "friedlander_offset": 0.05,
    "peak_scattering": 0.05,
    "backscatter_support": 0.01,
    "pair_identity": 0.10,
    "pair_identity_order": 1.0,
    "pair_identity_noise_floor": 1e-3,
    "translation_property": 0.02,
    "translation_shift": 1e-12,
    "born_spread": 0.05,
}

BORN_RATIO_BAND = (1.7, 2.3)
BORN_ORDER_BAND = (0.8, 1.3)

_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_NUMS = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "potential": {"$ref": "#/$defs/potential"},
        "potentials": {"type": "array", "items": {"$ref": "#/$defs/potential"}, "minItems": 1},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"half_width": _POS, "h": _POS, "dt": _POS, "eps": _POS},
        },
        "directions": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["fibonacci"],
                 "properties": {"fibonacci": {"type": "integer", "minimum": 1}}},
                {"type": "object", "additionalProperties": False, "required": ["list"],
                 "properties": {"list": {"type": "array", "items": _VEC3, "minItems": 1}}},
            ]
        },
        "time": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"t_start": {"type": "number"}, "t_end": {"type": "number"}},
        },
        "tolerances": {"type": "object", "additionalProperties": _POS},
        "params": {"type": "object"},
        "max_degree": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
    },
    "$defs": {
        "potential": {
            "type": "object",
            "required": ["variant"],
            "additionalProperties": False,
            "properties": {
                "variant": {"enum": ["zero", "exponential-bump", "polynomial-bump", "harmonic",
                                     "translate", "scale", "sum"]},
                "amplitude": {"type": "number"},
                "k": {"type": "integer", "minimum": 1},
                "degree": {"type": "integer", "minimum": 0},
                "order": {"type": "integer"},
                "profile": {"enum": ["exponential", "polynomial"]},
                "base": {"$ref": "#/$defs/potential"},
                "shift": _VEC3,
                "factor": {"type": "number"},
                "terms": {"type": "array", "items": {"$ref": "#/$defs/potential"},
                          "minItems": 1},
            },
        }
    },
}


def _params(props):
    return {"type": "object", "additionalProperties": False, "properties": props}


PARAM_SCHEMAS = {
    "forward": _params({"omega": _VEC3, "trace_spacing": _POS,
                        "min_depth": {"type": "number", "minimum": 0},
                        "refine": {"type": "boolean"}, "snapshots": _NUMS}),
    "farfield": _params({"omega": _VEC3, "s_min": {"type": "number"},
                         "friedlander": {"type": "boolean"}, "radii": _NUMS,
                         "friedlander_half_width": _POS, "offset": _VEC3}),
    "identity": _params({"omegas": {"type": "array", "items": _VEC3, "minItems": 1},
                         "tau_range": _PAIR, "refine": {"type": "boolean"}}),
    "born": _params({"omega": _VEC3, "amplitudes": {**_NUMS, "minItems": 3},
                     "convention": {"enum": ["general", "double-delay"]},
                     "reconstruct": {"type": "boolean"}, "spacing": _POS}),
    "translate": _params({"shift": _VEC3, "theta": _VEC3, "omega": _VEC3, "s_range": _PAIR}),
    "harmonics": _params({"rho": _NUMS, "quad_order": {"type": "integer", "minimum": 0}}),
    "radon": _params({"tau": _NUMS, "samples": {"type": "integer", "minimum": 1},
                      "delta_width": _POS, "ptau_tau": _NUMS}),
    "energy": _params({"rho": _NUMS, "tau": _NUMS,
                       "samples": {"type": "integer", "minimum": 1}}),
    "smallness": _params({"omega": _VEC3, "c2_target": _POS,
                          "characteristic": {"type": "boolean"}}),
}

DEFAULT_POTENTIALS = {
    "harmonics": [{"variant": "sum", "terms": [
        {"variant": "harmonic", "degree": 2, "order": 1, "profile": "polynomial", "k": 3},
        {"variant": "harmonic", "degree": 5, "order": -3, "profile": "polynomial", "k": 3,
         "amplitude": 0.5}]}],
    "radon": [{"variant": "polynomial-bump", "k": 1}],
    "energy": [{"variant": "polynomial-bump", "k": 2}],
    "smallness": [
        {"variant": "exponential-bump"},
        {"variant": "polynomial-bump", "k": 3},
        {"variant": "polynomial-bump", "k": 4},
        {"variant": "harmonic", "degree": 1, "order": 0, "profile": "polynomial", "k": 4},
        {"variant": "harmonic", "degree": 2, "order": 2, "profile": "exponential"},
    ],
}

DEFAULT_PARAMS = {
    "forward": {"omega": [0.0, 0.0, 1.0], "trace_spacing": 0.125, "min_depth": 0.0,
                "refine": False, "snapshots": []},
    "farfield": {"omega": [0.0, 0.0, 1.0], "friedlander": False, "radii": [4.0, 6.0, 8.0],
                 "friedlander_half_width": 10.0, "offset": [0.5, 0.0, 0.0]},
    "identity": {"omegas": [[0.0, 0.0, 1.0]], "tau_range": [-1.25, 1.0], "refine": False},
    "born": {"omega": [0.0, 0.0, 1.0], "amplitudes": [0.2, 0.1, 0.05],
             "convention": "general", "reconstruct": False, "spacing": 0.0625},
    "translate": {"shift": [0.0, 0.0, 0.5], "omega": [0.0, 0.0, 1.0], "s_range": [-1.0, 3.0]},
    "harmonics": {"rho": [0.25, 0.5, 0.75]},
    "radon": {"tau": [round(-1.0 + 0.05 * i, 10) for i in range(41)], "samples": 1000,
              "delta_width": 1e-3, "ptau_tau": [round(0.1 * i, 10) for i in range(1, 10)]},
    "energy": {"rho": [round(0.05 * i, 10) for i in range(1, 21)],
               "tau": [round(0.1 * i, 10) for i in range(1, 10)], "samples": 20},
    "smallness": {"omega": [0.0, 0.0, 1.0], "characteristic": True},
}


@dataclass
class Scenario:
    kind: str
    potentials: list
    h: float
    dt: float
    eps: float
    half_width: float | None  # filled with max(3, causality minimum) when omitted
    directions: np.ndarray
    weights: np.ndarray
    direction_spec: dict
    t_start: float | None
    t_end: float | None
    tolerances: dict
    params: dict
    max_degree: int = 6
    output: str | None = None
    seed: int = 0
    min_half_width: float = 0.0
    document: dict = field(default_factory=dict, repr=False)

    def potential(self, k=0):
        return from_spec(self.potentials[k])

    def to_dict(self):
        return {
            "kind": self.kind,
            "potentials": self.potentials,
            "grid": {"h": self.h, "dt": self.dt, "eps": self.eps,
                     "half_width": self.half_width, "min_half_width": self.min_half_width},
            "directions": self.direction_spec,
            "time": {"t_start": self.t_start, "t_end": self.t_end},
            "tolerances": self.tolerances,
            "params": self.params,
            "max_degree": self.max_degree,
            "seed": self.seed,
        }


def _path(err):
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def _validate(doc, schema, prefix=""):
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc),
                    key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        e = errors[0]
        where = _path(e)
        if prefix:
            where = prefix if where == "<root>" else f"{prefix}.{where}"
        raise ConfigurationError(f"schema violation at {where}: {e.message}")


def parse_scenario(text):
    """Validate a JSON scenario document and fill in the defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"scenario is not valid JSON: {e}") from None
    _validate(doc, SCHEMA)
    kind = doc["kind"]
    _validate(doc.get("params", {}), PARAM_SCHEMAS[kind], "params")
    if "potential" in doc and "potentials" in doc:
        raise ConfigurationError("schema violation at potentials: give potential or potentials")
    if "potential" in doc:
        pots = [doc["potential"]]
    elif "potentials" in doc:
        pots = list(doc["potentials"])
    elif kind in DEFAULT_POTENTIALS:
        pots = copy.deepcopy(DEFAULT_POTENTIALS[kind])
    else:
        raise ConfigurationError(f"schema violation at potential: kind {kind!r} needs a potential")
    for i, spec in enumerate(pots):
        try:
            from_spec(spec)
        except (LabError, KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid potential at potentials.{i}: {e}") from None
    if kind == "identity" and len(pots) != 2:
        raise ConfigurationError("schema violation at potentials: identity needs [q1, q2]")

    grid = doc.get("grid", {})
    h = float(grid.get("h", 1.0 / 16))
    bound = wave.CFL * h
    dt = float(grid.get("dt", bound))
    if dt > bound * (1.0 + 1e-12):
        raise ConfigurationError(
            f"grid.dt = {dt} violates the CFL bound dt <= 0.9 h/sqrt(3) = {bound}")
    eps = float(grid.get("eps", 4.0 * h))

    dspec = doc.get("directions", {"fibonacci": 64})
    if "fibonacci" in dspec:
        dirs, wts = fibonacci_directions(dspec["fibonacci"])
    else:
        dirs = np.array([unit(v) for v in dspec["list"]])
        wts = np.full(len(dirs), 4.0 * math.pi / len(dirs))

    params = copy.deepcopy(DEFAULT_PARAMS[kind])
    params.update(copy.deepcopy(doc.get("params", {})))
    if kind == "smallness" and "c2_target" not in params and "potential" not in doc \
            and "potentials" not in doc:
        params["c2_target"] = 0.05
    if kind == "translate" and "theta" not in params:
        params["theta"] = [-c for c in params["omega"]]
    if kind == "born" and len(params["amplitudes"]) < 3:
        raise ConfigurationError("schema violation at params.amplitudes: need three or more")

    tol = dict(TOLERANCES)
    for name, v in doc.get("tolerances", {}).items():
        if name not in TOLERANCES:
            raise ConfigurationError(f"schema violation at tolerances.{name}: unknown check")
        tol[name] = float(v)

    times = doc.get("time", {})
    sc = Scenario(
        kind=kind, potentials=pots, h=h, dt=dt, eps=eps,
        half_width=float(grid["half_width"]) if "half_width" in grid else None,
        directions=dirs, weights=wts, direction_spec=dspec,
        t_start=times.get("t_start"), t_end=times.get("t_end"),
        tolerances=tol, params=params, max_degree=int(doc.get("max_degree", 6)),
        output=doc.get("output"), seed=int(doc.get("seed", 0)), document=doc,
    )
    _fill_times(sc)
    L_min = _causality_minimum(sc)
    sc.min_half_width = L_min
    if sc.half_width is None:
        sc.half_width = max(3.0, L_min)
    elif sc.half_width < L_min - 1e-12:
        raise ConfigurationError(
            f"grid.half_width = {sc.half_width} is below the causality minimum L = {L_min} "
            f"for a {kind} scenario")
    return sc


def _t_emit(q, omega, eps):
    c, R = q.support()
    if R == 0.0:
        return -1.0 - 3.0 * eps
    return float(c @ omega) - R - 3.0 * eps


def _fill_times(sc):
    if sc.kind == "forward":
        if sc.t_end is None:
            sc.t_end = 1.0 + 3.0 * sc.eps + 2.0 * sc.h
    elif sc.kind == "farfield":
        if sc.t_end is None:
            s_min = sc.params.get("s_min", -6.0 * sc.eps - 2.0 * sc.h)
            sc.t_end = 1.0 - s_min
    if sc.t_end is not None and sc.t_start is not None and sc.t_end <= sc.t_start:
        raise ConfigurationError("schema violation at time: t_end must exceed t_start")


def _round_up(L, h):
    return h * math.ceil(L / h - 1e-9)


def _causality_minimum(sc):
    """Smallest box half-width that keeps every probe of the kind reflection-free."""
    k, h, eps = sc.kind, sc.h, sc.eps
    if k in ("harmonics", "radon", "energy"):
        return 0.0
    if k == "forward":
        q = sc.potential()
        omega = unit(sc.params["omega"])
        c, R = q.support()
        t_emit = _t_emit(q, omega, eps)
        start = t_emit - 3.0 * eps if sc.t_start is None else sc.t_start
        if start > t_emit:
            raise ConfigurationError(
                f"time.t_start = {start} is after the source switches on at {t_emit}")
        return _round_up((sc.t_end - t_emit + 1.0 + float(np.max(np.abs(c))) + R) / 2.0, h)
    if k == "farfield":
        q = sc.potential()
        omega = unit(sc.params["omega"])
        c, R = q.support()
        return _round_up(max(float(np.max(np.abs(c))) + R, 1.5)
                         + sc.t_end - _t_emit(q, omega, eps), h)
    if k == "identity":
        hi = sc.params["tau_range"][1]
        best = 0.0
        for w in sc.params["omegas"]:
            for spec in sc.potentials:
                q = from_spec(spec)
                if q.support()[1] == 0.0:
                    continue
                p = inverse.plane_scenario(q, unit(w), h, s_min=-2.0 * hi, eps=eps,
                                           t_start=-1.0 - 6.0 * eps, margin=2 * h)
                best = max(best, p.half_width)
        return best
    if k == "born":
        q = sc.potential()
        lo = -2.0 - 3.0 * eps
        best = inverse.plane_scenario(q, unit(sc.params["omega"]), h, s_min=lo,
                                      margin=2 * h).half_width
        if sc.params["reconstruct"]:
            for w in sc.directions:
                best = max(best, inverse.plane_scenario(q, w, h, s_min=-2.0,
                                                        margin=6 * wave.CFL * h).half_width)
        return best
    if k == "translate":
        from .potential import Translate

        q = sc.potential()
        a = np.asarray(sc.params["shift"], dtype=float)
        theta, omega = unit(sc.params["theta"]), unit(sc.params["omega"])
        qa = Translate(q, a)
        shift = float(a @ (theta - omega))
        c_max = max([1.0] + [float(p.support()[0] @ theta) + p.support()[1] for p in (q, qa)])
        lo = sc.params["s_range"][0]
        return max(inverse.plane_scenario(pot, omega, h, s_min=s_lo, offset=c_max,
                                          margin=2 * h).half_width
                   for pot, s_lo in ((q, lo + shift), (qa, lo)))
    if k == "smallness":
        # star-norm region: ball of radius sqrt 3 about the origin until t = 3 eps + 2 h
        span = 3.0 * eps + 2.0 * h - min(_t_emit(from_spec(s), unit(sc.params["omega"]), eps)
                                         for s in sc.potentials)
        return _round_up((span + math.sqrt(3.0) + 1.0) / 2.0, h)
    raise ConfigurationError(f"unknown kind {k!r}")


# ------------------------------------------------------------------ checks


def _check(sc, name, value, passed=None, lower=False, **detail):
    bound = sc.tolerances.get(name)
    if passed is None:
        passed = value >= bound if lower else value <= bound
    entry = {"name": name, "criterion": CRITERIA[name], "value": _num(value),
             "passed": bool(passed)}
    if bound is not None:
        entry["bound"] = bound
        entry["comparison"] = ">=" if lower else "<="
    if detail:
        entry["detail"] = {k: _num(v) for k, v in detail.items()}
    return entry


def _num(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_num(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def _write_rows(path, header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(fmt(x) if isinstance(x, (float, np.floating)) else str(x)
                              for x in r))
    Path(path).write_text("\n".join(lines) + "\n")


def _order(coarse, fine):
    if coarse <= 0.0 or fine <= 0.0:
        return math.inf
    return math.log2(coarse / fine)


def _run_forward(sc, out, rng):
    q = sc.potential()
    omega = unit(sc.params["omega"])
    spacing, depth = sc.params["trace_spacing"], sc.params["min_depth"]

    def one(h, eps, dt, L):
        ws = wave.WaveScenario(q, omega, half_width=L, h=h, dt=dt, eps=eps,
                               t_end=sc.t_end, t_start=sc.t_start)
        probes = [traces.trace_probe(omega, eps, spacing, depth),
                  wave.PointProbe("origin", np.zeros(3))]
        if h == sc.h and sc.params["snapshots"]:
            probes.append(wave.Snapshots("snap", tuple(sc.params["snapshots"])))
        r = wave.run(ws, probes)
        return r, traces.wavefront_trace_check(r, q), traces.ut_characteristic_check(r, q)

    L = sc.half_width
    r, jump, ut = one(sc.h, sc.eps, sc.dt, L)
    rows = [(float(p[0]), float(p[1]), float(p[2]), float(a), float(b), float(c), float(d))
            for p, a, b, c, d in zip(jump.points, jump.measured, jump.expected,
                                     ut.measured, ut.expected)]
    _write_rows(out / "traces.csv", ["x", "y", "z", "jump", "jump_expected", "ut",
                                     "ut_expected"], rows)
    r["origin"].to_csv(out / "origin.csv")
    for k, f in enumerate(r.records.get("snap", [])):
        write_field(f, out / f"snapshot_{k}.wbsl")
    checks = [_check(sc, "wavefront_trace", jump.mismatch),
              _check(sc, "ut_characteristic_trace", ut.mismatch)]
    if sc.params["refine"]:
        h2 = sc.h / 2
        _, jump2, ut2 = one(h2, sc.eps / 2, sc.dt / 2, L)
        checks.append(_check(sc, "wavefront_trace_order", _order(jump.mismatch, jump2.mismatch),
                             lower=True, fine=jump2.mismatch))
        checks.append(_check(sc, "ut_characteristic_trace_order",
                             _order(ut.mismatch, ut2.mismatch), lower=True, fine=ut2.mismatch))
    return checks


def _run_farfield(sc, out, rng):
    q = sc.potential()
    omega = unit(sc.params["omega"])
    L = sc.half_width
    ws = wave.WaveScenario(q, omega, half_width=L, h=sc.h, dt=sc.dt, eps=sc.eps,
                           t_end=sc.t_end, t_start=sc.t_start)
    probes = [wave.PlaneProbe("forward", omega, 1.0), wave.PlaneProbe("back", -omega, 1.0),
              wave.PlaneProbe("back_far", -omega, 1.5)]
    r = wave.run(ws, probes)
    fwd, back = farfield.extract_alpha(r, "forward"), farfield.extract_alpha(r, "back")
    table = farfield.FarFieldTable(np.stack([omega, -omega]), [[0, 0], [1, 0]], back.times,
                                   [fwd.samples, back.samples], sc.eps,
                                   meta={"plane_offset": 1.0})
    table.to_csv(out / "farfield.csv")
    dn = max(farfield.relative_l2(farfield.extract_alpha_ut(r, p).samples,
                                  farfield.extract_alpha(r, p).samples)
             for p in ("forward", "back"))
    measured, predicted = farfield.peak_scattering_coefficient(r, "forward", q)
    peak_err = abs(measured - predicted) / abs(predicted) if predicted else abs(measured)
    checks = [
        _check(sc, "transport_identity", farfield.transport_check(r, "back", "back_far")),
        _check(sc, "dn_equivalence", dn),
        _check(sc, "peak_scattering", peak_err, measured=measured, predicted=predicted),
        _check(sc, "backscatter_support", farfield.support_tail(back, 2.0 + 3.0 * sc.eps)),
    ]
    if sc.params["friedlander"]:
        checks += _friedlander(sc, q, omega)
    return checks


def _friedlander(sc, q, omega):
    radii = [float(x) for x in sc.params["radii"]]
    theta = -omega
    t_end = max(radii) + 1.2
    ws = wave.WaveScenario(q, omega, half_width=sc.params["friedlander_half_width"], h=sc.h,
                           dt=sc.dt, eps=sc.eps, t_end=t_end)
    off = np.asarray(sc.params["offset"], dtype=float)
    r = wave.run(ws, [wave.PlaneProbe("a", theta, 1.0, t_max=2.5)]
                 + farfield.friedlander_probes(theta, radii, offset=off))
    s = np.arange(-1.0, 2.5, ws.dt)
    rep = farfield.friedlander_estimate(r, "a", radii, s, offset=True)
    return [_check(sc, "friedlander_rate", rep.rate, lower=True, deviations=rep.deviations),
            _check(sc, "friedlander_offset", rep.offset_gap)]


def _identical(a, b):
    return json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def _run_identity(sc, out, rng):
    q1, q2 = sc.potential(0), sc.potential(1)
    lo, hi = sc.params["tau_range"]
    rep = inverse.identity_check(q1, q2, sc.params["omegas"], (lo, hi), h=sc.h, eps=sc.eps,
                                 half_width=sc.half_width)
    rows = []
    for k in range(len(rep.omegas)):
        for i, t in enumerate(rep.tau):
            rows.append((k, float(t), float(rep.lhs[k, i]), float(rep.radon[k, i]),
                         float(rep.kernel[k, i])))
    _write_rows(out / "identity.csv", ["omega_index", "tau", "lhs", "radon", "kernel"], rows)
    if _identical(sc.potentials[0], sc.potentials[1]):
        return [_check(sc, "pair_identity_noise_floor", rep.discrepancy, scale=rep.scale)]
    checks = [_check(sc, "pair_identity", rep.discrepancy, scale=rep.scale)]
    if sc.params["refine"]:
        fine = inverse.identity_check(q1, q2, sc.params["omegas"], (lo, hi), h=sc.h / 2)
        checks.append(_check(sc, "pair_identity_order", _order(rep.discrepancy, fine.discrepancy),
                             lower=True, fine=fine.discrepancy))
    return checks


def _run_born(sc, out, rng):
    p = sc.potential()
    amps = [float(a) for a in sc.params["amplitudes"]]
    conv = sc.params["convention"]
    rep = inverse.born_convergence(p, amps, omega=sc.params["omega"], h=sc.h, convention=conv,
                                   half_width=sc.half_width)
    _write_rows(out / "born.csv", ["amplitude", "error"],
                [(float(a), float(e)) for a, e in zip(rep.amplitudes, rep.errors)])
    lo, hi = BORN_RATIO_BAND
    olo, ohi = BORN_ORDER_BAND
    ok = bool(np.all((rep.ratios >= lo) & (rep.ratios <= hi)) and olo <= rep.order <= ohi)
    checks = [_check(sc, "born_linearization", rep.order, passed=ok, ratios=rep.ratios,
                     errors=rep.errors, ratio_band=list(BORN_RATIO_BAND),
                     order_band=list(BORN_ORDER_BAND))]
    if sc.params["reconstruct"]:
        rec = inverse.born_experiment(p, amps, h=sc.h, spacing=sc.params["spacing"],
                                      convention=conv, directions=sc.directions,
                                      weights=sc.weights, half_width=sc.half_width)
        for a, t in zip(amps, rec.tables):
            t.to_csv(out / f"backscatter_{fmt(a)}.csv")
        _write_rows(out / "born_reconstruction.csv", ["amplitude", "error", "radial_spread"],
                    [(float(a), float(e), float(s)) for a, e, s in
                     zip(amps, rec.errors, rec.radial_spread)])
        decreasing = bool(np.all(np.diff(rec.errors) < 0))
        spread = float(np.max(rec.radial_spread))
        ok = decreasing and spread <= sc.tolerances["born_spread"]
        checks.append(_check(sc, "born_reconstruction", spread, passed=ok, errors=rec.errors,
                             strictly_decreasing=decreasing,
                             spread_bound=sc.tolerances["born_spread"]))
    return checks


def _run_translate(sc, out, rng):
    q = sc.potential()
    a, th, om = sc.params["shift"], sc.params["theta"], sc.params["omega"]
    rep = inverse.translation_check(q, a, th, om, h=sc.h, s_range=tuple(sc.params["s_range"]),
                                    half_width=sc.half_width)
    _write_rows(out / "translate.csv", ["s", "alpha_shifted", "beta"],
                [(float(s), float(x), float(y)) for s, x, y in zip(rep.s, rep.alpha, rep.beta)])
    a = np.asarray(a, dtype=float)
    checks = [_check(sc, "translation_property", rep.discrepancy, shift=rep.shift)]
    if np.allclose(unit(th), -unit(om)):
        expected = -2.0 * float(a @ unit(om))
        checks.append(_check(sc, "translation_shift", abs(rep.shift - expected),
                             shift=rep.shift, expected=expected))
    return checks


def _run_harmonics(sc, out, rng):
    p = sc.potential()
    basis = harmonics.make_basis(sc.max_degree)
    order = sc.params.get("quad_order", 2 * sc.max_degree + 2)
    quad = harmonics.make_sphere_quadrature(order)
    area = abs(float(quad.integrate(np.ones(len(quad.weights)))) - 4.0 * math.pi)
    B = basis.values(quad.nodes)
    gram = float(np.max(np.abs((B * quad.weights[:, None]).T @ B - np.eye(len(basis)))))
    lb = max(harmonics.laplace_beltrami_check(e, quad) for e in basis)
    rho = [float(r) for r in sc.params["rho"]]
    harmonics.write_expansion(harmonics.expansion(p, rho, basis, quad), out / "expansion.csv")
    worst = 0.0
    rows = []
    for r in rho:
        direct, spectral = harmonics.angular_energy(p, r, quad, basis)
        rel = abs(direct - spectral) / abs(direct) if direct else abs(spectral)
        worst = max(worst, rel)
        rows.append((r, direct, spectral))
    _write_rows(out / "angular_energy.csv", ["rho", "direct", "spectral"], rows)
    return [_check(sc, "sphere_area", area), _check(sc, "gram_matrix", gram),
            _check(sc, "laplace_beltrami", lb), _check(sc, "angular_energy_identity", worst)]


def _run_radon(sc, out, rng):
    p = sc.potential()
    tau = np.asarray(sc.params["tau"], dtype=float)
    radon.radon_profile(p, sc.directions, tau).to_csv(out / "radon.csv")
    n = sc.params["samples"]
    X = rng.normal(size=(n, 3))
    V = rng.normal(size=(n, 3))
    X[0] = 0.0
    resid = max(radon.tangential_decomposition_check(x, v) for x, v in zip(X, V))
    checks = [_check(sc, "tangential_identity", resid, samples=n)]

    omega = sc.directions[0]
    rows, worst, ang_max = [], 0.0, 0.0
    for t in sc.params["ptau_tau"]:
        point, ang, total = radon.ptau_decomposition(p, omega, t)
        _, div = radon.radon_tau_derivative(p, omega, t)
        rel = abs(total - div) / abs(div) if div else abs(total)
        worst = max(worst, rel)
        ang_max = max(ang_max, abs(ang))
        rows.append((float(t), point, ang, total, div))
    _write_rows(out / "ptau.csv", ["tau", "point", "angular", "total", "ptau"], rows)
    checks.append(_check(sc, "radial_ptau_reduction", worst))
    if p.to_spec()["variant"] in ("exponential-bump", "polynomial-bump"):
        checks.append(_check(sc, "ptau_angular_term", ang_max))

    width = sc.params["delta_width"]
    worst = 0.0
    for _ in range(20):
        while True:
            x = rng.uniform(-1.5, 1.5, 3)
            t = float(rng.uniform(-1.0, 1.0))
            r = float(np.linalg.norm(x))
            if r > 0.1 and abs(r - abs(t)) > 5.0 * width:
                break
        exact = radon.sphere_delta_weight(x, t)
        approx = radon.sphere_delta_mollified(x, t, width)
        worst = max(worst, abs(exact - approx) / (2.0 * math.pi / r))
    checks.append(_check(sc, "sphere_delta_weight", worst, width=width))
    return checks


def _run_energy(sc, out, rng):
    p = sc.potential()
    E = inverse.energy_profile(p, sc.params["rho"])
    _write_rows(out / "energy.csv", ["rho", "E"],
                [(float(r), float(v)) for r, v in zip(E.rho, E.values)])
    _write_rows(out / "abel.csv", ["tau", "E", "abel", "iterated"],
                [(float(t), *inverse.abel_chain(E, t)) for t in sc.params["tau"]])
    worst = 0.0
    for _ in range(sc.params["samples"]):
        t = float(rng.uniform(-2.0, 2.0))
        s = t + float(rng.uniform(0.01, 2.0))
        worst = max(worst, abs(inverse.beta_integral(t, s) - math.pi))
    return [_check(sc, "beta_integral", worst)]


def _run_smallness(sc, out, rng):
    omega = unit(sc.params["omega"])
    L = sc.half_width
    target = sc.params.get("c2_target")
    rows, ok, ratios = [], True, []
    for i in range(len(sc.potentials)):
        q = sc.potential(i)
        if target is not None:
            from .potential import c2_norm

            q = Scale(q, target / c2_norm(q).total)
        rep = traces.star_bound_check(q, omega, h=sc.h, half_width=L)
        ok &= rep.holds
        ratios.append(rep.ratio)
        rows.append((i, rep.u_star, rep.c2, rep.ratio))
    _write_rows(out / "star_bound.csv", ["potential_index", "u_star", "c2", "ratio"], rows)
    checks = [_check(sc, "star_norm_bound", max(ratios), passed=ok, ratios=ratios, bound_ratio=8.0)]
    if sc.params["characteristic"]:
        rows, ok, ratios = [], True, []
        for i, (q, f, g, supp) in enumerate(traces.cylinder_pairs(omega)):
            rep = traces.characteristic_bound_check(q, f, g, supp, omega, h=sc.h, half_width=L)
            ok &= rep.holds
            ratios.append(rep.ratio)
            rows.append((i, rep.a_max, rep.a_simulated, rep.f_star, rep.ratio))
        _write_rows(out / "characteristic_bound.csv",
                    ["pair_index", "a_max", "a_simulated", "f_star", "ratio"], rows)
        checks.append(_check(sc, "characteristic_bound", max(ratios), passed=ok, ratios=ratios,
                             bound_ratio=2.0))
    return checks


RUNNERS = {
    "forward": _run_forward,
    "farfield": _run_farfield,
    "identity": _run_identity,
    "born": _run_born,
    "translate": _run_translate,
    "harmonics": _run_harmonics,
    "radon": _run_radon,
    "energy": _run_energy,
    "smallness": _run_smallness,
}


def run_scenario(sc, out=None, seed=None, threads=None):
    """Run the scenario's pipeline, write its artifacts and summary.json.

    Returns ``(status, summary)`` with status 0 iff every check passed.
    Module errors are re-raised with the scenario kind prefixed.
    """
    out = Path(out if out is not None else (sc.output or "."))
    out.mkdir(parents=True, exist_ok=True)
    if threads:
        wave.set_threads(threads)
    seed = sc.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    try:
        checks = RUNNERS[sc.kind](sc, out, rng)
    except LabError as e:
        raise type(e)(f"{sc.kind} scenario: {e}") from e
    passed = all(c["passed"] for c in checks)
    artifacts = sorted(p.name for p in out.iterdir() if p.name != "summary.json")
    summary = {
        "version": __version__,
        "kind": sc.kind,
        "seed": seed,
        "scenario": sc.to_dict(),
        "checks": checks,
        "artifacts": artifacts,
        "passed": passed,
    }
    write_json(out / "summary.json", summary)
    return (0 if passed else 1), summary

"""Run configuration: schema, defaults, loading and point sampling."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .fields import Poly, polys_from_spec
from .finsler import FinslerSpace, space_from_config
from .hvector import HVectorField, weak_h_vector
from .jets import PointDirection


class ConfigError(ValueError):
    pass


_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 2}
# polynomial coefficient: a number or a list of [coef, [exponents]]
_poly = {
    "oneOf": [
        _num,
        {
            "type": "array",
            "items": {
                "type": "array",
                "minItems": 2,
                "maxItems": 2,
                "prefixItems": [_num, {"type": "array", "items": {"type": "integer", "minimum": 0}}],
            },
        },
    ]
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["space"],
    "properties": {
        "space": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family", "dim"],
            "properties": {
                "family": {"enum": ["euclidean", "randers", "riemannian", "root"]},
                "dim": {"type": "integer", "minimum": 2, "maximum": 6},
                "a": {"type": "array", "items": {"type": "array", "items": _poly}},
                "c": {"type": "array", "items": _poly},
                "diag": {"type": "array", "items": _poly},
                "degree": {"type": "integer", "minimum": 2},
                "terms": {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2}},
            },
        },
        "hvector": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["weak"]},
                "rho0": _num,
                "c": {"oneOf": [{"type": "array", "items": _poly}, {"const": "tangent"}, {"type": "null"}]},
                "tangent_scale": _num,
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "points": {
            "type": ["array", "null"],
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["x", "y"],
                "properties": {"x": _vec, "y": _vec},
            },
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1, "maximum": 100},
                "seed": {"type": "integer", "minimum": 0},
                "box": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "min_tau_gap": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "hypersurface": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["family", "samples"],
            "properties": {
                "family": {"enum": ["hyperplane", "sphere", "graph"]},
                "axis": {"type": "integer", "minimum": 0},
                "offset": _num,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "center": {"type": "array", "items": _num},
                "f": _poly,
                "samples": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["u", "v"],
                        "properties": {"u": {"type": "array", "items": _num}, "v": {"type": "array", "items": _num}},
                    },
                },
            },
        },
        "fixtures": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1, "maximum": 1000},
                "seed": {"type": "integer", "minimum": 0},
                "n": {"type": ["integer", "null"], "minimum": 3, "maximum": 6},
            },
        },
        "search": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "degree": {"type": "integer", "minimum": 0, "maximum": 3},
                "rho_bounds": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "grid": {"type": "integer", "minimum": 2},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "probes": {"type": "boolean"},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                k: {"type": "number", "exclusiveMinimum": 0}
                for k in (
                    "base", "weak", "transform", "inverse", "scalar", "contraction", "chain", "frame",
                    "relation", "relative", "barred", "collapse", "classify", "tangency",
                )
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "format": {"enum": ["machine", "human"]},
                "path": {"type": ["string", "null"]},
            },
        },
    },
}

DEFAULTS = {
    "hvector": None,
    "points": None,
    "sampler": {"count": 5, "seed": 0, "box": [-0.5, 0.5], "min_tau_gap": 0.2},
    "hypersurface": None,
    "fixtures": {"count": 100, "seed": 0, "n": None},
    "search": {"degree": 1, "rho_bounds": [0.01, 1.0], "grid": 21, "tol": 1e-8},
    "probes": True,
    "tolerances": {
        "base": 1e-8,
        "weak": 1e-9,
        "transform": 1e-8,
        "inverse": 1e-9,
        "scalar": 1e-12,
        "contraction": 1e-11,
        "chain": 1e-10,
        "frame": 1e-10,
        "relation": 1e-9,
        "relative": 1e-7,
        "barred": 1e-9,
        "collapse": 1e-12,
        "classify": 1e-8,
        "tangency": 1e-9,
    },
    "output": {"format": "machine", "path": None},
}
HVECTOR_DEFAULTS = {"mode": "weak", "rho0": 0.1, "c": None, "tangent_scale": 0.1, "seed": 0}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path, seed_override: int | None = None) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return effective_config(raw, seed_override)


def effective_config(raw, seed_override: int | None = None) -> dict:
    """Validate, then materialize every default."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    if cfg["hvector"] is not None:
        cfg["hvector"] = _merge(HVECTOR_DEFAULTS, cfg["hvector"])
        if cfg["hvector"]["rho0"] == 0:
            raise ConfigError("hvector.rho0 must be non-zero")
    if seed_override is not None:
        apply_seed(cfg, seed_override)
    n = cfg["space"]["dim"]
    for k, p in enumerate(cfg["points"] or []):
        if len(p["x"]) != n or len(p["y"]) != n:
            raise ConfigError(f"point {k} does not have {n} components")
    lo, hi = cfg["sampler"]["box"]
    if not lo < hi:
        raise ConfigError("sampler.box must satisfy lo < hi")
    hs = cfg["hypersurface"]
    if hs is not None:
        for k, s in enumerate(hs["samples"]):
            if len(s["u"]) != n - 1 or len(s["v"]) != n - 1:
                raise ConfigError(f"hypersurface sample {k} needs {n - 1} components in u and v")
    return cfg


def apply_seed(cfg: dict, seed: int) -> None:
    cfg["sampler"]["seed"] = seed
    cfg["fixtures"]["seed"] = seed
    if cfg["hvector"] is not None:
        cfg["hvector"]["seed"] = seed


def build_space(cfg: dict) -> FinslerSpace:
    try:
        return space_from_config(cfg["space"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"space block: {exc}") from None


def build_field(cfg: dict, c_override=None) -> HVectorField | None:
    hv = cfg["hvector"]
    if hv is None:
        return None
    n = cfg["space"]["dim"]
    if c_override is not None:
        return weak_h_vector(hv["rho0"], [Poly.const(float(v), n) for v in c_override])
    c = hv["c"]
    if c == "tangent":
        raise ConfigError("hvector.c = 'tangent' is only meaningful for the hypersurface command")
    if c is None:
        rng = np.random.default_rng(hv["seed"])
        vals = rng.uniform(-0.2, 0.2, n)
        return weak_h_vector(hv["rho0"], [Poly.const(float(v), n) for v in vals])
    if len(c) != n:
        raise ConfigError(f"hvector.c needs {n} components")
    try:
        return weak_h_vector(hv["rho0"], polys_from_spec(c, n))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"hvector.c: {exc}") from None


def explicit_points(cfg: dict) -> list[PointDirection] | None:
    if cfg["points"] is None:
        return None
    out = []
    for k, p in enumerate(cfg["points"]):
        try:
            out.append(PointDirection(tuple(p["x"]), tuple(p["y"])))
        except ValueError as exc:
            raise ConfigError(f"point {k}: {exc}") from None
    return out


def sample_points(cfg: dict, admissible=None) -> list[PointDirection]:
    """Draw ``count`` point-directions from the sampler block.

    x is uniform in the box, y uniform in [-1, 1]^n with |y| >= 0.3;
    ``admissible(pt)`` may reject draws (for example near the pole of the change).
    """
    s = cfg["sampler"]
    n = cfg["space"]["dim"]
    rng = np.random.default_rng(s["seed"])
    lo, hi = s["box"]
    out: list[PointDirection] = []
    tries = 0
    while len(out) < s["count"]:
        tries += 1
        if tries > 1000 * s["count"]:
            raise ConfigError("sampler could not find admissible point-directions")
        x = rng.uniform(lo, hi, n)
        y = rng.uniform(-1.0, 1.0, n)
        if np.linalg.norm(y) < 0.3:
            continue
        pt = PointDirection(tuple(float(v) for v in x), tuple(float(v) for v in y))
        if admissible is None or admissible(pt):
            out.append(pt)
    return out

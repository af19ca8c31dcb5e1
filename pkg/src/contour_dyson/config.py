"""Run configuration: JSON schema, defaults and conversion to library objects."""

from __future__ import annotations

import copy
import difflib
import json
import sys
from dataclasses import dataclass

import jsonschema

from .energy import GasParams, Potential
from .errors import ConfigError
from .geometry import ContourSpec

__all__ = ["SCHEMA", "DEFAULTS", "RunConfig", "parse_config", "load_config_text", "contour_spec_from_dict"]

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_nonneg = {"type": "number", "minimum": 0}


def _block(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


CONTOUR_SCHEMA = {
    "oneOf": [
        _block({"type": {"const": "circle"}, "center": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "radius": _pos}, ["type", "radius"]),
        _block({"type": {"const": "ellipse"}, "a": _pos, "b": _pos,
                "center": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
               ["type", "a", "b"]),
        _block({"type": {"const": "fourier"},
                "coeffs": {"type": "array", "minItems": 1,
                           "items": {"type": "array", "prefixItems": [{"type": "integer"}, _num, _num],
                                     "items": _num, "minItems": 3, "maxItems": 3}}},
               ["type", "coeffs"]),
    ]
}

SCHEMA = _block(
    {
        "contour": CONTOUR_SCHEMA,
        "grid_size": {"type": "integer", "minimum": 64},
        "N": _posint,
        "beta": _pos,
        "potential": _block({"kind": {"enum": ["zero", "harmonic", "radial"]},
                             "coeffs": {"type": "array", "items": _num}}, ["kind"]),
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "initial": {"type": "array", "items": _num},
        "sde": _block({"dt": _pos, "t_end": _nonneg, "taming_cap": {"type": "number", "exclusiveMinimum": 0,
                                                                    "maximum": 0.5},
                       "burn_in": _nonneg, "thinning": _posint, "exact_geometry": {"type": "boolean"}}),
        "mcmc": _block({"proposal_sigma": _pos, "sweeps": _posint, "burn_in": {"type": "integer", "minimum": 0},
                        "thinning": _posint, "adapt": {"type": "boolean"}}),
        "conformal": _block({"modes": {"type": "integer", "minimum": 16}, "tol": _pos,
                             "max_iter": _posint, "relax": {"type": "number", "exclusiveMinimum": 0,
                                                            "maximum": 1}}),
        "freeenergy": _block({"convention": {"enum": ["verbatim", "morris"]}, "rel_tol": _pos}),
        "partition": _block({"ns_exact": {"type": "array", "items": _posint},
                             "ns_quad": {"type": "array", "items": {"type": "integer", "minimum": 1,
                                                                   "maximum": 4}},
                             "nodes": {"type": "integer", "minimum": 32},
                             "symmetry": {"type": "boolean"}}),
        "validate": _block({"replicas": _posint, "ks_threshold": _pos, "min_effective": _pos,
                            "operator_configs": _posint, "include_ks": {"type": "boolean"}}),
        "output": _block({"dir": {"type": "string"}, "format": {"enum": ["csv", "json"]}}),
    },
    ["contour", "beta", "N"],
)

DEFAULTS = {
    "grid_size": 1024,
    "potential": {"kind": "zero", "coeffs": []},
    "initial": None,
    "sde": {"dt": None, "t_end": 1.0, "taming_cap": 0.25, "burn_in": 0.0, "thinning": 1,
            "exact_geometry": False},
    "mcmc": {"proposal_sigma": 0.1, "sweeps": 1000, "burn_in": 200, "thinning": 1, "adapt": True},
    "conformal": {"modes": 512, "tol": 1e-12, "max_iter": 2000, "relax": 1.0},
    "freeenergy": {"convention": "verbatim", "rel_tol": 1e-6},
    "partition": {"ns_exact": [50, 100, 200, 400], "ns_quad": [1, 2, 3], "nodes": 512, "symmetry": False},
    "validate": {"replicas": 300, "ks_threshold": 0.02, "min_effective": 5000.0,
                 "operator_configs": 100, "include_ks": True},
    "output": {"dir": ".", "format": None},
}


def contour_spec_from_dict(d) -> ContourSpec:
    kind = d["type"]
    if kind == "circle":
        cx, cy = d.get("center", [0.0, 0.0])
        return ContourSpec.circle(complex(cx, cy), d["radius"])
    if kind == "ellipse":
        cx, cy = d.get("center", [0.0, 0.0])
        return ContourSpec.ellipse(d["a"], d["b"], complex(cx, cy))
    return ContourSpec.fourier([(int(m), complex(re, im)) for m, re, im in d["coeffs"]])


@dataclass
class RunConfig:
    raw: dict
    effective: dict

    @property
    def has_seed(self):
        return "seed" in self.raw

    @property
    def seed(self):
        return int(self.effective.get("seed", 0))

    def contour_spec(self) -> ContourSpec:
        return contour_spec_from_dict(self.effective["contour"])

    def gas_params(self) -> GasParams:
        return GasParams(self.effective["N"], self.effective["beta"],
                         Potential.from_dict(self.effective["potential"]))

    def block(self, name):
        return self.effective[name]

    def to_json(self):
        return json.dumps(self.effective, indent=2, sort_keys=True)


def _error_path(err):
    parts = [str(p) for p in err.absolute_path]
    return "/".join(parts) if parts else "<root>"


def _describe(err, schema_props):
    if err.validator == "additionalProperties":
        allowed = sorted(err.schema.get("properties", {}))
        extras = [k for k in err.instance if k not in allowed]
        msgs = []
        for key in extras:
            close = difflib.get_close_matches(key, allowed, n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            msgs.append(f"unknown key {key!r} at {_error_path(err)}{hint}")
        return "; ".join(msgs)
    if err.validator == "oneOf" and list(err.absolute_path)[:1] == ["contour"]:
        kinds = ["circle", "ellipse", "fourier"]
        kind = err.instance.get("type") if isinstance(err.instance, dict) else None
        if kind not in kinds:
            close = difflib.get_close_matches(str(kind), kinds, n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            return f"contour/type: expected one of {kinds}, got {kind!r}{hint}"
        branch = [e for e in err.context if e.relative_schema_path[0] == kinds.index(kind)]
        return "; ".join(_describe(e, schema_props) for e in branch) or f"contour: invalid {kind}"
    name = _error_path(err)
    if err.validator in ("exclusiveMinimum", "minimum", "maximum", "exclusiveMaximum"):
        return f"{name}: value {err.instance!r} out of range ({err.validator} {err.validator_value})"
    if err.validator == "required":
        return f"{name}: {err.message}"
    return f"{name}: {err.message}"


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config_text(text) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("invalid config: " + "; ".join(_describe(e, SCHEMA) for e in errors))
    effective = _merge(DEFAULTS, raw)
    if raw.get("initial") is not None and len(raw["initial"]) != raw["N"]:
        raise ConfigError(f"initial: expected {raw['N']} positions, got {len(raw['initial'])}")
    return RunConfig(raw, effective)


def parse_config(path) -> RunConfig:
    """Read and validate a config from ``path`` (``-`` for stdin)."""
    if path == "-":
        return load_config_text(sys.stdin.read())
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return load_config_text(text)

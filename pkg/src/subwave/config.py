"""Run configuration (JSON, schema version 1) and the schemas of emitted JSON."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema

SCHEMA_VERSION = 1

DEFAULTS: dict = {
    "schema_version": SCHEMA_VERSION,
    "geometry": {
        "kind": "dimer",
        "M": 10,
        "N": 41,
        "d": 12.0,
        "d_prime": 42.0,
        "R": 1.0,
        "R_defect": 0.99,
    },
    "physics": {"delta": 1e-3},
    "solver": {
        "method": "capacitance",
        "order": 0,
        "order_lmax": 0,
        "truncation_M": 10_000,
        "tail_tol": 1e-8,
        "grid_n": 128,
        "alpha0_fraction": 0.05,
    },
    "stability": {"model": "full", "sigma_pct": 8.0, "trials": 100, "seed": 0},
    "lattice_sum": {"lambda": 0, "mu": 0, "kL": 0.05, "alphaL": math.pi / 2, "M": 10_000, "static": False},
    "output": {"dir": "out"},
}

_POS = {"type": "number", "exclusiveMinimum": 0}
_INT0 = {"type": "integer", "minimum": 0}

CONFIG_SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["dimer", "point_defect"]},
                "M": {"type": "integer", "minimum": 1},
                "N": {"type": "integer", "minimum": 1},
                "d": _POS,
                "d_prime": _POS,
                "L": _POS,
                "R": _POS,
                "R_defect": _POS,
            },
        },
        "physics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["capacitance", "multipole"]},
                "order": _INT0,
                "order_lmax": _INT0,
                "truncation_M": {"type": "integer", "minimum": 1},
                "tail_tol": _POS,
                "grid_n": {"type": "integer", "minimum": 16},
                "alpha0_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "stability": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "model": {"enum": ["full", "nearest-neighbour", "point-defect"]},
                "sigma_pct": {"type": "number", "minimum": 0},
                "trials": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
        "lattice_sum": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda": _INT0,
                "mu": {"type": "integer"},
                "kL": {"type": "number", "minimum": 0},
                "alphaL": {"type": "number"},
                "M": {"type": "integer", "minimum": 1},
                "static": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string", "minLength": 1}},
        },
    },
}

_NUM = {"type": ["number", "null"]}

BANDS_SUMMARY_SCHEMA: dict = {
    "type": "object",
    "required": ["schema_version", "geometry", "delta", "grid_n", "zak_phase", "winding_number", "gap", "edge_character"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "geometry": {"type": "object"},
        "delta": {"type": "number"},
        "grid_n": {"type": "integer"},
        "zak_phase": _NUM,
        "zak_error": {"type": "string"},
        "winding_number": {"type": ["integer", "null"]},
        "gap": {
            "type": "object",
            "required": ["alpha0", "max_omega1", "min_omega2", "width", "has_gap"],
            "properties": {
                "alpha0": {"type": "number"},
                "max_omega1": {"type": "number"},
                "min_omega2": {"type": "number"},
                "width": {"type": "number"},
                "has_gap": {"type": "boolean"},
            },
        },
        "edge_character": {"type": ["array", "null"], "items": {"enum": ["monopole", "dipole"]}},
    },
}

LOCALIZATION_SCHEMA: dict = {
    "type": "object",
    "required": ["schema_version", "n_resonators", "reference_gap", "in_gap_count", "mode"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "n_resonators": {"type": "integer"},
        "method": {"enum": ["capacitance", "multipole"]},
        "reference_gap": {
            "type": "object",
            "required": ["lower", "upper"],
            "properties": {"lower": _NUM, "upper": _NUM},
        },
        "in_gap_count": {"type": "integer", "minimum": 0},
        "mode": {
            "type": ["object", "null"],
            "properties": {
                "index": {"type": "integer"},
                "frequency": {"type": "number"},
                "center_weight": {"type": "number", "minimum": 0, "maximum": 1},
                "decay_ratio": _NUM,
                "relative_gap_position": _NUM,
                "distance_to_band_edge": _NUM,
            },
        },
    },
}

STABILITY_SCHEMA: dict = {
    "type": "object",
    "required": ["schema_version", "model", "sigma_pct", "trials", "completed", "seed", "variance_table", "retention"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "model": {"enum": ["full", "nearest-neighbour", "point-defect"]},
        "sigma_pct": {"type": "number", "minimum": 0},
        "trials": {"type": "integer", "minimum": 2},
        "completed": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "variance_table": {
            "type": "array",
            "minItems": 3,
            "maxItems": 3,
            "items": {
                "type": "object",
                "required": ["row", "variance"],
                "properties": {
                    "row": {"enum": ["upper band", "midgap", "lower band"]},
                    "variance": {"type": ["number", "null"], "minimum": 0},
                },
            },
        },
        "retention": {"type": "number", "minimum": 0, "maximum": 1},
        "midgap": {"type": "array", "items": _NUM},
    },
}

LATTICE_SUM_SCHEMA: dict = {
    "type": "object",
    "required": ["schema_version", "mode", "lambda", "mu", "alphaL", "value_real", "value_imag"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "mode": {"enum": ["helmholtz", "static"]},
        "lambda": {"type": "integer"},
        "mu": {"type": "integer"},
        "kL": {"type": "number"},
        "alphaL": {"type": "number"},
        "value_real": {"type": "number"},
        "value_imag": {"type": "number"},
        "truncation_M": {"type": ["integer", "null"]},
        "tail_estimate": _NUM,
    },
}


class ConfigError(ValueError):
    """Invalid configuration file; the message names the offending field or line."""


@dataclass(frozen=True)
class RunConfig:
    geometry: dict
    physics: dict
    solver: dict
    stability: dict
    lattice_sum: dict
    output: dict

    @property
    def delta(self) -> float:
        return float(self.physics["delta"])


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def parse_config(document: dict) -> RunConfig:
    """Validate a decoded document, fill defaults and check cross-field rules."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = ".".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"{where}: {err.message}")
        raise ConfigError("; ".join(lines))
    merged = _merge(DEFAULTS, document)
    geo = merged["geometry"]
    if "L" in document.get("geometry", {}):
        if not math.isclose(geo["L"], geo["d"] + geo["d_prime"], rel_tol=1e-12):
            raise ConfigError("geometry.L: must equal d + d_prime")
    geo["L"] = geo["d"] + geo["d_prime"]
    if geo["kind"] == "point_defect" and geo["N"] % 2 == 0:
        raise ConfigError("geometry.N: a point-defect chain needs an odd number of resonators")
    return RunConfig(**{k: merged[k] for k in ("geometry", "physics", "solver", "stability", "lattice_sum", "output")})


def load_config(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(document, dict):
        raise ConfigError("<root>: the configuration must be a JSON object")
    return parse_config(document)


def validate_output(document: dict, schema: dict) -> None:
    jsonschema.validate(document, schema)

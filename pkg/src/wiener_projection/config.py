"""Run configuration: JSON schema, validation, and object construction."""
from __future__ import annotations

import copy
import json

import jsonschema
import numpy as np

from .functionals import (DeterministicPoly, DriftKernel, IntegralTerminal,
                          SpacePoly, expression_kernel)
from .gaussian_calc import Polynomial
from .grid_paths import DiscretePath, TimeGrid
from .stochastic_lab import DeterministicPath, StateKernel, mixture_drift


class ConfigError(ValueError):
    pass


_coeffs = {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 17}

KERNEL_SCHEMA = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["type", "coeffs"],
         "properties": {"type": {"const": "space_poly"},
                        "coeffs": {"type": "array", "items": _coeffs,
                                   "minItems": 1, "maxItems": 9}}},
        {"type": "object", "additionalProperties": False, "required": ["type", "coeffs"],
         "properties": {"type": {"const": "deterministic_poly"}, "coeffs": _coeffs}},
        {"type": "object", "additionalProperties": False, "required": ["type", "f"],
         "properties": {"type": {"const": "expr"}, "f": {"type": "string"},
                        "order": {"type": "integer", "minimum": 1, "maximum": 64}}},
    ]
}

DRIFT_SCHEMA = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["type", "F"],
         "properties": {"type": {"const": "deterministic"}, "F": _coeffs}},
        {"type": "object", "additionalProperties": False, "required": ["type", "kernel"],
         "properties": {"type": {"const": "state_kernel"}, "kernel": KERNEL_SCHEMA}},
        {"type": "object", "additionalProperties": False,
         "required": ["type", "components", "probs"],
         "properties": {"type": {"const": "mixture"},
                        "components": {"type": "array", "items": _coeffs, "minItems": 2},
                        "probs": {"type": "array", "items": {"type": "number", "minimum": 0},
                                  "minItems": 2}}},
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "wiener-project run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "horizon", "n"],
    "properties": {
        "problem": {
            "type": "object", "additionalProperties": False,
            "minProperties": 1, "maxProperties": 1,
            "properties": {
                "kernel": KERNEL_SCHEMA,
                "cost": {"type": "object", "additionalProperties": False,
                         "required": ["g", "G"],
                         "properties": {"g": {**_coeffs, "maxItems": 9},
                                        "G": {**_coeffs, "maxItems": 9}}},
                "drift": DRIFT_SCHEMA,
            },
        },
        "horizon": {"type": "number", "exclusiveMinimum": 0, "maximum": 100},
        "n": {"type": "integer", "minimum": 2, "maximum": 100000},
        "ensemble": {
            "type": "object", "additionalProperties": False,
            "properties": {"M": {"type": "integer", "minimum": 1, "maximum": 10000000},
                           "seed": {"type": "integer", "minimum": 0,
                                    "maximum": 18446744073709551615}}},
        "solver": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "bc": {"oneOf": [{"const": "free"},
                                 {"type": "object", "additionalProperties": False,
                                  "required": ["fixed"],
                                  "properties": {"fixed": {"type": "number"}}}]},
                "slope_bound": {"type": "number", "exclusiveMinimum": 0},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "scan_a": {"type": "boolean"},
                "scan_a_range": {"type": "array", "items": {"type": "number"},
                                 "minItems": 2, "maxItems": 2}}},
        "mc_minimizer": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "steps": {"type": "integer", "minimum": 1},
                "learn_rate": {"type": "number", "exclusiveMinimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "init": _coeffs}},
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {"directory": {"type": "string"},
                           "emit_paths": {"type": "boolean"},
                           "emit_xtilde": {"type": "integer", "minimum": 0}}},
    },
}

DEFAULTS = {
    "ensemble": {"M": 10000, "seed": 42},
    "solver": {"bc": "free", "slope_bound": 50.0, "rtol": 1e-9, "scan_a": False,
               "scan_a_range": [-3.0, 3.0]},
    "mc_minimizer": {"steps": 500, "learn_rate": 1.0, "tol": 1e-6, "init": [0.0]},
    "outputs": {"directory": "out", "emit_paths": True, "emit_xtilde": 10},
}


def _line_of(text: str, path) -> str:
    """Best-effort line number of the last key of ``path`` in the raw JSON."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return ""
    needle = json.dumps(keys[-1])
    for i, line in enumerate(text.splitlines(), 1):
        if needle + ":" in line.replace(" :", ":"):
            return f" (line {i})"
    return ""


def load_config(text: str, overrides: dict | None = None) -> dict:
    """Parse, validate and fill defaults. Raises ConfigError with field diagnostics."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{where}{_line_of(text, e.absolute_path)}: {e.message}")
        raise ConfigError("config validation failed:\n  " + "\n  ".join(lines))
    cfg = copy.deepcopy(DEFAULTS)
    for key, val in raw.items():
        if isinstance(val, dict) and key in cfg:
            cfg[key].update(val)
        else:
            cfg[key] = val
    for dotted, val in (overrides or {}).items():
        section, _, field = dotted.partition(".")
        if field:
            cfg[section][field] = val
        else:
            cfg[section] = val
    return cfg


def build_kernel(spec: dict, horizon: float) -> DriftKernel:
    kind = spec["type"]
    try:
        if kind == "space_poly":
            rows = spec["coeffs"]
            width = max(len(r) for r in rows)
            return SpacePoly([list(r) + [0.0] * (width - len(r)) for r in rows], horizon)
        if kind == "deterministic_poly":
            return DeterministicPoly(Polynomial(tuple(spec["coeffs"])), horizon)
        if kind == "expr":
            return expression_kernel(spec["f"], horizon, spec.get("order", 20))
    except ValueError as exc:
        raise ConfigError(f"problem/kernel: {exc}") from exc
    raise ConfigError(f"unknown kernel type {kind!r}")


def build_cost(spec: dict, horizon: float) -> IntegralTerminal:
    try:
        return IntegralTerminal(Polynomial(tuple(spec["g"])), Polynomial(tuple(spec["G"])),
                                horizon)
    except ValueError as exc:
        raise ConfigError(f"problem/cost: {exc}") from exc


def poly_path(coeffs, grid: TimeGrid, where: str) -> DiscretePath:
    if coeffs[0] != 0:
        raise ConfigError(f"{where}: drift paths must start at 0 (constant term {coeffs[0]})")
    p = Polynomial(tuple(coeffs))
    return DiscretePath(grid, np.concatenate([[0.0], p(grid.nodes[1:])]))


def build_drift(spec: dict, grid: TimeGrid):
    kind = spec["type"]
    if kind == "deterministic":
        return DeterministicPath(poly_path(spec["F"], grid, "problem/drift/F"))
    if kind == "state_kernel":
        return StateKernel(build_kernel(spec["kernel"], grid.horizon))
    comps = [poly_path(c, grid, f"problem/drift/components/{i}")
             for i, c in enumerate(spec["components"])]
    if len(comps) != len(spec["probs"]):
        raise ConfigError("problem/drift: one probability per component required")
    try:
        return mixture_drift(comps, spec["probs"])
    except ValueError as exc:
        raise ConfigError(f"problem/drift: {exc}") from exc

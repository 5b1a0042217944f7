"""JSON problem configuration: schema, loading and object construction."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .bvp import BoundaryConditions
from .coefficients import EvenCoefficientSpec, OddCoefficientSpec, PolynomialCoefficientSpec
from .expressions import ExpressionError, parse
from .quadrature import Grid, make_grid
from .reduction import OperatorForm, build_even, build_odd, build_polynomial, build_raw

_fn = {"type": ["string", "number"]}
_fns = {"type": "array", "items": _fn}
_matrix = {"type": "array", "items": {"type": "array", "items": _fn}, "minItems": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj(
    {
        "kind": {"enum": ["even", "odd", "polynomial", "raw-kernel"]},
        "coefficients": {"type": "object"},
        "grid": _obj(
            {
                "points": {"type": "integer", "minimum": 3},
                "scheme": {"enum": ["uniform-trapezoid", "composite-simpson"]},
            }
        ),
        "boundary": _obj({"alpha": _matrix, "l": {"type": "integer"}}, ["alpha", "l"]),
        "spectral": _obj(
            {
                "count": {"type": "integer", "minimum": 1},
                "m_values": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "test_function": {"type": "string"},
            }
        ),
        "shift": _fn,
        "transform": _obj(
            {
                "Q": _matrix,
                "Q_tilde": _matrix,
                "rhs": _fn,
                "initial": _fns,
                "x0": {"type": "integer"},
                "difference_at_x0": _fns,
            },
            ["Q", "Q_tilde"],
        ),
        "verify": _obj(
            {
                "test_functions": {"type": "array", "items": {"type": "string"}},
                "kernel_csv": {"type": "string"},
            }
        ),
    },
    ["kind"],
)

COEFFICIENT_SCHEMAS = {
    "even": _obj({"n": {"type": "integer", "minimum": 1}, "P": _fns, "Q": _fns, "b": _fn}, ["n", "P", "Q"]),
    "odd": _obj(
        {"n": {"type": "integer", "minimum": 0}, "q0": _fn, "q0_prime": _fn, "P": _fns, "Q": _fns},
        ["n", "q0", "q0_prime", "P", "Q"],
    ),
    "polynomial": _obj({"N": {"type": "integer", "minimum": 3}, "p": _fns}, ["N", "p"]),
    "raw-kernel": _obj(
        {
            "m": {"type": "integer", "minimum": 1},
            "n": {"type": "integer", "minimum": 0},
            "kernel": _fn,
            "u": _fns,
            "multiplier": _fn,
        },
        ["m", "n", "kernel"],
    ),
}


class ConfigError(ValueError):
    pass


def constant(value) -> complex:
    """Complex constant from a number or a constant expression like ``2-3i``."""
    if isinstance(value, (int, float)):
        return complex(value)
    try:
        expr = parse(str(value))
        return complex(np.asarray(expr(np.zeros(1))).ravel()[0])
    except ExpressionError as exc:
        raise ConfigError(f"bad complex constant {value!r}: {exc}") from exc


@dataclass
class ProblemConfig:
    raw: dict

    @property
    def kind(self) -> str:
        return self.raw["kind"]

    def grid(self, points: int | None = None) -> Grid:
        g = self.raw.get("grid", {})
        count = points if points is not None else g.get("points", 401)
        try:
            return make_grid(count, g.get("scheme", "uniform-trapezoid"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def spec(self):
        if self.kind == "raw-kernel":
            return None
        if "coefficients" not in self.raw:
            raise ConfigError("config has no coefficients block")
        c = self.raw["coefficients"]
        try:
            if self.kind == "even":
                return EvenCoefficientSpec(c["n"], tuple(c["P"]), tuple(c["Q"]), c.get("b", 1))
            if self.kind == "odd":
                return OddCoefficientSpec(c["n"], c["q0"], c["q0_prime"], tuple(c["P"]), tuple(c["Q"]))
            if self.kind == "polynomial":
                return PolynomialCoefficientSpec(c["N"], tuple(c["p"]))
        except (ValueError, ExpressionError) as exc:
            raise ConfigError(f"coefficients: {exc}") from exc
        return None

    def form(self, grid: Grid) -> OperatorForm:
        if "coefficients" not in self.raw:
            raise ConfigError("config has no coefficients block")
        try:
            if self.kind == "raw-kernel":
                c = self.raw["coefficients"]
                return build_raw(grid, c["m"], c["n"], str(c["kernel"]), tuple(c.get("u", ())), c.get("multiplier", "1"))
            spec = self.spec()
            builder = {"even": build_even, "odd": build_odd, "polynomial": build_polynomial}[self.kind]
            return builder(spec, grid)
        except (ValueError, ExpressionError) as exc:
            raise ConfigError(str(exc)) from exc

    def boundary(self) -> BoundaryConditions:
        b = self.raw.get("boundary")
        if b is None:
            raise ConfigError("config has no boundary block")
        alpha = np.array([[constant(v) for v in row] for row in b["alpha"]], dtype=complex)
        try:
            return BoundaryConditions(alpha, b["l"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def shift(self) -> complex:
        return constant(self.raw.get("shift", 0))

    @property
    def spectral(self) -> dict:
        s = {"count": 3, "m_values": [5, 10, 20, 40], "test_function": "x*(1-x)"}
        s.update(self.raw.get("spectral", {}))
        return s


def validate(raw: dict) -> ProblemConfig:
    try:
        jsonschema.validate(raw, SCHEMA)
        kind = raw["kind"]
        if "coefficients" in raw:
            jsonschema.validate(raw["coefficients"], COEFFICIENT_SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    return ProblemConfig(raw)


def load(path) -> ProblemConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return validate(raw)

"""Validation of problem JSON documents.

A problem document has the shape::

    {
      "name": "...", "description": "...",             (optional metadata)
      "interval": [a, b],
      "weight": {"expr": "...", "sign_changes": [...], "antiderivative": "..." | [...]},
      "potential": {"expr": "...", "antiderivative": "..."},
      "bc": {"named": "periodic"} | {"matrices": {"C": ..., "D": ...}} | {"family": "Coupled", "c": ..., "d": ...},
      "options": {...}
    }

Unknown keys are rejected at every level.  Every violation is reported as a
:class:`SchemaError` whose ``pointer`` is the RFC 6901 JSON pointer of the
offending value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .bc import BCError, BCMatrices, coupled, named_bc, validate_bc
from .expr import Expr, ParseError, parse
from .weights import SignPatternError, WeightSpec, parse_weight

__all__ = [
    "SchemaError",
    "ProblemInput",
    "validate_problem",
    "fixture_names",
    "fixture_path",
    "load_fixture",
    "TOL_RANGE",
    "MAX_EIGS_RANGE",
]

TOP_KEYS = {"name", "description", "interval", "weight", "potential", "bc", "options"}
WEIGHT_KEYS = {"expr", "sign_changes", "antiderivative"}
POTENTIAL_KEYS = {"expr", "antiderivative"}
OPTION_KEYS = {"interval_rule", "tol", "max_eigs", "box", "gram_sizes", "samples", "pi", "help"}
PI_KEYS = {"function", "log_function", "x_max"}
HELP_KEYS = {"N", "window"}
NAMED_PARAMS = {
    "dirichlet": set(),
    "neumann": set(),
    "periodic": set(),
    "antiperiodic": set(),
    "robin": {"d_a", "d_b"},
    "coupled": {"c", "d"},
}
FAMILY_PARAMS = {
    "Dirichlet": set(),
    "LeftDirichletRobin": {"d"},
    "RobinRightDirichlet": {"d"},
    "Coupled": {"c", "d"},
    "FullRank": {"B"},
}
TOL_RANGE = (1e-13, 1e-4)
MAX_EIGS_RANGE = (1, 200)


class SchemaError(ValueError):
    """Invalid input document; ``pointer`` locates the offending value."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer or '(document)'}: {message}")


def _ptr(base: str, key) -> str:
    token = str(key).replace("~", "~0").replace("/", "~1")
    return f"{base}/{token}"


def _object(value, pointer: str, allowed: set[str]) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(pointer, f"expected an object, got {type(value).__name__}")
    for key in sorted(value):
        if key not in allowed:
            raise SchemaError(_ptr(pointer, key), f"unknown key (allowed: {', '.join(sorted(allowed))})")
    return value


def _number(value, pointer: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(pointer, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise SchemaError(pointer, "expected a finite number")
    return float(value)


def _integer(value, pointer: str, lo: int, hi: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(pointer, f"expected an integer, got {type(value).__name__}")
    if not lo <= value <= hi:
        raise SchemaError(pointer, f"must lie in [{lo}, {hi}]")
    return value


def _string(value, pointer: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise SchemaError(pointer, "expected a nonempty string")
    return value


def _expression(value, pointer: str) -> Expr:
    text = _string(value, pointer)
    try:
        return parse(text)
    except ParseError as exc:
        raise SchemaError(pointer, str(exc)) from None


def _complex(value, pointer: str) -> complex:
    if isinstance(value, list):
        if len(value) != 2:
            raise SchemaError(pointer, "complex numbers are [re, im] pairs")
        return complex(_number(value[0], _ptr(pointer, 0)), _number(value[1], _ptr(pointer, 1)))
    return complex(_number(value, pointer))


def _matrix(value, pointer: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != 2:
        raise SchemaError(pointer, "expected a 2x2 matrix (list of two rows)")
    rows = []
    for i, row in enumerate(value):
        rp = _ptr(pointer, i)
        if not isinstance(row, list) or len(row) != 2:
            raise SchemaError(rp, "each row must have two entries")
        rows.append([_complex(v, _ptr(rp, j)) for j, v in enumerate(row)])
    return np.array(rows, dtype=complex)


def tolerance(value, pointer: str) -> float:
    tol = _number(value, pointer)
    if not TOL_RANGE[0] <= tol <= TOL_RANGE[1]:
        raise SchemaError(pointer, f"tolerance must lie in [{TOL_RANGE[0]:g}, {TOL_RANGE[1]:g}]")
    return tol


def max_eigs(value, pointer: str) -> int:
    return _integer(value, pointer, *MAX_EIGS_RANGE)


# -- sections ---------------------------------------------------------------


def _interval(value) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2:
        raise SchemaError("/interval", "expected [a, b]")
    a, b = (_number(v, _ptr("/interval", i)) for i, v in enumerate(value))
    if not a < b:
        raise SchemaError("/interval", "need a < b")
    return a, b


def _weight(value, interval: tuple[float, float]) -> WeightSpec:
    obj = _object(value, "/weight", WEIGHT_KEYS)
    if "expr" not in obj:
        raise SchemaError("/weight/expr", "required")
    _expression(obj["expr"], "/weight/expr")
    pts = obj.get("sign_changes", [])
    if not isinstance(pts, list):
        raise SchemaError("/weight/sign_changes", "expected a list of numbers")
    pts = [_number(p, _ptr("/weight/sign_changes", i)) for i, p in enumerate(pts)]
    for i, p in enumerate(pts):
        if not interval[0] < p < interval[1]:
            raise SchemaError(_ptr("/weight/sign_changes", i), "must lie strictly inside the interval")
        if i and p <= pts[i - 1]:
            raise SchemaError(_ptr("/weight/sign_changes", i), "sign changes must be strictly increasing")
    anti = obj.get("antiderivative")
    if anti is not None:
        ap = "/weight/antiderivative"
        if isinstance(anti, list):
            if len(anti) not in (1, len(pts) + 1):
                raise SchemaError(ap, f"need 1 or {len(pts) + 1} expressions")
            for i, t in enumerate(anti):
                _expression(t, _ptr(ap, i))
        else:
            _expression(anti, ap)
    try:
        return parse_weight(obj["expr"], interval, pts, antiderivative=anti)
    except SignPatternError as exc:
        raise SchemaError("/weight", str(exc)) from None


def _potential(value) -> tuple[Expr, str, Expr | None, str | None]:
    obj = _object(value, "/potential", POTENTIAL_KEYS)
    text = obj.get("expr", "0")
    q = _expression(text, "/potential/expr")
    anti = obj.get("antiderivative")
    return q, text, (_expression(anti, "/potential/antiderivative") if anti is not None else None), anti


def _bc(value) -> BCMatrices:
    pair = _bc_pair(value)
    try:
        return validate_bc(pair)
    except BCError as exc:
        raise SchemaError("/bc", str(exc)) from None


def _bc_pair(value) -> BCMatrices:
    if not isinstance(value, dict):
        raise SchemaError("/bc", "expected an object with one of 'named', 'matrices' or 'family'")
    kinds = [k for k in ("named", "matrices", "family") if k in value]
    if len(kinds) != 1:
        raise SchemaError("/bc", "exactly one of 'named', 'matrices' or 'family' is required")
    kind = kinds[0]
    try:
        if kind == "named":
            name = _string(value["named"], "/bc/named").lower()
            if name not in NAMED_PARAMS:
                raise SchemaError("/bc/named", f"unknown condition (known: {', '.join(sorted(NAMED_PARAMS))})")
            _object(value, "/bc", {"named"} | NAMED_PARAMS[name])
            params = {}
            for key in sorted(NAMED_PARAMS[name] & set(value)):
                p = _ptr("/bc", key)
                params[key] = _complex(value[key], p) if key == "c" else _number(value[key], p)
            return named_bc(name, **params)
        if kind == "matrices":
            _object(value, "/bc", {"matrices"})
            mats = _object(value["matrices"], "/bc/matrices", {"C", "D"})
            for key in ("C", "D"):
                if key not in mats:
                    raise SchemaError(_ptr("/bc/matrices", key), "required")
            return BCMatrices(_matrix(mats["C"], "/bc/matrices/C"), _matrix(mats["D"], "/bc/matrices/D"))
        family = _string(value["family"], "/bc/family")
        if family not in FAMILY_PARAMS:
            raise SchemaError("/bc/family", f"unknown family (known: {', '.join(sorted(FAMILY_PARAMS))})")
        _object(value, "/bc", {"family"} | FAMILY_PARAMS[family])
        d = _number(value.get("d", 0.0), "/bc/d")
        if family == "Dirichlet":
            return BCMatrices(np.zeros((2, 2)), np.eye(2))
        if family == "LeftDirichletRobin":
            return BCMatrices([[0, 1], [0, 0]], [[0, d], [1, 0]])
        if family == "RobinRightDirichlet":
            return BCMatrices([[1, 0], [0, 0]], [[d, 0], [0, 1]])
        if family == "Coupled":
            return coupled(_complex(value.get("c", 1.0), "/bc/c"), d)
        if "B" not in value:
            raise SchemaError("/bc/B", "required for FullRank")
        return BCMatrices(np.eye(2), _matrix(value["B"], "/bc/B"))
    except BCError as exc:
        raise SchemaError("/bc", str(exc)) from None


def _options(value) -> dict:
    obj = _object(value, "/options", OPTION_KEYS)
    out: dict = {}
    if "interval_rule" in obj:
        rule = _string(obj["interval_rule"], "/options/interval_rule")
        if rule not in ("midpoint", "thirds"):
            raise SchemaError("/options/interval_rule", "must be 'midpoint' or 'thirds'")
        out["interval_rule"] = rule
    if "tol" in obj:
        out["tol"] = tolerance(obj["tol"], "/options/tol")
    if "max_eigs" in obj:
        out["max_eigs"] = max_eigs(obj["max_eigs"], "/options/max_eigs")
    if "samples" in obj:
        out["samples"] = _integer(obj["samples"], "/options/samples", 2, 10_000)
    if "box" in obj:
        box = obj["box"]
        if not isinstance(box, list) or len(box) != 4:
            raise SchemaError("/options/box", "expected [re_min, re_max, im_min, im_max]")
        box = [_number(v, _ptr("/options/box", i)) for i, v in enumerate(box)]
        if not (box[0] < box[1] and box[2] < box[3]):
            raise SchemaError("/options/box", "need re_min < re_max and im_min < im_max")
        out["box"] = tuple(box)
    if "gram_sizes" in obj:
        sizes = obj["gram_sizes"]
        if not isinstance(sizes, list) or not sizes:
            raise SchemaError("/options/gram_sizes", "expected a nonempty list of integers")
        out["gram_sizes"] = sorted({_integer(n, _ptr("/options/gram_sizes", i), 1, 100) for i, n in enumerate(sizes)})
    if "pi" in obj:
        pi = _object(obj["pi"], "/options/pi", PI_KEYS)
        sect: dict = {}
        if "function" in pi:
            sect["function"] = _expression(pi["function"], "/options/pi/function")
            sect["function_text"] = pi["function"]
        if "log_function" in pi:
            sect["log_function"] = _expression(pi["log_function"], "/options/pi/log_function")
        if "x_max" in pi:
            x_max = _number(pi["x_max"], "/options/pi/x_max")
            if x_max <= 0:
                raise SchemaError("/options/pi/x_max", "must be positive")
            sect["x_max"] = x_max
        if "function" in sect and "x_max" not in sect:
            raise SchemaError("/options/pi/x_max", "required together with 'function'")
        out["pi"] = sect
    if "help" in obj:
        hp = _object(obj["help"], "/options/help", HELP_KEYS)
        sect = {}
        if "N" in hp:
            sect["N"] = _integer(hp["N"], "/options/help/N", 8, 256)
        if "window" in hp:
            win = _number(hp["window"], "/options/help/window")
            if win <= 0:
                raise SchemaError("/options/help/window", "must be positive")
            sect["window"] = win
        out["help"] = sect
    return out


# -- document ---------------------------------------------------------------


@dataclass
class ProblemInput:
    """A validated problem document; absent sections are None."""

    raw: dict
    weight: WeightSpec | None = None
    q: Expr = field(default_factory=lambda: parse("0"))
    q_text: str = "0"
    q_antiderivative: Expr | None = None
    q_antiderivative_text: str | None = None
    bc: BCMatrices | None = None
    options: dict = field(default_factory=dict)

    def require(self, *sections: str) -> None:
        for name in sections:
            if getattr(self, name) is None:
                key = "interval" if name == "weight" and "interval" not in self.raw else name
                raise SchemaError(f"/{key}", "required for this subcommand")


def validate_problem(doc) -> ProblemInput:
    """Check ``doc`` against the problem schema and build the library objects."""
    obj = _object(doc, "", TOP_KEYS)
    for key in ("name", "description"):
        if key in obj:
            _string(obj[key], f"/{key}")
    out = ProblemInput(raw=obj)
    if "weight" in obj:
        if "interval" not in obj:
            raise SchemaError("/interval", "required when a weight is given")
        out.weight = _weight(obj["weight"], _interval(obj["interval"]))
    elif "interval" in obj:
        _interval(obj["interval"])
    if "potential" in obj:
        out.q, out.q_text, out.q_antiderivative, out.q_antiderivative_text = _potential(obj["potential"])
    if "bc" in obj:
        out.bc = _bc(obj["bc"])
    if "options" in obj:
        out.options = _options(obj["options"])
    return out


# -- bundled fixtures -----------------------------------------------------------


def _fixture_dir() -> Path:
    return Path(str(resources.files("indefsl") / "fixtures"))


def fixture_names() -> list[str]:
    """Names of the bundled example problems."""
    return sorted(p.stem for p in _fixture_dir().glob("*.json"))


def fixture_path(name: str) -> Path:
    path = _fixture_dir() / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"no fixture named {name!r}; known: {', '.join(fixture_names())}")
    return path


def load_fixture(name: str) -> dict:
    """The raw JSON document of a bundled example problem."""
    return json.loads(fixture_path(name).read_text())

"""JSON run configuration.

Schema (all keys optional except ``problem``)::

    {
      "problem": "burgers" | "linear_advection" | "ternary_default"
                 | "ternary_high_contrast" | "ternary_2d" | "er",
      "params": {...},               # problem parameters, see PROBLEM_PARAMS
      "grid": {"n": 40} | {"nx": 40, "ny": 80},
      "grids": [20, 40, 80] | [[40, 80], [80, 160]],   # convergence only
      "scheme": "VRS" | {"x": "VRO", "y": "VRS"},
      "order": 2 | {"x": 2, "y": 2},
      "schemes": ["JX", "VRS", "VRO"],                   # convergence only
      "cfl": 0.5,
      "t_final": 0.5,
      "jx_policy": "jx_equal",
      "seed": 0,
      "output_dir": "out",
      "name": "run"
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from ..schemes2d import POLICIES

PROBLEMS = ("burgers", "linear_advection", "ternary_default", "ternary_high_contrast",
            "ternary_2d", "er")
PROBLEMS_2D = ("ternary_2d", "er")
SCHEMES = ("JX", "VRS", "VRO")

# accepted keys under "params" per problem
PROBLEM_PARAMS = {
    "burgers": {"x_min", "x_max"},
    "linear_advection": {"speed", "x_min", "x_max"},
    "ternary_default": {"K", "S_or", "S_gc", "M", "length"},
    "ternary_high_contrast": {"K", "S_or", "S_gc", "M", "length"},
    "ternary_2d": {"K", "S_or", "S_gc", "M", "rate", "log_std", "correlation_length",
                   "perm_csv", "perm_seed"},
    "er": set(),
}

DEFAULT_GRID = {
    "burgers": (40, None), "linear_advection": (40, None),
    "ternary_default": (50, None), "ternary_high_contrast": (50, None),
    "ternary_2d": (40, 40), "er": (40, 80),
}
DEFAULT_T = {"burgers": 0.5, "linear_advection": 1.0, "ternary_default": 1.0,
             "ternary_high_contrast": 1.0, "ternary_2d": 0.2, "er": 0.85}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    problem: str
    params: dict = field(default_factory=dict)
    nx: int = 40
    ny: Optional[int] = None
    grids: list = field(default_factory=list)
    scheme_x: str = "VRS"
    scheme_y: str = "VRS"
    order_x: int = 2
    order_y: int = 2
    schemes: list = field(default_factory=list)
    cfl: float = 0.5
    t_final: float = 0.5
    jx_policy: str = "jx_equal"
    seed: int = 0
    output_dir: str = "out"
    name: str = "run"

    @property
    def ndim(self) -> int:
        return 2 if self.problem in PROBLEMS_2D else 1

    def to_dict(self) -> dict:
        d = {
            "problem": self.problem, "params": self.params,
            "grid": {"n": self.nx} if self.ndim == 1 else {"nx": self.nx, "ny": self.ny},
            "scheme": {"x": self.scheme_x, "y": self.scheme_y} if self.ndim == 2 else self.scheme_x,
            "order": {"x": self.order_x, "y": self.order_y} if self.ndim == 2 else self.order_x,
            "cfl": self.cfl, "t_final": self.t_final, "jx_policy": self.jx_policy,
            "seed": self.seed, "output_dir": self.output_dir, "name": self.name,
        }
        if self.grids:
            d["grids"] = self.grids
        if self.schemes:
            d["schemes"] = self.schemes
        return d


def _positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
        raise ConfigError(name, f"must be a positive integer, got {value!r}")
    return value


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"must be a number, got {value!r}")
    return float(value)


def _scheme(value, name: str) -> str:
    if not isinstance(value, str) or value.upper() not in SCHEMES:
        raise ConfigError(name, f"must be one of {SCHEMES}, got {value!r}")
    return value.upper()


def _order(value, name: str) -> int:
    if value not in (1, 2) or isinstance(value, bool):
        raise ConfigError(name, f"must be 1 or 2, got {value!r}")
    return value


def _per_dim(value, name: str, conv, ndim: int):
    if isinstance(value, dict):
        extra = set(value) - {"x", "y"}
        if extra:
            raise ConfigError(name, f"unknown keys {sorted(extra)}")
        if "x" not in value:
            raise ConfigError(f"{name}.x", "missing")
        x = conv(value["x"], f"{name}.x")
        y = conv(value.get("y", value["x"]), f"{name}.y")
        if ndim == 1 and "y" in value:
            raise ConfigError(f"{name}.y", "not allowed for a 1D problem")
        return x, y
    v = conv(value, name)
    return v, v


def parse_config(doc: Any) -> RunConfig:
    """Validate a decoded JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    known = {"problem", "params", "grid", "grids", "scheme", "order", "schemes", "cfl",
             "t_final", "jx_policy", "seed", "output_dir", "name"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown key")
    problem = doc.get("problem")
    if problem not in PROBLEMS:
        raise ConfigError("problem", f"must be one of {PROBLEMS}, got {problem!r}")
    ndim = 2 if problem in PROBLEMS_2D else 1

    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params", "must be an object")
    bad = set(params) - PROBLEM_PARAMS[problem]
    if bad:
        raise ConfigError(f"params.{sorted(bad)[0]}", f"not a parameter of {problem}")

    nx, ny = DEFAULT_GRID[problem]
    grid = doc.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("grid", "must be an object")
    if ndim == 1:
        if set(grid) - {"n"}:
            raise ConfigError("grid", "1D problems take only 'n'")
        nx = _positive_int(grid.get("n", nx), "grid.n")
    else:
        if set(grid) - {"nx", "ny"}:
            raise ConfigError("grid", "2D problems take 'nx' and 'ny'")
        nx = _positive_int(grid.get("nx", nx), "grid.nx")
        ny = _positive_int(grid.get("ny", ny), "grid.ny")

    grids = doc.get("grids", [])
    if not isinstance(grids, list):
        raise ConfigError("grids", "must be a list")
    parsed_grids = []
    for i, entry in enumerate(grids):
        if ndim == 1:
            parsed_grids.append(_positive_int(entry, f"grids[{i}]"))
        else:
            if not (isinstance(entry, list) and len(entry) == 2):
                raise ConfigError(f"grids[{i}]", "2D grid entries are [nx, ny]")
            parsed_grids.append([_positive_int(entry[0], f"grids[{i}][0]"),
                                 _positive_int(entry[1], f"grids[{i}][1]")])

    sx, sy = _per_dim(doc.get("scheme", "VRS"), "scheme", _scheme, ndim)
    ox, oy = _per_dim(doc.get("order", 2), "order", _order, ndim)
    if ox != oy:
        raise ConfigError("order", "both directions must use the same order")

    schemes = doc.get("schemes", [])
    if not isinstance(schemes, list):
        raise ConfigError("schemes", "must be a list")
    schemes = [_scheme(s, f"schemes[{i}]") for i, s in enumerate(schemes)]

    cfl = _number(doc.get("cfl", 0.5), "cfl")
    if not 0.0 < cfl <= 1.0:
        raise ConfigError("cfl", f"must lie in (0, 1], got {cfl}")
    t_final = _number(doc.get("t_final", DEFAULT_T[problem]), "t_final")
    if t_final < 0.0:
        raise ConfigError("t_final", "must be nonnegative")
    policy = doc.get("jx_policy", "jx_equal")
    if policy not in POLICIES or not policy.startswith("jx_"):
        raise ConfigError("jx_policy", f"must be one of jx_equal, jx_min_ax, jx_min_ay, got {policy!r}")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a nonnegative integer")
    output_dir = doc.get("output_dir", "out")
    name = doc.get("name", "run")
    for key, val in (("output_dir", output_dir), ("name", name)):
        if not isinstance(val, str) or not val:
            raise ConfigError(key, "must be a nonempty string")
    if "/" in name or "\\" in name:
        raise ConfigError("name", "must not contain path separators")
    return RunConfig(problem, dict(params), nx, ny, parsed_grids, sx, sy, ox, oy, schemes,
                     cfl, t_final, policy, seed, output_dir, name)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError("--config", f"file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    return parse_config(doc)

"""JSON operator configs for the command-line front end."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .constvekua import ZERO_RTOL, VekuaConstOp
from .dual import ConfigurationError, GroupSpec
from .odevekua import VekuaTimeOp, build_profiles
from .symbol import symbol_from_config

CONST_KEYS = ("L", "p", "q")
TIME_KEYS = ("D", "p0", "lambda", "delta", "alpha", "q", "s")


def parse_complex(value, name: str) -> complex:
    if isinstance(value, bool):
        raise ConfigurationError(f"field {name!r} must be a number or {{re, im}}")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, dict):
        if "re" not in value and "im" not in value:
            raise ConfigurationError(f"field {name!r} needs 're' and/or 'im'")
        try:
            return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
        except (TypeError, ValueError):
            raise ConfigurationError(f"field {name!r} has a non-numeric component") from None
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigurationError(f"field {name!r} must be a number or {{re, im}}")


def parse_real(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"field {name!r} must be a real number")
    if not math.isfinite(value):
        raise ConfigurationError(f"field {name!r} must be finite")
    return float(value)


def complex_json(z: complex) -> dict:
    return {"re": z.real, "im": z.imag}


@dataclass
class CliConfig:
    """Parsed command configuration (exactly one operator block)."""

    group: GroupSpec
    kind: str
    operator: dict
    cutoff: float = 20.0
    grid: int | None = None
    zero_tol: float = ZERO_RTOL
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "CliConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        if "group" not in data:
            raise ConfigurationError("missing field 'group'")
        group = GroupSpec.parse(data["group"])
        has_c = "L" in data
        has_t = "D" in data
        if has_c == has_t:
            raise ConfigurationError("config needs exactly one operator block: 'L' (constant) or 'D' (time)")
        kind = "constant" if has_c else "time"
        keys = CONST_KEYS if has_c else TIME_KEYS
        op = {}
        for k in keys:
            if k not in data:
                raise ConfigurationError(f"missing field {k!r}")
            op[k] = data[k]
        if has_c:
            op["p"] = parse_complex(op["p"], "p")
            op["q"] = parse_complex(op["q"], "q")
        else:
            for k in ("p0", "lambda", "delta"):
                op[k] = parse_real(op[k], k)
            op["alpha"] = parse_complex(op["alpha"], "alpha")
        cutoff = parse_real(data.get("cutoff", 20.0), "cutoff")
        if cutoff < 1:
            raise ConfigurationError("cutoff must be >= 1")
        grid = data.get("grid")
        if kind == "time":
            if grid is None:
                raise ConfigurationError("missing field 'grid'")
        if grid is not None:
            if isinstance(grid, bool) or not isinstance(grid, int) or grid < 4 or grid % 2:
                raise ConfigurationError("field 'grid' must be an even integer >= 4")
        zt = parse_real(data.get("zero_tol", ZERO_RTOL), "zero_tol")
        known = {"group", "cutoff", "grid", "zero_tol", *keys}
        extra = {k: v for k, v in data.items() if k not in known}
        return cls(group, kind, op, cutoff, grid, zt, extra)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"group": self.group.tags}
        for k, v in self.operator.items():
            d[k] = complex_json(v) if isinstance(v, complex) else v
        d["cutoff"] = self.cutoff
        if self.grid is not None:
            d["grid"] = self.grid
        d["zero_tol"] = self.zero_tol
        d.update(self.extra)
        return d

    def build_const(self) -> VekuaConstOp:
        if self.kind != "constant":
            raise ConfigurationError("this command needs a constant-coefficient operator ('L')")
        L = symbol_from_config(self.operator["L"], self.group)
        return VekuaConstOp(L, self.operator["p"], self.operator["q"], zero_rtol=self.zero_tol)

    def build_time(self) -> VekuaTimeOp:
        if self.kind != "time":
            raise ConfigurationError("this command needs a time-dependent operator ('D')")
        D = symbol_from_config(self.operator["D"], self.group)
        pr = build_profiles(self.operator["q"], self.operator["s"], self.grid)
        o = self.operator
        return VekuaTimeOp(D, o["p0"], o["lambda"], o["delta"], o["alpha"], pr, zero_rtol=self.zero_tol)


def load_config(path) -> CliConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e.strerror}") from None
    return CliConfig.from_dict(data)

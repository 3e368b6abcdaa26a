"""JSON parameter files keyed by model symbol names (``tau_S``, ``V_G``, ...)."""

from __future__ import annotations

import json
from dataclasses import MISSING, Field, field, fields
from pathlib import Path
from typing import Any, Protocol

from dual_hormone_ap.core.errors import ConfigError
from dual_hormone_ap.core.paths import write_json


class _ParamSet(Protocol):
    __dataclass_fields__: dict[str, Field[Any]]


def param(default: float, symbol: str) -> Any:
    """Dataclass field carrying the symbol it is serialized under."""
    return field(default=default, metadata={"symbol": symbol})


def symbol_of(f: Field[Any]) -> str:
    """Serialized name of a parameter field."""
    return f.metadata.get("symbol", f.name)


def params_to_dict(params: _ParamSet) -> dict[str, float]:
    """Map symbol names to values."""
    return {symbol_of(f): float(getattr(params, f.name)) for f in fields(params)}  # type: ignore[arg-type]


def params_from_dict[P: _ParamSet](cls: type[P], data: dict[str, Any], source: str = "<dict>") -> P:
    """Build a parameter set from a symbol-keyed mapping.

    Missing symbols keep their defaults.

    Raises:
        ConfigError: On unknown symbols, non-numeric values or failed validation.
    """
    by_symbol = {symbol_of(f): f for f in fields(cls)}  # type: ignore[arg-type]
    kwargs: dict[str, float] = {}
    for key, value in data.items():
        if key not in by_symbol:
            raise ConfigError(f"{source}:{key}", "unknown parameter symbol")
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigError(f"{source}:{key}", f"expected a number, got {value!r}")
        kwargs[by_symbol[key].name] = float(value)

    for f in fields(cls):  # type: ignore[arg-type]
        if f.default is MISSING and f.name not in kwargs:
            raise ConfigError(f"{source}:{symbol_of(f)}", "missing required parameter")

    return cls(**kwargs)


def load_params[P: _ParamSet](cls: type[P], path: Path) -> P:
    """Read a parameter set from a JSON file."""
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(str(path), f"not valid JSON ({e.msg})") from e
    if not isinstance(data, dict):
        raise ConfigError(str(path), "parameter file must be a JSON object")
    return params_from_dict(cls, data, source=str(path))


def save_params(params: _ParamSet, path: Path) -> Path:
    """Write a parameter set as symbol-keyed JSON."""
    return write_json(path, params_to_dict(params))

"""``key = value`` run files for the command line.

One setting per line; blank lines and ``#`` comments are ignored.  Values
are typed by the target dataclass field: integers, floats, booleans
(true/false), ``none`` for optional numbers and comma-separated lists for
tuples.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any, Iterable

from .backtest import BacktestConfig
from .errors import InvalidConfig

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def read_pairs(path) -> dict[str, str]:
    pairs = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}: line {lineno} is not key = value: {line!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        if not key:
            raise InvalidConfig(f"{path}: line {lineno} has an empty key")
        if key in pairs:
            raise InvalidConfig(f"{path}: key {key!r} repeated on line {lineno}")
        pairs[key] = value
    return pairs


def parse_overrides(items: Iterable[str]) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise InvalidConfig(f"override {item!r} is not key=value")
        key, value = (x.strip() for x in item.split("=", 1))
        out[key] = value
    return out


def _convert(key: str, raw: str, default: Any) -> Any:
    low = raw.strip().lower()
    if isinstance(default, bool):
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise InvalidConfig(f"{key}: expected true/false, got {raw!r}")
    if isinstance(default, tuple):
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if low == "none":
        return None
    try:
        if isinstance(default, int) or key in ("start", "days"):
            return int(raw, 10)
        return float(raw)
    except ValueError:
        raise InvalidConfig(f"{key}: cannot parse {raw!r}") from None


def backtest_config(values: dict[str, str]) -> BacktestConfig:
    """Typed, validated BacktestConfig; unknown keys are rejected."""
    defaults = {f.name: getattr(BacktestConfig(), f.name) for f in dataclasses.fields(BacktestConfig)}
    unknown = sorted(set(values) - set(defaults))
    if unknown:
        raise InvalidConfig(f"unknown config keys: {', '.join(unknown)}")
    return BacktestConfig(**{k: _convert(k, v, defaults[k]) for k, v in values.items()})

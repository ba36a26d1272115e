"""Flat ``key = value`` configuration files.

One pair per line, ``#`` starts a comment. Values are typed by the target
dataclass: ints, floats (``inf`` allowed), strings, comma-separated tuples,
and ``auto`` for optional fields left to their per-model default.
"""

from __future__ import annotations

import dataclasses
import math
import os
import typing

from .errors import ConfigError

AUTO = "auto"


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()
    return pairs


def read_file(path: str | os.PathLike) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:  # FileNotFoundError propagates to the CLI
        return parse_text(fh.read(), str(path))


def parse_overrides(items: typing.Iterable[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {item!r} is not key=value")
        out[key.strip()] = value.strip()
    return out


def _coerce(name: str, hint, default, raw: str):
    optional = default is None
    if optional and raw.lower() in (AUTO, "none", ""):
        return None
    kind = type(default) if default is not None else _optional_base(hint)
    try:
        if kind is tuple:
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if kind is bool:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if kind is int:
            return int(raw)
        if kind is float:
            value = float(raw)
            if math.isnan(value):
                raise ValueError(raw)
            return value
        return raw
    except ValueError:
        raise ConfigError(f"key {name!r}: cannot read {raw!r} as {kind.__name__}") from None


def _optional_base(hint) -> type:
    text = hint if isinstance(hint, str) else getattr(hint, "__name__", str(hint))
    for t in (int, float, str):
        if t.__name__ in text:
            return t
    return str


def build(cls, raw: dict[str, str]):
    """Instantiate dataclass ``cls`` from string values, rejecting unknown keys."""
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        f = known[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        kwargs[key] = _coerce(key, f.type, default, value)
    return cls(**kwargs)


def format_value(value) -> str:
    if value is None:
        return AUTO
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump(obj) -> str:
    """Render a dataclass instance as a re-loadable config text."""
    lines = [f"{f.name} = {format_value(getattr(obj, f.name))}" for f in dataclasses.fields(obj)]
    return "\n".join(lines) + "\n"

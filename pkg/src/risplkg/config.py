"""Scenario files: a sectioned INI format, one file per scenario.

Sections mirror :class:`ScenarioConfig`: ``[scenario]`` holds the top-level
fields, ``[layout]``, ``[geometry]``, ``[fading]``, ``[frame]`` and
``[schedule]`` hold the nested ones.  Every key is optional; missing keys
take the dataclass defaults.  Points are written ``x, y`` and an absent
attacker schedule ``none``.
"""

from __future__ import annotations

import configparser
import math
import typing
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path

from .errors import DomainError
from .experiments import ScenarioConfig

EXIT_MISSING = 3
EXIT_SYNTAX = 4
EXIT_RANGE = 5
EXIT_UNKNOWN_KEY = 6

TOP = "scenario"
NESTED = ("layout", "geometry", "fading", "frame", "schedule")


class ConfigError(DomainError):
    """A configuration problem; ``status`` is the CLI exit status."""

    def __init__(self, message: str, status: int):
        super().__init__(message)
        self.status = status


def _kinds(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls)}


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _parse(raw: str, kind, where: str):
    text = raw.strip()
    origin = typing.get_origin(kind)
    args = typing.get_args(kind)
    try:
        if origin is typing.Union and type(None) in args:
            if text.lower() == "none":
                return None
            inner = next(a for a in args if a is not type(None))
            return _parse(text, inner, where)
        if kind is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            v = float(text)
            if math.isnan(v):
                raise ValueError(text)
            return v
        if kind is str:
            return text
        if origin is tuple:
            parts = [p for p in text.split(",")]
            if args and args[-1] is not Ellipsis and len(parts) != len(args):
                raise ValueError(text)
            elem = args[0] if args else float
            return tuple(_parse(p, elem, where) for p in parts)
    except (ValueError, StopIteration):
        raise ConfigError(f"{where}: cannot parse {raw!r} as {_kind_name(kind)}", EXIT_SYNTAX)
    raise ConfigError(f"{where}: unsupported field type {kind!r}", EXIT_SYNTAX)


def _kind_name(kind) -> str:
    return getattr(kind, "__name__", str(kind))


def parse_config_text(text: str, source: str = "<string>") -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: malformed config: {exc}", EXIT_SYNTAX) from None

    base = ScenarioConfig()
    top_kinds = {k: v for k, v in _kinds(ScenarioConfig).items() if k not in NESTED}
    for section in cp.sections():
        if section != TOP and section not in NESTED:
            raise ConfigError(f"{source}: unknown section [{section}]", EXIT_UNKNOWN_KEY)

    def build(section, kinds):
        values = {}
        if cp.has_section(section):
            for key, raw in cp.items(section):
                if key not in kinds:
                    raise ConfigError(f"{source}: unknown key {section}.{key}", EXIT_UNKNOWN_KEY)
                values[key] = _parse(raw, kinds[key], f"{section}.{key}")
        return values

    top = build(TOP, top_kinds)
    nested = {}
    for name in NESTED:
        sub = getattr(base, name)
        vals = build(name, _kinds(type(sub)))
        try:
            nested[name] = replace(sub, **vals)
        except DomainError as exc:
            raise ConfigError(f"{source}: [{name}] {exc}", EXIT_RANGE) from None
    try:
        return replace(base, **top, **nested)
    except DomainError as exc:
        raise ConfigError(f"{source}: [{TOP}] {exc}", EXIT_RANGE) from None


def parse_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}", EXIT_MISSING)
    try:
        text = p.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {p}: {exc}", EXIT_SYNTAX) from None
    return parse_config_text(text, str(p))


def dump_config(config: ScenarioConfig) -> str:
    lines = [f"[{TOP}]"]
    for f in fields(config):
        if f.name not in NESTED:
            lines.append(f"{f.name} = {_format(getattr(config, f.name))}")
    for name in NESTED:
        sub = getattr(config, name)
        lines += ["", f"[{name}]"]
        for f in fields(sub):
            lines.append(f"{f.name} = {_format(getattr(sub, f.name))}")
    return "\n".join(lines) + "\n"


def preset_names() -> list:
    files = resources.files("risplkg").joinpath("presets").iterdir()
    names = [Path(str(f)).stem for f in files if str(f).endswith(".ini")]
    return sorted(names, key=lambda n: (len(n), n))


def load_preset(name: str) -> ScenarioConfig:
    names = preset_names()
    if name not in names:
        raise ConfigError(f"unknown preset {name!r}; valid presets: {', '.join(names)}", EXIT_RANGE)
    res = resources.files("risplkg").joinpath("presets", f"{name}.ini")
    return parse_config_text(res.read_text(), f"preset {name}")


def load_presets() -> dict:
    return {n: load_preset(n) for n in preset_names()}

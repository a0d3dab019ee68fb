"""YAML campaign configuration: strict parsing, overrides and round-trip emission."""
from __future__ import annotations

import dataclasses
import types
import typing
from pathlib import Path

import yaml

from .experiment import CampaignConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the key path and, when known, the line."""


def _key_lines(text: str) -> dict[tuple, int]:
    """1-based line of every mapping key, keyed by its path."""
    out: dict[tuple, int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                out[p] = k.start_mark.line + 1
                walk(v, p)

    try:
        walk(yaml.compose(text), ())
    except yaml.YAMLError:
        pass
    return out


def _where(path, lines) -> str:
    key = ".".join(path)
    line = lines.get(tuple(path))
    return f"{key} (line {line})" if line else key


def _coerce(tp, value, path, lines):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path, lines)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(inner, value, path, lines)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{_where(path, lines)}: expected a list, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(args[0], v, path, lines) for v in value)
        if len(value) != len(args):
            raise ConfigError(f"{_where(path, lines)}: expected {len(args)} values, got {len(value)}")
        return tuple(_coerce(a, v, path, lines) for a, v in zip(args, value))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{_where(path, lines)}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{_where(path, lines)}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{_where(path, lines)}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{_where(path, lines)}: expected a string, got {value!r}")
        return value
    return value


def _build(cls, data, path=(), lines=None):
    lines = lines or {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{_where(path, lines) or 'top level'}: expected a mapping, got {data!r}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key {_where(path + (str(unknown[0]),), lines)}")
    kwargs = {k: _coerce(hints[k], v, path + (k,), lines) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{'.'.join(path) or 'config'}: {exc}") from exc


def to_dict(cfg) -> dict:
    def plain(v):
        if dataclasses.is_dataclass(v):
            return {f.name: plain(getattr(v, f.name)) for f in dataclasses.fields(v) if f.init}
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        return v
    return plain(cfg)


def from_dict(data: dict, lines=None) -> CampaignConfig:
    return _build(CampaignConfig, data, (), lines)


def emit(cfg: CampaignConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def parse(text: str) -> CampaignConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"YAML syntax error{where}: {getattr(exc, 'problem', exc)}") from exc
    return from_dict(data, _key_lines(text))


def load(path) -> CampaignConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        return parse(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _leaf_paths(cls, prefix=()):
    for f in dataclasses.fields(cls):
        tp = typing.get_type_hints(cls)[f.name]
        if dataclasses.is_dataclass(tp):
            yield from _leaf_paths(tp, prefix + (f.name,))
        else:
            yield prefix + (f.name,)


def apply_overrides(cfg: CampaignConfig, overrides) -> CampaignConfig:
    """Apply ``key=value`` strings; keys are dotted paths or unambiguous leaf names."""
    data = to_dict(cfg)
    leaves = list(_leaf_paths(CampaignConfig))
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        key = key.strip()
        path = tuple(key.split("."))
        if path not in leaves:
            hits = [p for p in leaves if p[-len(path):] == path]
            if len(hits) != 1:
                why = "ambiguous" if hits else "unknown"
                raise ConfigError(f"{why} override key {key!r}")
            path = hits[0]
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {key}: cannot parse value {raw!r}") from exc
        node = data
        for p in path[:-1]:
            node = node[p]
        node[path[-1]] = value
    return from_dict(data)

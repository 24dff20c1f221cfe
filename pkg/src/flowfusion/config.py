"""Plain ``key = value`` run configuration files.

Keys are ``section.field`` with sections ``data`` (synthetic dataset),
``train`` (optimiser and model sizes), ``loss`` (term weights), ``flags``
(forward-path switches) and ``mfq`` (metric settings). ``#`` starts a
comment. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field, replace
from pathlib import Path

from .fusion import FusionFlags
from .harness.data import SyntheticDatasetConfig
from .harness.training import TrainConfig
from .losses import LossWeights
from .metrics import MFQConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data: SyntheticDatasetConfig = field(default_factory=SyntheticDatasetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


_NESTED = {"loss": LossWeights, "flags": FusionFlags, "mfq": MFQConfig}


def _scalar_fields(cls) -> dict[str, type]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls) if f.name not in _NESTED}


def _sections() -> dict[str, type]:
    return {"data": SyntheticDatasetConfig, "train": TrainConfig, **_NESTED}


def _parse_value(raw: str, kind, key: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if typing.get_origin(kind) is tuple:
            return tuple(s.strip() for s in raw.split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}") from None
    raise ConfigError(f"{key}: unsupported field type {kind}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(value)
    return repr(value) if isinstance(value, float) else str(value)


def parse_pairs(pairs: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    base = RunConfig() if base is None else base
    updates: dict[str, dict[str, object]] = {name: {} for name in _sections()}
    for key, raw in pairs.items():
        section, _, name = key.partition(".")
        cls = _sections().get(section)
        kinds = _scalar_fields(cls) if cls else {}
        if name not in kinds:
            raise ConfigError(f"unknown config key {key!r}")
        updates[section][name] = _parse_value(raw, kinds[name], key)
    train = base.train
    try:
        nested = {s: replace(getattr(train, s), **updates[s]) for s in _NESTED}
        train = replace(train, **updates["train"], **nested)
        data = replace(base.data, **updates["data"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(data, train)


def parse(text: str, base: RunConfig | None = None) -> RunConfig:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return parse_pairs(pairs, base)


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    pairs = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value
    return parse_pairs(pairs, cfg)


def serialize(cfg: RunConfig) -> str:
    lines = []
    for section, cls in _sections().items():
        obj = getattr(cfg.train, section) if section in _NESTED else getattr(cfg, section)
        for name in _scalar_fields(cls):
            lines.append(f"{section}.{name} = {_format_value(getattr(obj, name))}")
    return "\n".join(lines) + "\n"


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse(text)

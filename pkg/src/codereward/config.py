"""Resolved run configuration: defaults < key=value file < CODEREWARD_* env < flags.

The file format is one ``key = value`` per line; ``#`` starts a comment.
Unknown keys are rejected at every layer.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

ENV_PREFIX = "CODEREWARD_"
# env vars under the prefix that are not config keys
ENV_RESERVED = {"CODEREWARD_API_TOKEN"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Settings:
    # environment
    env: str = "DoorKey-8x8"
    tile_px: int = 16
    layout_seed: int = 7
    seed: int = 0
    # verification
    n_expert: int = 2
    n_random: int = 100
    p: float = 0.1
    p_units: str = "fraction"
    goal_recency_x: int = 5
    random_horizon: str = "expert"
    workers: int = 1
    fuel: int = 1_000_000
    # generation
    n: int = 3
    agent_description: str = "red triangle"
    max_attempts: int = 12
    simplify_after: int = 5
    backend: str = "oracle"
    endpoint: str = ""
    model: str = ""
    timeout: float = 120.0
    # training
    total_steps: int = 60_000
    alpha: float = 0.5
    gamma: float = 0.99
    eps_end: float = 0.05
    eval_every: int = 250
    seeds: int = 5
    # policy separation
    k: int = 20

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


FIELDS = {f.name: f for f in fields(Settings)}


def _coerce(key: str, raw: Any, source: str) -> Any:
    if key not in FIELDS:
        raise ConfigError(f"unknown config key {key!r} ({source})")
    typ = FIELDS[key].type
    if not isinstance(raw, str):
        return raw
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key} must be {typ}, got {raw!r} ({source})") from None
    return raw


def parse_file(path: str | Path) -> dict[str, Any]:
    try:
        text = Path(path).read_text("utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    out = {}
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value, f"{path}:{i}")
    return out


def parse_env(environ: Mapping[str, str]) -> dict[str, Any]:
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX) or name in ENV_RESERVED:
            continue
        key = name[len(ENV_PREFIX):].lower()
        out[key] = _coerce(key, value, f"env {name}")
    return out


def parse_overrides(pairs: list[str]) -> dict[str, Any]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, value = (s.strip() for s in pair.split("=", 1))
        out[key] = _coerce(key, value, "--set")
    return out


def resolve(file: str | Path | None = None, environ: Mapping[str, str] | None = None,
            flags: Mapping[str, Any] | None = None) -> Settings:
    values: dict[str, Any] = {}
    if file is not None:
        values.update(parse_file(file))
    values.update(parse_env(os.environ if environ is None else environ))
    for key, value in (flags or {}).items():
        if value is not None:
            values[key] = _coerce(key, value, "flag")
    return Settings(**values)


def echo(settings: Settings, out_dir: str | Path, command: str, args: Mapping[str, Any]) -> Path:
    """Write the fully resolved configuration next to a command's outputs."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    path = d / "config.json"
    plain = {k: (str(v) if isinstance(v, Path) else v) for k, v in args.items() if not callable(v)}
    doc = {"command": command, "args": plain,
           "settings": settings.to_dict()}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")
    return path

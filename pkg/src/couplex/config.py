"""TOML experiment configs: versioned schema, mandatory seeds, no entropy defaults."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any

import tomli

from .errors import ConfigError

SCHEMA_VERSION = 1


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc


def validate_config(cfg: dict, path="<config>") -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a table")
    schema = cfg.get("schema")
    if schema != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: missing or unsupported schema version {schema!r} "
            f"(this build reads schema = {SCHEMA_VERSION})"
        )
    return cfg


def resolve_seed(cfg: dict, override: int | None, path="<config>") -> int:
    if override is not None:
        return int(override)
    seed = cfg.get("seed")
    if seed is None:
        raise ConfigError(f"{path}: seed is mandatory (set seed = <int> or pass --seed)")
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"{path}: seed must be a nonnegative integer, got {seed!r}")
    return seed


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get("COUPLEX_THREADS")
    if env is None:
        return 1
    try:
        return max(1, int(env))
    except ValueError as exc:
        raise ConfigError(f"COUPLEX_THREADS must be an integer, got {env!r}") from exc


@dataclass(frozen=True)
class Params:
    """Typed view over a config's [params] table with clear error messages."""

    table: dict
    path: str = "<config>"

    def get(self, key: str, default: Any = None) -> Any:
        return self.table.get(key, default)

    def require(self, key: str) -> Any:
        if key not in self.table:
            raise ConfigError(f"{self.path}: params.{key} is required")
        return self.table[key]

    def number(self, key: str, default: float | None = None) -> float:
        value = self.require(key) if default is None else self.table.get(key, default)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{self.path}: params.{key} must be a number, got {value!r}")
        return float(value)

    def integer(self, key: str, default: int | None = None) -> int:
        value = self.require(key) if default is None else self.table.get(key, default)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{self.path}: params.{key} must be an integer, got {value!r}")
        return value

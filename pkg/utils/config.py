"""
Settings loader

Flow:
1. Defaults from config/config.toml (toml)
2. .env file and process environment, variables prefixed RADS_ (python-dotenv)
3. Explicit overrides (CLI flags)

Later layers win. Values are validated once, here.
"""

import os
import logging
from dataclasses import dataclass, asdict, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import toml
from dotenv import find_dotenv, load_dotenv

from utils.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "config.toml"
ENV_PREFIX = "RADS_"

PLAN_STRATEGIES = ("rads", "ranm", "rans")

# flat setting name -> (toml section, toml key)
SECTION_KEYS = {
    "rho": ("planner", "rho"),
    "mlst_search_limit": ("planner", "mlst_search_limit"),
    "plan_strategy": ("planner", "strategy"),
    "memory_budget": ("memory", "memory_budget"),
    "node_bytes": ("memory", "node_bytes"),
    "fallback_candidate_bytes": ("memory", "fallback_candidate_bytes"),
    "trie_slack_factor": ("memory", "trie_slack_factor"),
    "cache_budget": ("cache", "cache_budget"),
    "transport": ("transport", "kind"),
    "request_timeout_s": ("transport", "request_timeout_s"),
    "connect_retry_s": ("transport", "connect_retry_s"),
    "done_timeout_s": ("transport", "done_timeout_s"),
    "hosts_file": ("transport", "hosts_file"),
    "emit": ("run", "emit"),
    "seed": ("run", "seed"),
    "log_level": ("logging", "level"),
}


@dataclass(frozen=True)
class Settings:
    rho: float = 1.0
    mlst_search_limit: int = 200000
    plan_strategy: str = "rads"
    memory_budget: int = 0
    node_bytes: int = 24
    fallback_candidate_bytes: int = 64
    trie_slack_factor: float = 2.0
    cache_budget: int = 0
    transport: str = "loopback"
    request_timeout_s: float = 30.0
    connect_retry_s: float = 10.0
    done_timeout_s: float = 300.0
    hosts_file: str = ""
    emit: str = "count"
    seed: int = 7
    log_level: str = "WARNING"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _coerce(name: str, raw: Any) -> Any:
    target = {f.name: f.type for f in fields(Settings)}[name]
    try:
        if target in (int, "int"):
            return int(raw)
        if target in (float, "float"):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value for {name}: {raw!r}") from e


def _validate(settings: Settings) -> Settings:
    if settings.rho <= 0:
        raise ConfigError(f"rho must be positive, got {settings.rho}")
    for name in ("memory_budget", "cache_budget", "node_bytes", "fallback_candidate_bytes"):
        if getattr(settings, name) < 0:
            raise ConfigError(f"{name} must be >= 0")
    if settings.trie_slack_factor <= 0:
        raise ConfigError("trie_slack_factor must be positive")
    if settings.transport not in ("loopback", "tcp"):
        raise ConfigError(f"Unknown transport: {settings.transport}")
    if settings.emit not in ("count", "results"):
        raise ConfigError(f"Unknown emit mode: {settings.emit}")
    for name in ("request_timeout_s", "connect_retry_s", "done_timeout_s"):
        if getattr(settings, name) <= 0:
            raise ConfigError(f"{name} must be positive")
    if settings.plan_strategy not in PLAN_STRATEGIES:
        raise ConfigError(f"Unknown plan strategy: {settings.plan_strategy}")
    return settings


def _read_toml(path: Path) -> Dict[str, Any]:
    try:
        data = toml.load(str(path))
    except toml.TomlDecodeError as e:
        raise ConfigError(f"malformed config file {path}: {e}") from e

    values = {}
    for name, (section, key) in SECTION_KEYS.items():
        if key in data.get(section, {}):
            values[name] = data[section][key]
    for section, table in data.items():
        for key in table if isinstance(table, dict) else ():
            if (section, key) not in SECTION_KEYS.values():
                logger.warning(f"Ignoring unknown config key [{section}] {key}")
    return values


def load_settings(
    path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    use_env: bool = True,
    env_file: Optional[str] = None,
) -> Settings:
    values: Dict[str, Any] = {}

    config_path = Path(path) if path else DEFAULT_CONFIG_PATH
    if config_path.exists():
        values.update(_read_toml(config_path))
    elif path:
        raise ConfigError(f"config file not found: {path}")

    if use_env:
        # .env never overrides variables already set in the process
        load_dotenv(env_file or find_dotenv(usecwd=True))
        for name in SECTION_KEYS:
            env_value = os.getenv(ENV_PREFIX + name.upper())
            if env_value is not None and env_value != "":
                values[name] = env_value

    for name, value in (overrides or {}).items():
        if value is None:
            continue
        if name not in SECTION_KEYS:
            raise ConfigError(f"Unknown setting: {name}")
        values[name] = value

    coerced = {name: _coerce(name, value) for name, value in values.items()}
    return _validate(Settings(**coerced))

# -*- coding: utf-8 -*-
"""
momask-desk Configuration
"""
import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError
from pydantic_settings import BaseSettings

from momask.errors import ConfigError
from momask.models.run import RunConfig

logger = logging.getLogger(__name__)

LOG_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class Settings(BaseSettings):
    """Process-level settings read from the environment (MOMASK_*) or .env"""

    LOG: str = "info"

    # Defaults for flags not given on the command line
    SEED: int = 0
    JOBS: int = 1

    # Position units -> millimetres for MPJPE
    POSITION_UNIT_MM: float = 1.0

    # Paths
    OUT_DIR: Path = Path("runs")

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        env_prefix = "MOMASK_"

    @property
    def log_level(self) -> int:
        return LOG_LEVELS.get(self.LOG.lower(), logging.INFO)


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()


def _drop_none(values: Dict[str, Any]) -> Dict[str, Any]:
    """Remove unset (None) entries, recursing into nested dicts"""
    out = {}
    for key, value in values.items():
        if isinstance(value, dict):
            value = _drop_none(value)
            if not value:
                continue
        if value is not None:
            out[key] = value
    return out


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; override values win"""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Load and validate a run config.

    Args:
        path: JSON config file; None means all defaults
        overrides: nested dict of command-line values that win over the file

    Raises:
        ConfigError: unreadable file, bad JSON, unknown keys or out-of-range values
    """
    raw: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must hold a JSON object")

    merged = _merge(raw, _drop_none(overrides or {}))
    try:
        config = RunConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {e}", details={"errors": e.errors()})

    logger.debug(f"Run config loaded from {path or 'defaults'}")
    return config

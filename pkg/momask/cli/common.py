# -*- coding: utf-8 -*-
"""
Flags shared by every subcommand and the config/out-dir resolution they imply
"""
import argparse
from pathlib import Path
from typing import Any, Dict, Optional

from momask.config import get_settings, load_run_config
from momask.errors import ConfigError
from momask.models import RunConfig


def shared_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", metavar="PATH", help="JSON run config")
    parser.add_argument("--seed", type=int, help="run seed (overrides the config)")
    parser.add_argument("--jobs", type=int, help="parallel workers for per-clip work")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    return parser


def build_config(args: argparse.Namespace, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """File values, then settings defaults for unset seed/jobs, then flags"""
    merged: Dict[str, Any] = {"seed": args.seed, "jobs": args.jobs}
    merged.update(overrides or {})
    config = load_run_config(args.config, merged)
    settings = get_settings()
    updates = {}
    if args.seed is None and args.config is None:
        updates["seed"] = settings.SEED
        updates["decode"] = config.decode.model_copy(update={"seed": settings.SEED})
    if args.jobs is None and args.config is None:
        updates["jobs"] = max(1, settings.JOBS)
    return config.model_copy(update=updates) if updates else config


def out_dir(args: argparse.Namespace, config: RunConfig, command: str) -> Path:
    if args.out:
        return Path(args.out)
    if config.paths.out:
        return Path(config.paths.out) / command
    return Path(get_settings().OUT_DIR) / command


def require_path(value: Optional[str], fallback: Optional[str], flag: str) -> Path:
    chosen = value or fallback
    if not chosen:
        raise ConfigError(f"{flag} is required (or set it under paths in the config)")
    return Path(chosen)

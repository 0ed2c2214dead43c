# -*- coding: utf-8 -*-
"""
eval: metric report and jerk CSVs for matched prediction / ground-truth clips
"""
import argparse
from typing import List

from momask.errors import ConfigError
from momask.models import RunManifest
from momask.services import get_pipeline_service

from .common import build_config, out_dir, require_path


def _sigmas(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad --noise-sigmas {text!r}; expected comma-separated numbers")


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("eval", parents=parents, help="evaluate predictions against ground truth")
    parser.add_argument("--pred", metavar="DIR", help="predicted clips")
    parser.add_argument("--gt", metavar="DIR", help="ground-truth clips with the same names")
    parser.add_argument("--pool-size", type=int, default=32, help="retrieval pool size")
    parser.add_argument("--repeats", type=int, default=1, help="repeat seeded metrics and report 95%% intervals")
    parser.add_argument("--joint", type=int, help="joint for jerk CSVs (default: mean over joints)")
    parser.add_argument("--tokens", metavar="DIR", help="token files for codebook perplexity")
    parser.add_argument("--noise-sigmas", default="", help="frame-noise sweep on ground truth, e.g. 0.001,0.01")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> RunManifest:
    config = build_config(args)
    pred = require_path(args.pred, None, "--pred")
    gt = require_path(args.gt, config.paths.motions, "--gt")
    return get_pipeline_service().evaluate(
        config,
        pred,
        gt,
        out_dir(args, config, "eval"),
        pool_size=args.pool_size,
        repeats=args.repeats,
        joint=args.joint,
        tokens_dir=args.tokens,
        noise_sigmas=_sigmas(args.noise_sigmas),
    )

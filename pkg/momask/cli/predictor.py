# -*- coding: utf-8 -*-
"""
train-predictor: fit count predictors on tokenize outputs
"""
import argparse

from momask.models import RunManifest
from momask.services import get_pipeline_service

from .common import build_config, out_dir, require_path


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("train-predictor", parents=parents, help="train base and residual predictors")
    parser.add_argument("--tokenizer", metavar="DIR", help="tokenize output directory")
    parser.add_argument("--alpha", type=float, help="Laplace smoothing")
    parser.add_argument("--uncond-drop", type=float, help="probability of also counting a row as unconditional")
    parser.add_argument("--mask-samples", type=int, help="masked training views per row (base layer)")
    parser.add_argument("--rremask", type=float, help="replace ratio for residual-layer inputs")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> RunManifest:
    config = build_config(args, {
        "predictor": {
            "alpha": args.alpha,
            "uncond_drop": args.uncond_drop,
            "mask_samples": args.mask_samples,
            "rremask": {"replace_ratio": args.rremask},
        },
    })
    tokenizer = require_path(args.tokenizer, config.paths.tokens, "--tokenizer")
    return get_pipeline_service().train_predictor(config, tokenizer, out_dir(args, config, "train-predictor"))

# -*- coding: utf-8 -*-
"""
tokenize: train the residual codebook stack and tokenize a motion directory
"""
import argparse

from momask.models import RunManifest
from momask.services import get_pipeline_service

from .common import build_config, out_dir, require_path


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("tokenize", parents=parents, help="train RVQ codebooks and tokenize clips")
    parser.add_argument("--motions", metavar="DIR", help="directory of .mot/.csv clips (+ optional labels.json)")
    parser.add_argument("--layers", type=int, help="V: residual layers on top of the base layer")
    parser.add_argument("--codebook-size", type=int, help="N: codes per layer")
    parser.add_argument("--dropout", type=float, help="q: quantization dropout ratio")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--stride", type=int, help="frames per latent step")
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--mirror", action="store_true", default=None, help="add mirrored twins of every clip")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> RunManifest:
    config = build_config(args, {
        "rvq": {
            "num_residual_layers": args.layers,
            "codebook_size": args.codebook_size,
            "dropout_ratio": args.dropout,
        },
        "epochs": args.epochs,
        "stride": args.stride,
        "batch_size": args.batch_size,
        "augment_mirror": args.mirror,
    })
    motions = require_path(args.motions, config.paths.motions, "--motions")
    return get_pipeline_service().tokenize(config, motions, out_dir(args, config, "tokenize"))

# -*- coding: utf-8 -*-
"""
generate: decode a token grid (optionally inpainting an input) and write the motion
"""
import argparse

from momask.models import MaskSchedule, RunManifest, SamplingMode
from momask.services import get_pipeline_service

from .common import build_config, out_dir, require_path


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("generate", parents=parents, help="generate or inpaint a motion")
    parser.add_argument("--tokenizer", metavar="DIR", help="tokenize output directory (codebooks.json)")
    parser.add_argument("--predictor", metavar="PATH", help="predictor.json from train-predictor")
    parser.add_argument("--cond", metavar="LABEL", help="condition label; omit for unconditional")
    parser.add_argument("--length", type=int, help="token positions to generate")
    parser.add_argument("--iters", type=int, help="L: decoding iterations")
    parser.add_argument("--cfg", type=float, help="s: guidance scale for the base layer")
    parser.add_argument("--residual-cfg", type=float, help="guidance scale for residual layers")
    parser.add_argument("--temperature", type=float, help="Gumbel temperature on confidences")
    parser.add_argument("--schedule", choices=[s.value for s in MaskSchedule])
    parser.add_argument("--sampling", choices=[s.value for s in SamplingMode])
    parser.add_argument("--sample-residual", action="store_true", default=None, help="sample residual tokens")
    parser.add_argument("--inpaint", metavar="REGIONS", help="token regions to regenerate, e.g. 2:5,9:12")
    parser.add_argument("--input", metavar="PATH", help="token file the inpainting starts from")
    parser.add_argument("--base-only", action="store_true", help="stop after the base layer")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> RunManifest:
    config = build_config(args, {
        "decode": {
            "iterations": args.iters,
            "cfg_scale": args.cfg,
            "residual_cfg_scale": args.residual_cfg,
            "temperature": args.temperature,
            "schedule": args.schedule,
            "sampling": args.sampling,
            "residual_sampling": args.sample_residual,
            "seed": args.seed,
        },
    })
    tokenizer = require_path(args.tokenizer, config.paths.tokens, "--tokenizer")
    predictor = require_path(args.predictor, None, "--predictor")
    return get_pipeline_service().generate(
        config,
        tokenizer,
        predictor,
        out_dir(args, config, "generate"),
        condition=args.cond,
        length=args.length,
        regions=args.inpaint,
        input_tokens=args.input,
        base_only=args.base_only,
    )

# -*- coding: utf-8 -*-
"""
plot: render jerk CSVs from eval as SVG line plots
"""
import argparse

from momask.models import RunManifest
from momask.services import get_pipeline_service

from .common import build_config, out_dir, require_path


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("plot", parents=parents, help="render jerk CSVs to SVG")
    parser.add_argument("--csv", metavar="DIR", help="directory of jerk CSVs (eval's jerk/)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> RunManifest:
    config = build_config(args)
    csv_dir = require_path(args.csv, None, "--csv")
    return get_pipeline_service().plot(config, csv_dir, out_dir(args, config, "plot"))

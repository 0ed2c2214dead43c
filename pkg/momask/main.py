# -*- coding: utf-8 -*-
"""
momask-desk - command line front end
"""
import argparse
import logging
import sys
from typing import List, Optional

from momask import __version__
from momask.cli import COMMANDS, shared_parser
from momask.config import get_settings
from momask.errors import MomaskError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momask",
        description="Residual-token motion generation: tokenize, train-predictor, generate, eval, plot",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    parents = [shared_parser()]
    for command in COMMANDS:
        command.register(subparsers, parents)
    return parser


def configure_logging() -> None:
    """Root logging from MOMASK_LOG (error | info | debug)"""
    logging.basicConfig(
        level=get_settings().log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    logging.getLogger().setLevel(get_settings().log_level)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code"""
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        manifest = args.handler(args)
    except MomaskError as e:
        logger.error(e.message)
        return e.exit_code
    logger.info(f"{manifest.command} finished with {len(manifest.outputs)} outputs")
    return 0


if __name__ == "__main__":
    sys.exit(main())

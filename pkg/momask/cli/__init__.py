# momask Command Line
from . import evaluation, generation, plots, predictor, tokenizer
from .common import shared_parser

COMMANDS = [tokenizer, predictor, generation, evaluation, plots]

__all__ = ["COMMANDS", "shared_parser"]

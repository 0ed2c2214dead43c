#!/usr/bin/env python3
"""
momask-desk Entry Point

Run a pipeline stage with:
    python run.py tokenize --motions data/clips --out runs/tok
    python run.py train-predictor --tokenizer runs/tok --out runs/pred
    python run.py generate --tokenizer runs/tok --predictor runs/pred/predictor.json --length 16
    python run.py eval --pred runs/gen/motions --gt data/clips
    python run.py plot --csv runs/eval/jerk
"""
import os
import sys

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from momask.main import main  # noqa: E402


if __name__ == "__main__":
    sys.exit(main())

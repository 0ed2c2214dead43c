# momask-desk
"""
momask-desk - residual-quantized motion tokenizer, masked token generation
and motion-quality metrics at desk scale.

Usage:
    python run.py tokenize --config run.json --motions data/clips
    python -m momask.main eval --pred out/motions --gt data/clips
"""

__version__ = "1.0.0"

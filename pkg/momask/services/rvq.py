# -*- coding: utf-8 -*-
"""
Residual Vector Quantization Service - nearest-code lookup, the residual
recursion over V+1 codebooks, k-means initialization, EMA codebook training
with dead-code reset, and quantization dropout.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from momask.errors import DataError, ModelError
from momask.models import Codebook, CodebookStack, EncodeTrace, LatentSequence, RvqConfig, TokenGrid
from momask.services.kmeans import assign, kmeans

logger = logging.getLogger(__name__)

EMA_EPS = 1e-8


# ==================== Quantization ====================

def nearest_code(cb: Codebook, v: np.ndarray) -> Tuple[int, np.ndarray]:
    """Argmin squared distance over the codebook; ties go to the lowest index"""
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if cb.size < 1:
        raise ValueError("empty codebook")
    if v.shape != (cb.dim,):
        raise DataError(f"vector dim {v.shape} does not match codebook dim {cb.dim}")
    index = int(assign(v[None, :], cb.entries)[0])
    return index, cb.entries[index].copy()


def encode_vectors(stack: CodebookStack, x: np.ndarray, active_layers: int) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Residual recursion over a (M, d) matrix.

    Returns:
        tokens: (active_layers, M) indices
        residuals: [r^0 .. r^active] each (M, d); r^0 is the input
    """
    if not 1 <= active_layers <= stack.num_layers:
        raise ValueError(f"active_layers must be in 1..{stack.num_layers}, got {active_layers}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != stack.dim:
        raise DataError(f"latent dim {x.shape[-1]} does not match code dim {stack.dim}")

    residual = x
    residuals = [residual]
    tokens = np.empty((active_layers, x.shape[0]), dtype=np.int64)
    for v in range(active_layers):
        entries = stack.layers[v].entries
        tokens[v] = assign(residual, entries)
        residual = residual - entries[tokens[v]]
        residuals.append(residual)
    return tokens, residuals


def rvq_encode(stack: CodebookStack, lat: LatentSequence, active_layers: Optional[int] = None) -> EncodeTrace:
    """Tokenize a latent sequence with the first `active_layers` codebooks"""
    active_layers = stack.num_layers if active_layers is None else active_layers
    tokens, residuals = encode_vectors(stack, lat.codes, active_layers)
    return EncodeTrace(tokens=TokenGrid(tokens), residuals=residuals)


def decode_vectors(stack: CodebookStack, indices: np.ndarray, up_to_layer: Optional[int] = None) -> np.ndarray:
    """Sum of the selected codes over layers 0..up_to_layer-1"""
    indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    up_to_layer = indices.shape[0] if up_to_layer is None else up_to_layer
    if not 1 <= up_to_layer <= indices.shape[0]:
        raise ValueError(f"up_to_layer must be in 1..{indices.shape[0]}, got {up_to_layer}")
    if up_to_layer > stack.num_layers:
        raise ModelError(f"grid needs {up_to_layer} layers, stack has {stack.num_layers}")

    check_token_range(stack, indices[:up_to_layer])
    out = np.zeros((indices.shape[1], stack.dim))
    for v in range(up_to_layer):
        out += stack.layers[v].entries[indices[v]]
    return out


def check_token_range(stack: CodebookStack, indices: np.ndarray) -> None:
    """Every row v must index into layer v's codebook"""
    indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    if indices.shape[0] > stack.num_layers:
        raise ModelError(f"grid has {indices.shape[0]} layers, stack has {stack.num_layers}")
    for v, row in enumerate(indices):
        size = stack.layers[v].size
        bad = row[(row < 0) | (row >= size)]
        if bad.size:
            raise DataError(f"token {bad[0]} out of range for layer {v} (N={size})")


def rvq_decode(stack: CodebookStack, grid: TokenGrid, up_to_layer: Optional[int] = None, stride: int = 1) -> LatentSequence:
    """Reconstruct latents from a token grid"""
    return LatentSequence(codes=decode_vectors(stack, grid.indices, up_to_layer), stride=stride)


def rvq_quantize(stack: CodebookStack, lat: LatentSequence) -> Tuple[LatentSequence, float]:
    """Encode with every layer and reconstruct; returns (reconstruction, MSE)"""
    trace = rvq_encode(stack, lat)
    recon = rvq_decode(stack, trace.tokens, stride=lat.stride)
    return recon, float(np.mean((recon.codes - lat.codes) ** 2))


def layer_mse_curve(stack: CodebookStack, lat: LatentSequence) -> np.ndarray:
    """Reconstruction MSE using layers 0..k-1, for k = 1..V+1 (read off the encode trace)"""
    trace = rvq_encode(stack, lat)
    return np.array([np.mean(r ** 2) for r in trace.residuals[1:]])


def commitment_diagnostic(trace: EncodeTrace, beta: float) -> float:
    """beta * mean squared norm of the final residual (reported only)"""
    return float(beta * np.mean(np.sum(trace.final_residual ** 2, axis=1)))


# ==================== Initialization ====================

def init_codebooks(data: np.ndarray, cfg: RvqConfig, seed: int) -> CodebookStack:
    """
    k-means initialization, layer by layer.

    Layer 0 clusters the data; layer v > 0 clusters what layers < v leave behind
    and always carries the zero vector pinned at entry 0.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise DataError("cannot initialize codebooks from empty data")
    if data.shape[1] != cfg.code_dim:
        raise DataError(f"data dim {data.shape[1]} does not match code_dim {cfg.code_dim}")

    rng = np.random.default_rng(seed)
    layers: List[Codebook] = []
    residual = data
    for v in range(cfg.num_layers):
        if v == 0:
            entries = kmeans(residual, cfg.codebook_size, rng, cfg.kmeans_iters)
            cb = Codebook(entries=entries)
        else:
            entries = np.zeros((cfg.codebook_size, cfg.code_dim))
            if cfg.codebook_size > 1:
                entries[1:] = kmeans(residual, cfg.codebook_size - 1, rng, cfg.kmeans_iters)
            cb = Codebook(entries=entries, pinned_zero=True)
        layers.append(cb)
        residual = residual - cb.entries[assign(residual, cb.entries)]
        logger.debug(f"Initialized layer {v}: residual MSE {np.mean(residual ** 2):.6g}")
    return CodebookStack(layers=layers, config=cfg)


# ==================== Training ====================

def sample_active_layers(q: float, num_residual: int, rng: np.random.Generator, size: Optional[int] = None):
    """
    Quantization dropout: with probability 1-q keep all V+1 layers, otherwise
    truncate to a uniform prefix length in {1..V+1}.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"dropout ratio must be in [0, 1], got {q}")
    full = num_residual + 1
    gate = rng.random(size)
    prefix = rng.integers(1, full + 1, size=size)
    out = np.where(gate < q, prefix, full)
    return int(out) if size is None else out


def ema_update(
    cb: Codebook,
    indices: np.ndarray,
    vectors: np.ndarray,
    decay: float,
    dead_code_threshold: float,
    rng: np.random.Generator,
) -> int:
    """
    One EMA step on a codebook (mutates `cb`).

    counts <- decay*counts + (1-decay)*n_k, sums <- decay*sums + (1-decay)*sum_k,
    entry_k <- sums_k / max(counts_k, 1e-8). Codes whose count falls under the
    threshold are reset to a random assigned vector. A pinned zero entry never moves.

    Returns:
        number of codes reset
    """
    if not 0.0 < decay < 1.0:
        raise ValueError(f"decay must be in (0, 1), got {decay}")
    indices = np.asarray(indices, dtype=np.int64)
    vectors = np.asarray(vectors, dtype=np.float64).reshape(len(indices), cb.dim)

    n_k = np.bincount(indices, minlength=cb.size).astype(np.float64)
    s_k = np.zeros_like(cb.ema_sums)
    np.add.at(s_k, indices, vectors)

    cb.ema_counts = decay * cb.ema_counts + (1.0 - decay) * n_k
    cb.ema_sums = decay * cb.ema_sums + (1.0 - decay) * s_k
    cb.entries = cb.ema_sums / np.maximum(cb.ema_counts, EMA_EPS)[:, None]

    if cb.pinned_zero:
        cb.entries[0] = 0.0
        cb.ema_sums[0] = 0.0

    dead = cb.ema_counts < dead_code_threshold
    if cb.pinned_zero:
        dead[0] = False
    reset = int(dead.sum())
    if reset and len(vectors):
        picks = vectors[rng.integers(len(vectors), size=reset)]
        cb.entries[dead] = picks
        cb.ema_counts[dead] = 1.0
        cb.ema_sums[dead] = picks
        logger.debug(f"Reset {reset} dead codes")
    elif reset:
        reset = 0
    return reset


def codebook_perplexity(histogram: Sequence[float]) -> float:
    """exp(entropy) of code usage; 0 ln 0 := 0"""
    counts = np.asarray(histogram, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("histogram must hold at least one count")
    p = counts[counts > 0] / total
    return float(np.exp(-np.sum(p * np.log(p))))


def train_rvq(
    dataset: List[LatentSequence],
    cfg: RvqConfig,
    epochs: int,
    seed: int,
    batch_size: int = 512,
) -> Tuple[CodebookStack, List[float]]:
    """
    Initialize with k-means, then refine every layer with EMA updates.

    Per mini-batch: draw an active prefix length per vector (quantization dropout),
    encode, and update layer v with the residual inputs of vectors whose prefix
    reaches v. Dropout, shuffling and resets use separate seeded streams.

    Returns:
        trained stack and the all-layer reconstruction MSE after each epoch
    """
    if not dataset:
        raise DataError("cannot train on an empty dataset")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    data = np.vstack([lat.codes for lat in dataset])

    init_seq, shuffle_seq, dropout_seq, reset_seq = np.random.SeedSequence(seed).spawn(4)
    stack = init_codebooks(data, cfg, int(init_seq.generate_state(1)[0]))
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    reset_rng = np.random.default_rng(reset_seq)

    mse_log: List[float] = []
    for epoch in range(epochs):
        order = shuffle_rng.permutation(len(data))
        resets = 0
        for start in range(0, len(data), batch_size):
            batch = data[order[start:start + batch_size]]
            active = sample_active_layers(cfg.dropout_ratio, cfg.num_residual_layers, dropout_rng, size=len(batch))
            tokens, residuals = encode_vectors(stack, batch, stack.num_layers)
            for v, cb in enumerate(stack.layers):
                keep = active > v
                if not np.any(keep):
                    continue
                resets += ema_update(
                    cb, tokens[v][keep], residuals[v][keep],
                    cfg.ema_decay, cfg.dead_code_threshold, reset_rng,
                )

        tokens, residuals = encode_vectors(stack, data, stack.num_layers)
        mse = float(np.mean(residuals[-1] ** 2))
        mse_log.append(mse)
        perplexities = [
            codebook_perplexity(np.bincount(tokens[v], minlength=stack.layers[v].size))
            for v in range(stack.num_layers)
        ]
        logger.info(f"Epoch {epoch + 1}/{epochs}: MSE {mse:.6g}, resets {resets}")
        logger.debug(f"Epoch {epoch + 1} perplexity per layer: {[round(p, 2) for p in perplexities]}")

    return stack, mse_log


# ==================== Serialization ====================

def stack_to_dict(stack: CodebookStack, meta: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """JSON-ready stack; floats keep their shortest round-trip repr"""
    return {
        "config": stack.config.model_dump(),
        "meta": meta or {},
        "layers": [
            {
                "entries": cb.entries.tolist(),
                "ema_counts": cb.ema_counts.tolist(),
                "ema_sums": cb.ema_sums.tolist(),
                "pinned_zero": cb.pinned_zero,
            }
            for cb in stack.layers
        ],
    }


def stack_from_dict(raw: Dict[str, Any]) -> Tuple[CodebookStack, Dict[str, Any]]:
    try:
        cfg = RvqConfig.model_validate(raw["config"])
        layers = [
            Codebook(
                entries=np.asarray(layer["entries"], dtype=np.float64),
                ema_counts=np.asarray(layer["ema_counts"], dtype=np.float64),
                ema_sums=np.asarray(layer["ema_sums"], dtype=np.float64),
                pinned_zero=bool(layer.get("pinned_zero", False)),
            )
            for layer in raw["layers"]
        ]
        return CodebookStack(layers=layers, config=cfg), raw.get("meta", {})
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"invalid codebook stack: {e}")


def save_stack(stack: CodebookStack, path, meta: Optional[Dict[str, Any]] = None) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(stack_to_dict(stack, meta), f)


def load_stack(path) -> Tuple[CodebookStack, Dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise ModelError(f"codebook stack not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ModelError(f"cannot read codebook stack {path}: {e}")
    if not isinstance(raw, dict):
        raise ModelError(f"invalid codebook stack {path}: expected a JSON object")
    return stack_from_dict(raw)

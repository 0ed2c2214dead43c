# -*- coding: utf-8 -*-
"""
Residual Generation Service - per-layer prediction of residual tokens from
the partial reconstruction of the layers below, and replace-and-remask
corruption for training.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from momask.errors import DataError, ModelError
from momask.models import (
    CodebookStack, ConditionRef, RRemaskConfig, ResidualContext, SamplingMode, TokenGrid,
)
from momask.services.kmeans import assign
from momask.services.masked_gen import choose_tokens, guided_logits
from momask.services.predictor import CountModel, PredictorContract, softmax
from momask.services.rvq import decode_vectors

logger = logging.getLogger(__name__)


def residual_context(stack: CodebookStack, rows: np.ndarray, layer: int) -> ResidualContext:
    """
    Context for predicting layer `layer`: the exact sum of codes from layers
    below it, discretized to the nearest base-layer code.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
    if not 1 <= layer <= stack.num_layers - 1:
        raise ValueError(f"residual layer must be in 1..{stack.num_layers - 1}, got {layer}")
    if rows.shape[0] < layer:
        raise DataError(f"context for layer {layer} needs {layer} rows, got {rows.shape[0]}")

    vectors = decode_vectors(stack, rows[:layer])
    ids = assign(vectors, stack.layers[0].entries)
    return ResidualContext(vectors=vectors, ids=ids, layer=layer)


def rremask_corrupt(row: np.ndarray, ratio: float, vocab_size: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Replace a random floor(ratio * n) subset of tokens with different random indices.

    Returns:
        corrupted row and the sorted replaced positions
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"replace ratio must be in [0, 1], got {ratio}")
    row = np.asarray(row, dtype=np.int64)
    corrupted = row.copy()
    count = int(np.floor(ratio * len(row)))
    if count == 0:
        return corrupted, np.empty(0, dtype=np.int64)

    positions = np.sort(rng.choice(len(row), size=count, replace=False))
    if vocab_size > 1:
        # uniform over the other N-1 indices
        corrupted[positions] = (row[positions] + rng.integers(1, vocab_size, size=count)) % vocab_size
    else:
        corrupted[positions] = 0
    return corrupted, positions


def train_residual_layer(
    stack: CodebookStack,
    corpus: Sequence[Tuple[TokenGrid, ConditionRef]],
    layer: int,
    rremask: RRemaskConfig,
    alpha: float,
    uncond_drop: float,
    seed: int,
) -> CountModel:
    """
    Count model for one residual layer.

    Rows below `layer` are corrupted by replace-and-remask before the context is
    computed; every position's true layer token is a target, replaced ones included.
    """
    if layer == 0:
        raise ValueError("layer 0 is the base layer; train it with the masked predictor")
    if not 1 <= layer <= stack.num_layers - 1:
        raise ValueError(f"residual layer must be in 1..{stack.num_layers - 1}, got {layer}")
    if not corpus:
        raise DataError("cannot train a residual predictor on an empty corpus")

    rng = np.random.default_rng([seed, layer])
    model = CountModel(alpha, stack.layers[layer].size, "residual")
    replaced_total = 0
    for grid, cond in corpus:
        if grid.num_layers <= layer:
            raise DataError(f"token grid has {grid.num_layers} layers, need {layer + 1}")
        inputs = grid.indices[:layer].copy()
        for v in range(layer):
            inputs[v], replaced = rremask_corrupt(inputs[v], rremask.replace_ratio, stack.layers[v].size, rng)
            replaced_total += len(replaced)
        ctx = residual_context(stack, inputs, layer)
        contexts = [(int(c),) for c in ctx.ids]
        target = grid.indices[layer]
        also_null = rng.random() < uncond_drop
        model.count(contexts, target, cond.key, layer)
        if also_null and not cond.is_null:
            model.count(contexts, target, None, layer)
    logger.info(f"Trained residual layer {layer}: {len(corpus)} grids, {replaced_total} replaced inputs")
    return model


def train_residual(
    stack: CodebookStack,
    corpus: Sequence[Tuple[TokenGrid, ConditionRef]],
    rremask: RRemaskConfig,
    alpha: float,
    uncond_drop: float,
    seed: int,
) -> Dict[int, CountModel]:
    """One count model per residual layer 1..V"""
    return {
        j: train_residual_layer(stack, corpus, j, rremask, alpha, uncond_drop, seed)
        for j in range(1, stack.num_layers)
    }


def progressive_decode(
    res_models: Dict[int, PredictorContract],
    stack: CodebookStack,
    base_row: np.ndarray,
    condition: ConditionRef,
    cfg_scale: float,
    rng: Optional[np.random.Generator] = None,
    sample: bool = False,
    num_layers: Optional[int] = None,
) -> Tuple[TokenGrid, int]:
    """
    Predict residual rows 1..V one pass per layer from the rows below.

    Returns:
        full token grid and the number of predictor passes (V)
    """
    base_row = np.asarray(base_row, dtype=np.int64)
    if np.any(base_row < 0):
        raise DataError("base row must be fully committed")
    num_layers = stack.num_layers if num_layers is None else num_layers
    rows: List[np.ndarray] = [base_row]
    passes = 0
    rng = rng or np.random.default_rng(0)

    for j in range(1, num_layers):
        model = res_models.get(j)
        if model is None:
            raise ModelError(f"no residual model for layer {j}")
        ctx = residual_context(stack, np.stack(rows), j)
        logits = guided_logits(model, ctx.ids, condition, j, cfg_scale)
        passes += 1
        if sample:
            row = choose_tokens(softmax(logits), SamplingMode.CATEGORICAL, rng)
        else:
            row = np.argmax(logits, axis=1)
        rows.append(row.astype(np.int64))
        logger.debug(f"Residual layer {j} decoded")

    return TokenGrid(np.stack(rows)), passes

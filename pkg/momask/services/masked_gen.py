# -*- coding: utf-8 -*-
"""
Masked Generation Service - base-layer token generation by confidence-ranked
iterative unmasking, classifier-free guidance, and temporal inpainting.
"""
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from momask.errors import DataError, ModelError
from momask.models import (
    MASK, NULL_CONDITION, ConditionRef, DecodeConfig, DecodeState, DecodeTrace,
    MaskSchedule, PredictorSettings, SamplingMode,
)
from momask.services.predictor import CountModel, PredictorContract, softmax, train_count_predictor

logger = logging.getLogger(__name__)

_LOG_FLOOR = np.finfo(np.float64).tiny


# ==================== Schedule ====================

def mask_ratio(tau: float, schedule: MaskSchedule = MaskSchedule.COSINE) -> float:
    """Fraction of positions still masked at progress tau"""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    if schedule == MaskSchedule.LINEAR:
        return 1.0 - tau
    return math.cos(math.pi * tau / 2)


def masked_count(n_free: int, iteration: int, iterations: int, schedule: MaskSchedule = MaskSchedule.COSINE) -> int:
    """Positions left masked after `iteration` of `iterations`; 0 after the last one"""
    if iteration >= iterations:
        return 0
    return int(math.ceil(n_free * mask_ratio(iteration / iterations, schedule)))


def sample_training_mask(n: int, rng: np.random.Generator, schedule: MaskSchedule = MaskSchedule.COSINE) -> np.ndarray:
    """Uniform random subset of size max(1, round(n * mask_ratio(tau))), tau ~ U(0, 1)"""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    tau = rng.random()
    size = min(n, max(1, int(math.floor(n * mask_ratio(tau, schedule) + 0.5))))
    return np.sort(rng.choice(n, size=size, replace=False))


# ==================== Guidance ====================

def cfg_logits(cond: np.ndarray, uncond: np.ndarray, scale: float) -> np.ndarray:
    """(1 + s) * cond - s * uncond"""
    cond = np.asarray(cond, dtype=np.float64)
    uncond = np.asarray(uncond, dtype=np.float64)
    if cond.shape != uncond.shape:
        raise ValueError(f"logit shapes differ: {cond.shape} vs {uncond.shape}")
    if scale == 0:
        return cond.copy()
    return (1.0 + scale) * cond - scale * uncond


def guided_logits(
    pred: PredictorContract,
    partial: np.ndarray,
    condition: ConditionRef,
    layer: int,
    scale: float,
) -> np.ndarray:
    """Conditional logits, CFG-combined with the NULL branch when it matters"""
    logits = pred.predict_logits(partial, condition, layer)
    if scale == 0 or condition.is_null:
        return logits
    uncond = pred.predict_logits(partial, NULL_CONDITION, layer)
    return cfg_logits(logits, uncond, scale)


def choose_tokens(probs: np.ndarray, mode: SamplingMode, rng: np.random.Generator) -> np.ndarray:
    """One token per row: categorical draw or argmax (one uniform drawn per row either way)"""
    u = rng.random(probs.shape[0])
    if mode == SamplingMode.GREEDY:
        return np.argmax(probs, axis=1)
    cdf = np.cumsum(probs, axis=1)
    picks = (cdf < (u * cdf[:, -1])[:, None]).sum(axis=1)
    return np.minimum(picks, probs.shape[1] - 1)


# ==================== Decoding ====================

def iterative_decode(
    pred: PredictorContract,
    n: int,
    condition: ConditionRef,
    cfg: DecodeConfig,
    pinned: Optional[Dict[int, int]] = None,
    layer: int = 0,
    trace: Optional[DecodeTrace] = None,
) -> np.ndarray:
    """
    Generate a base-layer token row.

    Starts with every non-pinned position masked. Each of the L iterations
    predicts all positions, samples a token per masked position, scores it by
    log-probability plus annealed Gumbel noise, and commits the best positions so
    that exactly ceil(n_free * gamma(l / L)) stay masked (none after the last).

    Args:
        pred: predictor contract
        n: row length
        condition: label/vector condition, or NULL
        cfg: iterations, guidance scale, temperature, seed, schedule, sampling
        pinned: position -> token held fixed (committed from the start)
        layer: layer id passed to the predictor
        trace: optional DecodeTrace filled with masked counts, passes and snapshots

    Returns:
        fully committed token row
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    pinned = {int(p): int(t) for p, t in (pinned or {}).items()}
    for pos, tok in pinned.items():
        if not 0 <= pos < n:
            raise DataError(f"pinned position {pos} outside [0, {n})")
        if tok < 0:
            raise DataError(f"pinned token {tok} at position {pos} is not a valid index")

    trace = trace if trace is not None else DecodeTrace()
    rng = np.random.default_rng(cfg.seed)
    state = DecodeState.start(n, pinned)
    n_free = n - len(pinned)
    if n_free == 0:
        return state.tokens.copy()

    iterations = cfg.iterations
    for l in range(1, iterations + 1):
        logits = guided_logits(pred, state.tokens.copy(), condition, layer, cfg.cfg_scale)
        if logits.ndim != 2 or logits.shape[0] != n:
            raise ModelError(f"predictor returned shape {logits.shape}, expected ({n}, N)")
        trace.passes += 1

        probs = softmax(logits)
        sampled = choose_tokens(probs, cfg.sampling, rng)
        gumbel = rng.gumbel(size=n)
        temperature = cfg.temperature * (1.0 - l / iterations)
        confidence = np.log(np.maximum(probs[np.arange(n), sampled], _LOG_FLOOR)) + temperature * gumbel
        confidence[state.committed] = np.inf

        remaining = masked_count(n_free, l, iterations, cfg.schedule)
        open_positions = np.flatnonzero(~state.committed)
        ranked = open_positions[np.lexsort((open_positions, -confidence[open_positions]))]
        commit = ranked[:len(open_positions) - remaining]
        state.tokens[commit] = sampled[commit]
        state.committed[commit] = True
        state.confidence = confidence
        state.iteration = l

        trace.masked_counts.append(int(np.count_nonzero(~state.committed)))
        trace.snapshots.append(state.tokens.copy())
        logger.debug(f"Decode iteration {l}/{iterations}: {trace.masked_counts[-1]} masked")

    return state.tokens.copy()


# ==================== Inpainting ====================

def parse_regions(text: str) -> List[Tuple[int, int]]:
    """'2:5,7:9' -> [(2, 5), (7, 9)] (half-open intervals)"""
    regions = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        try:
            start, end = (int(v) for v in part.split(":"))
        except ValueError:
            raise DataError(f"bad region syntax {part!r}; expected start:end")
        regions.append((start, end))
    if not regions:
        raise DataError(f"bad region syntax {text!r}; expected start:end[,start:end]")
    return regions


def region_mask(n: int, regions: Iterable[Tuple[int, int]]) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for start, end in regions:
        if not 0 <= start <= end <= n:
            raise DataError(f"region {start}:{end} outside [0, {n}]")
        mask[start:end] = True
    return mask


def inpaint(
    pred: PredictorContract,
    existing: Sequence[int],
    regions: Iterable[Tuple[int, int]],
    condition: ConditionRef,
    cfg: DecodeConfig,
    trace: Optional[DecodeTrace] = None,
) -> np.ndarray:
    """
    Regenerate the tokens inside `regions`, keeping every other position fixed.
    An empty region returns the input unchanged (flagged in the trace).
    """
    existing = np.asarray(existing, dtype=np.int64)
    if np.any(existing == MASK):
        raise DataError("input row for inpainting contains masked tokens")
    regenerate = region_mask(len(existing), regions)
    trace = trace if trace is not None else DecodeTrace()
    if not regenerate.any():
        logger.warning("Inpainting region is empty; returning the input unchanged")
        trace.noop = True
        return existing.copy()

    pinned = {int(i): int(existing[i]) for i in np.flatnonzero(~regenerate)}
    return iterative_decode(pred, len(existing), condition, cfg, pinned=pinned, trace=trace)


# ==================== Training ====================

def train_base_predictor(
    corpus: Sequence[Tuple[np.ndarray, ConditionRef]],
    settings: PredictorSettings,
    seed: int,
    vocab_size: Optional[int] = None,
    schedule: MaskSchedule = MaskSchedule.COSINE,
) -> CountModel:
    """
    Base-layer count model: full-row counts plus `settings.mask_samples` masked
    views per row, where masked positions are counted under the contexts the
    decoder will see (nearest unmasked neighbours).
    """
    model = train_count_predictor(corpus, 0, settings.alpha, settings.uncond_drop, seed, vocab_size)
    if settings.mask_samples == 0:
        return model

    rng = np.random.default_rng([seed, 1])
    for row, cond in corpus:
        row = np.asarray(row, dtype=np.int64)
        for _ in range(settings.mask_samples):
            masked = sample_training_mask(len(row), rng, schedule)
            partial = row.copy()
            partial[masked] = MASK
            contexts = CountModel.neighbor_contexts(partial)
            model.count(contexts, row, cond.key, 0, positions=masked)
    logger.info(f"Added {settings.mask_samples} masked views per row to the base predictor")
    return model

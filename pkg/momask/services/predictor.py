# -*- coding: utf-8 -*-
"""
Predictor Service - the token-probability contract consumed by the decoders,
an exact oracle for verification, and a smoothed count model for real runs.
"""
import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from momask.errors import DataError, ModelError
from momask.models import MASK, NULL_CONDITION, ConditionRef

logger = logging.getLogger(__name__)

BOS = -2
EOS = -3
POSITION_BUCKETS = 8
_LOG_FLOOR = np.finfo(np.float64).tiny

CondKey = Optional[str]


class PredictorContract(Protocol):
    """Anything that maps a partially masked row to per-position logits"""

    def predict_logits(self, partial: np.ndarray, condition: ConditionRef, layer: int) -> np.ndarray:
        """(n, N) finite logits; rows of unmasked positions may hold anything"""
        ...


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)


def position_bucket(t: int, n: int, buckets: int = POSITION_BUCKETS) -> int:
    return min(buckets - 1, (buckets * t) // n)


# ==================== Oracle ====================

class OraclePredictor:
    """
    Returns ln of stored per-position probabilities regardless of mask pattern.

    `tables` maps a condition key (None = unconditional), or a
    (condition key, layer) pair, to an (n, N) row-stochastic matrix.
    """

    def __init__(self, tables: Dict[Union[CondKey, Tuple[CondKey, int]], np.ndarray]):
        self._tables = {}
        for key, table in tables.items():
            table = np.asarray(table, dtype=np.float64)
            if table.ndim != 2:
                raise ValueError(f"oracle table for {key!r} must be 2-D, got shape {table.shape}")
            if np.any(table < 0) or not np.allclose(table.sum(axis=1), 1.0, rtol=0.0, atol=1e-9):
                raise ValueError(f"oracle table for {key!r} has a row that does not sum to 1")
            self._tables[key] = np.log(np.maximum(table, _LOG_FLOOR))

    def predict_logits(self, partial: np.ndarray, condition: ConditionRef, layer: int) -> np.ndarray:
        for key in ((condition.key, layer), condition.key):
            if key in self._tables:
                return self._tables[key].copy()
        raise ModelError(f"oracle has no table for condition {condition.key!r} (layer {layer})")


def oracle_predictor(tables: Dict[Union[CondKey, Tuple[CondKey, int]], np.ndarray]) -> OraclePredictor:
    return OraclePredictor(tables)


# ==================== Count Model ====================

class CountModel:
    """
    Laplace-smoothed context counts.

    Context per position is (left, right) nearest unmasked neighbours for the base
    layer ("neighbors"), or the discrete residual context id ("residual"); both are
    combined with a position bucket, the condition key and the layer.
    """

    def __init__(self, alpha: float, vocab_size: int, context_kind: str = "neighbors", buckets: int = POSITION_BUCKETS):
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if vocab_size < 1:
            raise ValueError(f"vocab_size must be >= 1, got {vocab_size}")
        if context_kind not in ("neighbors", "residual"):
            raise ValueError(f"unknown context kind {context_kind!r}")
        self.alpha = float(alpha)
        self.vocab_size = int(vocab_size)
        self.context_kind = context_kind
        self.buckets = int(buckets)
        self.tables: Dict[tuple, np.ndarray] = defaultdict(lambda: np.zeros(self.vocab_size))
        self.marginals: Dict[Tuple[CondKey, int], np.ndarray] = defaultdict(lambda: np.zeros(self.vocab_size))
        self.conditions: set = set()

    # ------------------------------------------------------------------
    # Training
    # ------------------------------------------------------------------

    def count(
        self,
        contexts: Sequence[tuple],
        targets: np.ndarray,
        cond_key: CondKey,
        layer: int,
        positions: Optional[Iterable[int]] = None,
    ) -> None:
        """Add one observation per position (or only at `positions`)"""
        n = len(targets)
        chosen = None if positions is None else set(int(p) for p in positions)
        if cond_key is not None:
            self.conditions.add(cond_key)
        marginal = self.marginals[(cond_key, layer)]
        for t, (context, target) in enumerate(zip(contexts, targets)):
            if chosen is not None and t not in chosen:
                continue
            target = int(target)
            if not 0 <= target < self.vocab_size:
                raise DataError(f"token {target} out of range for vocab {self.vocab_size}")
            key = tuple(context) + (position_bucket(t, n, self.buckets), cond_key, layer)
            self.tables[key][target] += 1.0
            marginal[target] += 1.0

    # ------------------------------------------------------------------
    # Prediction
    # ------------------------------------------------------------------

    @staticmethod
    def neighbor_contexts(tokens: np.ndarray) -> List[Tuple[int, int]]:
        """Nearest unmasked token to the left/right of each position (BOS/EOS if none)"""
        n = len(tokens)
        left = [BOS] * n
        right = [EOS] * n
        last = BOS
        for t in range(n):
            left[t] = last
            if tokens[t] != MASK:
                last = int(tokens[t])
        last = EOS
        for t in range(n - 1, -1, -1):
            right[t] = last
            if tokens[t] != MASK:
                last = int(tokens[t])
        return list(zip(left, right))

    def contexts_for(self, partial: np.ndarray) -> List[tuple]:
        if self.context_kind == "neighbors":
            return self.neighbor_contexts(partial)
        return [(int(c),) for c in partial]

    def counts_for(self, context: tuple, bucket: int, cond_key: CondKey, layer: int) -> np.ndarray:
        key = tuple(context) + (bucket, cond_key, layer)
        if key in self.tables:
            return self.tables[key]
        marginal = self.marginals.get((cond_key, layer))
        return marginal if marginal is not None else np.zeros(self.vocab_size)

    def predict_logits(self, partial: np.ndarray, condition: ConditionRef, layer: int) -> np.ndarray:
        """ln((count_k + alpha) / (sum counts + alpha * N)) per position"""
        cond_key = condition.key
        if cond_key is not None and cond_key not in self.conditions:
            raise ModelError(f"condition {cond_key!r} is not registered with the model")
        partial = np.asarray(partial, dtype=np.int64)
        n = len(partial)
        counts = np.stack([
            self.counts_for(ctx, position_bucket(t, n, self.buckets), cond_key, layer)
            for t, ctx in enumerate(self.contexts_for(partial))
        ])
        probs = (counts + self.alpha) / (counts.sum(axis=1, keepdims=True) + self.alpha * self.vocab_size)
        return np.log(probs)

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> dict:
        def sparse(counts: np.ndarray) -> Dict[str, float]:
            return {str(i): float(c) for i, c in enumerate(counts) if c}

        return {
            "alpha": self.alpha,
            "vocab_size": self.vocab_size,
            "context_kind": self.context_kind,
            "buckets": self.buckets,
            "conditions": sorted(self.conditions),
            "tables": [{"key": list(k), "counts": sparse(v)} for k, v in sorted(self.tables.items(), key=lambda kv: repr(kv[0]))],
            "marginals": [
                {"condition": k[0], "layer": k[1], "counts": sparse(v)}
                for k, v in sorted(self.marginals.items(), key=lambda kv: repr(kv[0]))
            ],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "CountModel":
        try:
            model = cls(raw["alpha"], raw["vocab_size"], raw.get("context_kind", "neighbors"), raw.get("buckets", POSITION_BUCKETS))
            model.conditions = set(raw.get("conditions", []))
            for entry in raw["tables"]:
                counts = model.tables[tuple(entry["key"])]
                for idx, c in entry["counts"].items():
                    counts[int(idx)] = c
            for entry in raw["marginals"]:
                counts = model.marginals[(entry["condition"], entry["layer"])]
                for idx, c in entry["counts"].items():
                    counts[int(idx)] = c
        except (KeyError, TypeError, ValueError) as e:
            raise ModelError(f"invalid count model: {e}")
        return model

    def table_snapshot(self) -> Dict[tuple, Tuple[float, ...]]:
        """Hashable view of all counts (for comparing models)"""
        return {k: tuple(v) for k, v in self.tables.items()}


def train_count_predictor(
    corpus: Iterable[Tuple[np.ndarray, ConditionRef]],
    layer: int,
    alpha: float,
    uncond_drop: float,
    seed: int,
    vocab_size: Optional[int] = None,
) -> CountModel:
    """
    Count every position of every row under its (left, right, bucket, condition, layer)
    context; with probability `uncond_drop` an example is also counted under NULL.
    """
    corpus = [(np.asarray(row, dtype=np.int64), cond) for row, cond in corpus]
    if not corpus:
        raise DataError("cannot train a predictor on an empty corpus")
    if not 0.0 <= uncond_drop <= 1.0:
        raise ValueError(f"uncond_drop must be in [0, 1], got {uncond_drop}")
    vocab_size = vocab_size or int(max(row.max() for row, _ in corpus)) + 1

    rng = np.random.default_rng(seed)
    model = CountModel(alpha, vocab_size, "neighbors")
    for row, cond in corpus:
        # contexts come from the unmasked training row itself
        contexts = CountModel.neighbor_contexts(row)
        also_null = rng.random() < uncond_drop
        model.count(contexts, row, cond.key, layer)
        if also_null and not cond.is_null:
            model.count(contexts, row, None, layer)
    logger.info(f"Trained count predictor (layer {layer}): {len(corpus)} rows, {len(model.tables)} contexts")
    return model


def count_predict_logits(model: CountModel, partial: np.ndarray, condition: ConditionRef, layer: int) -> np.ndarray:
    return model.predict_logits(partial, condition, layer)


# ==================== Bundles ====================

class PredictorBundle:
    """Base-layer model plus one residual model per layer, saved as one JSON file"""

    def __init__(self, base: CountModel, residual: Dict[int, CountModel]):
        self.base = base
        self.residual = dict(residual)

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "base": self.base.to_dict(),
            "residual": {str(j): m.to_dict() for j, m in sorted(self.residual.items())},
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f)

    @classmethod
    def load(cls, path) -> "PredictorBundle":
        path = Path(path)
        if not path.exists():
            raise ModelError(f"predictor file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ModelError(f"cannot read predictor file {path}: {e}")
        try:
            return cls(
                base=CountModel.from_dict(raw["base"]),
                residual={int(j): CountModel.from_dict(m) for j, m in raw.get("residual", {}).items()},
            )
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            raise ModelError(f"invalid predictor file {path}: {e}")

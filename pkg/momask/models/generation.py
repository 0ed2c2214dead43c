# -*- coding: utf-8 -*-
"""
Generation Models - conditions, decode settings, decode state and traces
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

# Sentinel for a masked token; rendered as -1 in JSON token rows
MASK = -1


class ConditionRef(BaseModel):
    """A discrete label, a caller-supplied vector, or nothing (unconditional)"""
    label: Optional[str] = Field(None, description="Registered label id")
    vector: Optional[Tuple[float, ...]] = Field(None, description="Caller-supplied embedding")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _one_kind(self) -> "ConditionRef":
        if self.label is not None and self.vector is not None:
            raise ValueError("a condition is either a label or a vector, not both")
        return self

    @classmethod
    def null(cls) -> "ConditionRef":
        return cls()

    @classmethod
    def of(cls, label: Optional[str]) -> "ConditionRef":
        return cls(label=label)

    @property
    def is_null(self) -> bool:
        return self.label is None and self.vector is None

    @property
    def key(self) -> Optional[str]:
        """Hashable table key; None for the unconditional branch"""
        if self.label is not None:
            return self.label
        if self.vector is not None:
            return "vec:" + ",".join(f"{v:.6g}" for v in self.vector)
        return None


NULL_CONDITION = ConditionRef()


class MaskSchedule(str, Enum):
    """Fraction of positions still masked at progress tau"""
    COSINE = "cosine"
    LINEAR = "linear"


class SamplingMode(str, Enum):
    """How a token is chosen from the predicted distribution"""
    CATEGORICAL = "categorical"
    GREEDY = "greedy"


class DecodeConfig(BaseModel):
    """Base-layer iterative decoding settings"""
    iterations: int = Field(10, ge=1, description="L: decoding iterations")
    cfg_scale: float = Field(4.0, ge=0.0, description="s: classifier-free guidance scale")
    temperature: float = Field(1.0, ge=0.0, description="tau_0: Gumbel noise temperature on confidence")
    seed: int = Field(0, description="Decode RNG seed")
    schedule: MaskSchedule = Field(MaskSchedule.COSINE)
    sampling: SamplingMode = Field(SamplingMode.CATEGORICAL)
    residual_cfg_scale: float = Field(5.0, ge=0.0, description="CFG scale for residual layers")
    residual_sampling: bool = Field(False, description="Sample residual tokens instead of argmax")

    class Config:
        extra = "forbid"


class RRemaskConfig(BaseModel):
    """Replace-and-remask corruption of residual-layer training inputs"""
    replace_ratio: float = Field(0.2, ge=0.0, le=1.0, description="rho: fraction of positions replaced")

    class Config:
        extra = "forbid"


class PredictorSettings(BaseModel):
    """Count-model training knobs"""
    alpha: float = Field(1.0, gt=0.0, description="Laplace smoothing")
    uncond_drop: float = Field(0.1, ge=0.0, le=1.0, description="Probability of also counting under NULL")
    mask_samples: int = Field(2, ge=0, description="Masked training views per row for the base model")
    rremask: RRemaskConfig = Field(default_factory=RRemaskConfig)

    class Config:
        extra = "forbid"


@dataclass(eq=False)
class DecodeState:
    """Per-position token / commitment / confidence state of one decode"""
    tokens: np.ndarray
    committed: np.ndarray
    confidence: np.ndarray
    iteration: int = 0

    @classmethod
    def start(cls, n: int, pinned: Optional[dict] = None) -> "DecodeState":
        tokens = np.full(n, MASK, dtype=np.int64)
        committed = np.zeros(n, dtype=bool)
        for pos, tok in (pinned or {}).items():
            tokens[pos] = tok
            committed[pos] = True
        confidence = np.where(committed, np.inf, -np.inf)
        return cls(tokens=tokens, committed=committed, confidence=confidence)

    @property
    def masked(self) -> np.ndarray:
        return self.tokens == MASK


@dataclass(eq=False)
class DecodeTrace:
    """What happened during a decode"""
    masked_counts: List[int] = field(default_factory=list)
    snapshots: List[np.ndarray] = field(default_factory=list)
    passes: int = 0
    noop: bool = False


@dataclass(eq=False)
class ResidualContext:
    """Partial reconstruction from layers < j, and its discrete id"""
    vectors: np.ndarray
    ids: np.ndarray
    layer: int

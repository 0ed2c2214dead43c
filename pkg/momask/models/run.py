# -*- coding: utf-8 -*-
"""
Run Models - the run configuration file and the manifest written after a run
"""
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from .generation import DecodeConfig, PredictorSettings


class RvqSettings(BaseModel):
    """RVQ settings as written in a run config (code_dim derives from stride x D)"""
    num_residual_layers: int = Field(5, ge=0)
    codebook_size: int = Field(512, ge=1)
    dropout_ratio: float = Field(0.2, ge=0.0, le=1.0)
    ema_decay: float = Field(0.99, gt=0.0, lt=1.0)
    dead_code_threshold: float = Field(1e-2, ge=0.0)
    commitment_weight: float = Field(0.02, ge=0.0)
    kmeans_iters: int = Field(50, ge=1)

    class Config:
        extra = "forbid"


class PathsConfig(BaseModel):
    """Where inputs live and outputs go"""
    motions: Optional[str] = None
    tokens: Optional[str] = None
    out: Optional[str] = None

    class Config:
        extra = "forbid"


class RunConfig(BaseModel):
    """Everything a run needs; unknown keys are rejected"""
    rvq: RvqSettings = Field(default_factory=RvqSettings)
    decode: DecodeConfig = Field(default_factory=DecodeConfig)
    predictor: PredictorSettings = Field(default_factory=PredictorSettings)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    seed: int = 0
    stride: int = Field(4, ge=1, description="Frames per latent step")
    batch_size: int = Field(512, ge=1)
    epochs: int = Field(5, ge=1)
    augment_mirror: bool = False
    split_ratios: Tuple[float, float, float] = (0.8, 0.15, 0.05)
    jobs: int = Field(1, ge=1)

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def _ratios(self) -> "RunConfig":
        if any(r < 0 for r in self.split_ratios) or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError(f"split_ratios must be non-negative and sum to 1, got {self.split_ratios}")
        return self


class RunManifest(BaseModel):
    """Reproducibility record of one command; no timestamps so reruns compare equal"""
    command: str
    config: Dict[str, object]
    versions: Dict[str, str]
    seeds: Dict[str, int]
    outputs: Dict[str, str] = Field(default_factory=dict, description="relative path -> sha256")
    metrics: Optional[Dict[str, object]] = None
    log: Dict[str, object] = Field(default_factory=dict)

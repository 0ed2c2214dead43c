# -*- coding: utf-8 -*-
"""
Residual Quantization Models - config, codebooks, token grids
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np
from pydantic import BaseModel, Field


class RvqConfig(BaseModel):
    """Residual VQ hyperparameters"""
    num_residual_layers: int = Field(5, ge=0, description="V: residual layers on top of the base layer")
    codebook_size: int = Field(512, ge=1, description="N: codes per layer")
    code_dim: int = Field(..., ge=1, description="d: latent dimension (stride x D for the patcher)")
    dropout_ratio: float = Field(0.2, ge=0.0, le=1.0, description="q: quantization dropout ratio")
    ema_decay: float = Field(0.99, gt=0.0, lt=1.0, description="lambda: EMA decay")
    dead_code_threshold: float = Field(1e-2, ge=0.0, description="EMA count below which a code is reset")
    commitment_weight: float = Field(0.02, ge=0.0, description="beta: reported commitment diagnostic weight")
    kmeans_iters: int = Field(50, ge=1, description="Lloyd iteration cap for initialization")

    class Config:
        extra = "forbid"

    @property
    def num_layers(self) -> int:
        return self.num_residual_layers + 1


@dataclass(eq=False)
class Codebook:
    """N x d code vectors with EMA state; `pinned_zero` keeps entry 0 at the zero vector"""
    entries: np.ndarray
    ema_counts: np.ndarray = None
    ema_sums: np.ndarray = None
    pinned_zero: bool = False

    def __post_init__(self):
        self.entries = np.array(self.entries, dtype=np.float64)
        if self.entries.ndim == 1:
            self.entries = self.entries[:, None]
        if self.entries.ndim != 2 or self.entries.shape[0] < 1:
            raise ValueError(f"codebook needs at least one entry, got shape {self.entries.shape}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("codebook entries must be finite")
        if self.ema_counts is None:
            self.ema_counts = np.ones(self.size)
        self.ema_counts = np.array(self.ema_counts, dtype=np.float64)
        if self.ema_sums is None:
            self.ema_sums = self.entries * self.ema_counts[:, None]
        self.ema_sums = np.array(self.ema_sums, dtype=np.float64)
        if np.any(self.ema_counts < 0):
            raise ValueError("ema_counts must be non-negative")
        if self.pinned_zero and np.any(self.entries[0] != 0.0):
            raise ValueError("pinned codebook must hold the zero vector at entry 0")

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def dim(self) -> int:
        return self.entries.shape[1]

    def copy(self) -> "Codebook":
        return Codebook(
            entries=self.entries.copy(),
            ema_counts=self.ema_counts.copy(),
            ema_sums=self.ema_sums.copy(),
            pinned_zero=self.pinned_zero,
        )


@dataclass(eq=False)
class CodebookStack:
    """Base codebook (layer 0) followed by V residual codebooks"""
    layers: List[Codebook]
    config: RvqConfig

    def __post_init__(self):
        if len(self.layers) != self.config.num_layers:
            raise ValueError(
                f"stack has {len(self.layers)} layers, config expects {self.config.num_layers}"
            )
        dims = {cb.dim for cb in self.layers}
        if len(dims) != 1:
            raise ValueError(f"all layers must share the code dimension, got {sorted(dims)}")

    @classmethod
    def from_entries(cls, entries: List[np.ndarray], **config) -> "CodebookStack":
        """Build a stack from explicit code tables (tests, hand-built stacks)"""
        layers = [Codebook(entries=e) for e in entries]
        cfg = RvqConfig(
            num_residual_layers=len(layers) - 1,
            codebook_size=max(cb.size for cb in layers),
            code_dim=layers[0].dim,
            **config,
        )
        return cls(layers=layers, config=cfg)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return self.layers[0].dim


@dataclass(eq=False)
class TokenGrid:
    """(layers x n) codebook indices; one column per latent step"""
    indices: np.ndarray

    def __post_init__(self):
        indices = np.array(self.indices, dtype=np.int64)
        if indices.ndim == 1:
            indices = indices[None, :]
        if indices.ndim != 2 or indices.shape[1] < 1:
            raise ValueError(f"token grid must be a non-empty matrix, got shape {indices.shape}")
        self.indices = indices

    @property
    def num_layers(self) -> int:
        return self.indices.shape[0]

    @property
    def length(self) -> int:
        return self.indices.shape[1]

    def rows(self, count: int) -> "TokenGrid":
        return TokenGrid(self.indices[:count].copy())

    def to_json(self) -> List[List[int]]:
        return self.indices.tolist()


@dataclass(eq=False)
class EncodeTrace:
    """Result of a residual encode: tokens plus the residual entering each layer"""
    tokens: TokenGrid
    residuals: List[np.ndarray] = field(default_factory=list)

    @property
    def final_residual(self) -> np.ndarray:
        return self.residuals[-1]

    @property
    def residual_norms(self) -> np.ndarray:
        """(layers + 1, n) Euclidean norms of r^0 .. r^{active}"""
        return np.stack([np.linalg.norm(r, axis=1) for r in self.residuals])

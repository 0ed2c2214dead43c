# -*- coding: utf-8 -*-
"""
Evaluation Models - jerk series, sJPE decomposition, metric reports
"""
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator


@dataclass(frozen=True, eq=False)
class JerkSeries:
    """(T-3) x J jerk magnitudes in length units per s^3"""
    values: np.ndarray
    fps: float

    @property
    def length(self) -> int:
        return self.values.shape[0]

    def mean_over_joints(self) -> np.ndarray:
        return self.values.mean(axis=1)


class SjpeReport(BaseModel):
    """sJPE and its noise (overestimation) / static (underestimation) parts"""
    total: float = Field(..., ge=0.0, le=1.0)
    noise: float = Field(..., ge=0.0, le=1.0)
    static: float = Field(..., ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _sums(self) -> "SjpeReport":
        if self.total != self.noise + self.static:
            raise ValueError("sJPE total must equal noise + static")
        return self


class IntervalValue(BaseModel):
    """Mean with a 95% half-width over repeated evaluations"""
    mean: float
    conf95: float = 0.0


class MetricReport(BaseModel):
    """Named scalar metrics; absent metrics stay None"""
    extractor: str = Field("default", description="Feature extractor the FID/retrieval values came from")
    mpjpe_mm: Optional[float] = None
    fid: Optional[float] = None
    sjpe: Optional[SjpeReport] = None
    r_precision_top1: Optional[float] = None
    r_precision_top2: Optional[float] = None
    r_precision_top3: Optional[float] = None
    mm_dist: Optional[float] = None
    multimodality: Optional[float] = None
    diversity: Optional[float] = None
    codebook_perplexity: Optional[float] = None
    intervals: Dict[str, IntervalValue] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _finite(self) -> "MetricReport":
        for name, value in self.model_dump(exclude={"sjpe", "intervals", "extractor"}).items():
            if value is not None and not np.isfinite(value):
                raise ValueError(f"metric {name} is not finite")
        return self

    def flat(self) -> Dict[str, object]:
        """Flat JSON view: sJPE expanded into sjpe/sjpe_noise/sjpe_static"""
        out = self.model_dump(exclude={"sjpe", "intervals"}, exclude_none=True)
        if self.sjpe is not None:
            out["sjpe"] = self.sjpe.total
            out["sjpe_noise"] = self.sjpe.noise
            out["sjpe_static"] = self.sjpe.static
        for name, interval in self.intervals.items():
            out[f"{name}_conf95"] = interval.conf95
        return out

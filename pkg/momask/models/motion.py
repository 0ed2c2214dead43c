# -*- coding: utf-8 -*-
"""
Motion Models - joint layouts, motion/latent sequences, dataset splits
"""
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

AXES = {"x": 0, "y": 1, "z": 2}


class JointLayout(BaseModel):
    """Where each joint's (x, y, z) triple lives inside a frame"""
    joint_count: int = Field(..., gt=0, description="Number of joints with a position triple")
    position_offsets: List[int] = Field(..., description="Per-joint index of its (x,y,z) triple")
    mirror_pairs: List[Tuple[int, int]] = Field(default_factory=list, description="(left, right) joint pairs")
    lateral_axis: Optional[Literal["x", "y", "z"]] = Field(None, description="Axis negated by mirroring")
    total_dims: int = Field(..., gt=0, description="Feature dims per frame (D)")

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check_offsets(self) -> "JointLayout":
        if len(self.position_offsets) != self.joint_count:
            raise ValueError(
                f"position_offsets has {len(self.position_offsets)} entries, expected {self.joint_count}"
            )
        used = set()
        for offset in self.position_offsets:
            if offset < 0 or offset + 3 > self.total_dims:
                raise ValueError(f"offset {offset} out of range for {self.total_dims} dims")
            triple = {offset, offset + 1, offset + 2}
            if used & triple:
                raise ValueError(f"offset {offset} overlaps another joint")
            used |= triple
        seen = set()
        for left, right in self.mirror_pairs:
            for joint in (left, right):
                if not 0 <= joint < self.joint_count:
                    raise ValueError(f"mirror pair joint {joint} out of range")
                if joint in seen:
                    raise ValueError(f"joint {joint} appears in more than one mirror pair")
                seen.add(joint)
            if left == right:
                raise ValueError(f"mirror pair ({left}, {right}) pairs a joint with itself")
        return self

    @property
    def has_mirror(self) -> bool:
        return self.lateral_axis is not None

    def position_index(self) -> np.ndarray:
        """(J, 3) array of frame columns holding joint positions"""
        return np.asarray(self.position_offsets, dtype=np.int64)[:, None] + np.arange(3)


def default_layout(total_dims: int) -> JointLayout:
    """Consecutive triples, no mirror metadata (used for CSV import)"""
    if total_dims < 3:
        raise ValueError(f"cannot derive a joint layout from {total_dims} dims")
    joints = total_dims // 3
    return JointLayout(
        joint_count=joints,
        position_offsets=[3 * j for j in range(joints)],
        total_dims=total_dims,
    )


def synth_layout() -> JointLayout:
    """Five-joint toy skeleton: root, L/R hand, L/R foot"""
    return JointLayout(
        joint_count=5,
        position_offsets=[0, 3, 6, 9, 12],
        mirror_pairs=[(1, 2), (3, 4)],
        lateral_axis="x",
        total_dims=15,
    )


@dataclass(frozen=True, eq=False)
class MotionSequence:
    """T x D motion features at a known frame rate"""
    frames: np.ndarray
    fps: float
    layout: JointLayout

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(f"frames must be a non-empty T x D matrix, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain non-finite values")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise ValueError(f"fps must be finite and positive, got {self.fps}")
        if frames.shape[1] != self.layout.total_dims:
            raise ValueError(
                f"frame width {frames.shape[1]} does not match layout.total_dims {self.layout.total_dims}"
            )
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def dims(self) -> int:
        return self.frames.shape[1]

    def positions(self) -> np.ndarray:
        """(T, J, 3) joint positions"""
        return self.frames[:, self.layout.position_index()]

    def with_frames(self, frames: np.ndarray) -> "MotionSequence":
        return MotionSequence(frames=frames, fps=self.fps, layout=self.layout)


@dataclass(frozen=True, eq=False)
class LatentSequence:
    """n x d latent codes, one row per `stride` frames"""
    codes: np.ndarray
    stride: int

    def __post_init__(self):
        codes = np.array(self.codes, dtype=np.float64)
        if codes.ndim != 2 or codes.shape[0] < 1 or codes.shape[1] < 1:
            raise ValueError(f"codes must be a non-empty n x d matrix, got shape {codes.shape}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def length(self) -> int:
        return self.codes.shape[0]

    @property
    def dim(self) -> int:
        return self.codes.shape[1]


class DatasetSplit(BaseModel):
    """Train/val/test partition of item identifiers"""
    train: List[str] = Field(default_factory=list)
    val: List[str] = Field(default_factory=list)
    test: List[str] = Field(default_factory=list)
    ratios: Tuple[float, float, float] = Field(..., description="(train, val, test) ratios")

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

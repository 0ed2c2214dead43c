# -*- coding: utf-8 -*-
"""
Motion Data Service - motion files, mirroring, splits, synthetic clips and
the temporal patcher that stands in for the encoder/decoder.

Binary layout (little-endian):
    b"MOT1" | u32 T | u32 D | f32 fps | u16 layout length | layout JSON | T*D f32 row-major
"""
import json
import logging
import math
import struct
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from momask.errors import DataError, MotionFormatError
from momask.models import (
    AXES, DatasetSplit, JointLayout, LatentSequence, MotionSequence,
    default_layout, synth_layout,
)

logger = logging.getLogger(__name__)

MAGIC = b"MOT1"
_HEADER = struct.Struct("<IIfH")

MOTION_SUFFIXES = {".mot", ".csv"}
SYNTH_KINDS = ("sine_walk", "random_smooth", "cubic", "constant")


# ==================== File Formats ====================

def save_motion(seq: MotionSequence, path) -> None:
    """Write a motion sequence in the binary format"""
    layout_blob = seq.layout.model_dump_json().encode("utf-8")
    if len(layout_blob) > 0xFFFF:
        raise DataError(f"layout JSON too long ({len(layout_blob)} bytes)")
    header = _HEADER.pack(seq.length, seq.dims, seq.fps, len(layout_blob))
    payload = np.ascontiguousarray(seq.frames, dtype="<f4").tobytes()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC + header + layout_blob + payload)


def load_motion(path) -> MotionSequence:
    """
    Read a binary motion file.

    Raises:
        MotionFormatError: bad magic, truncated header/payload, header/layout
            dimension mismatch, non-finite values
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read motion file {path}: {e}")

    if blob[:4] != MAGIC:
        raise MotionFormatError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    offset = len(MAGIC)
    if len(blob) < offset + _HEADER.size:
        raise MotionFormatError(f"{path}: truncated header")
    frames_count, dims, fps, layout_len = _HEADER.unpack_from(blob, offset)
    offset += _HEADER.size

    if len(blob) < offset + layout_len:
        raise MotionFormatError(f"{path}: truncated layout block")
    try:
        layout = JointLayout.model_validate_json(blob[offset:offset + layout_len])
    except ValidationError as e:
        raise MotionFormatError(f"{path}: invalid layout: {e}")
    offset += layout_len

    if layout.total_dims != dims:
        raise MotionFormatError(f"{path}: header declares D={dims}, layout has {layout.total_dims}")
    if frames_count < 1 or dims < 1:
        raise MotionFormatError(f"{path}: empty motion (T={frames_count}, D={dims})")

    expected = frames_count * dims * 4
    payload = blob[offset:]
    if len(payload) < expected:
        raise MotionFormatError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    if len(payload) > expected:
        raise MotionFormatError(f"{path}: {len(payload) - expected} trailing bytes after payload")

    frames = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(frames_count, dims)
    if not np.all(np.isfinite(frames)):
        raise MotionFormatError(f"{path}: non-finite value in payload")
    if not (math.isfinite(fps) and fps > 0):
        raise MotionFormatError(f"{path}: invalid fps {fps}")
    return MotionSequence(frames=frames, fps=fps, layout=layout)


def load_motion_csv(path, layout: Optional[JointLayout] = None) -> MotionSequence:
    """Import `fps=<real>` header + D comma-separated decimals per row"""
    path = Path(path)
    try:
        lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    except OSError as e:
        raise DataError(f"cannot read motion file {path}: {e}")
    if not lines or not lines[0].startswith("fps="):
        raise MotionFormatError(f"{path}: first row must be 'fps=<real>'")
    try:
        fps = float(lines[0][4:])
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    except ValueError as e:
        raise MotionFormatError(f"{path}: {e}")
    if not (math.isfinite(fps) and fps > 0):
        raise MotionFormatError(f"{path}: invalid fps {fps}")
    if not rows:
        raise MotionFormatError(f"{path}: no frames")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise MotionFormatError(f"{path}: ragged rows with widths {sorted(widths)}")
    frames = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(frames)):
        raise MotionFormatError(f"{path}: non-finite value")
    try:
        layout = layout or default_layout(frames.shape[1])
        return MotionSequence(frames=frames, fps=fps, layout=layout)
    except ValueError as e:
        raise MotionFormatError(f"{path}: {e}")


def save_motion_csv(seq: MotionSequence, path) -> None:
    """Export in the CSV import format (17 significant digits)"""
    lines = [f"fps={seq.fps!r}"]
    lines += [",".join(f"{v:.17g}" for v in row) for row in seq.frames]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_any(path, layout: Optional[JointLayout] = None) -> MotionSequence:
    path = Path(path)
    if path.suffix == ".csv":
        return load_motion_csv(path, layout)
    return load_motion(path)


def list_motion_files(directory, allowed_extras: Iterable[str] = ("labels.json",)) -> List[Path]:
    """
    Motion files in a directory, sorted by name.

    Raises:
        DataError: directory missing or empty, or a file that is not a motion file
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"motion directory not found: {directory}")
    extras = set(allowed_extras)
    files = []
    for entry in sorted(directory.iterdir()):
        if entry.name.startswith(".") or entry.is_dir() or entry.name in extras:
            continue
        if entry.suffix not in MOTION_SUFFIXES:
            raise DataError(f"not a motion file: {entry}", details={"path": str(entry)})
        files.append(entry)
    if not files:
        raise DataError(f"no motion files in {directory}")
    return files


# ==================== Augmentation ====================

def mirror(seq: MotionSequence) -> MotionSequence:
    """Swap left/right joint triples and negate the lateral coordinate of every joint"""
    layout = seq.layout
    if not layout.has_mirror:
        raise DataError("layout has no mirror metadata (lateral_axis unset)")

    frames = seq.frames.copy()
    index = layout.position_index()
    for left, right in layout.mirror_pairs:
        frames[:, index[left]] = seq.frames[:, index[right]]
        frames[:, index[right]] = seq.frames[:, index[left]]
    lateral = index[:, AXES[layout.lateral_axis]]
    frames[:, lateral] = -frames[:, lateral]
    return seq.with_frames(frames)


def augment_with_mirrors(items: Dict[str, MotionSequence]) -> Dict[str, MotionSequence]:
    """Add a mirrored twin `M<id>` for every clip"""
    out = dict(items)
    for clip_id, seq in items.items():
        out[f"M{clip_id}"] = mirror(seq)
    logger.info(f"Mirror augmentation: {len(items)} -> {len(out)} clips")
    return out


# ==================== Splits ====================

def split_dataset(ids: Sequence[str], ratios: Tuple[float, float, float], seed: int) -> DatasetSplit:
    """
    Seeded train/val/test partition.

    val and test get floor(ratio * n); train takes the rest (its floor plus the remainder).
    """
    if len(ratios) != 3:
        raise ValueError(f"expected three ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be non-negative, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

    n = len(ids)
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]
    # epsilon guards products like 0.15 * 20 landing just under an integer
    n_val = int(math.floor(ratios[1] * n + 1e-9))
    n_test = int(math.floor(ratios[2] * n + 1e-9))
    n_train = n - n_val - n_test
    return DatasetSplit(
        train=shuffled[:n_train],
        val=shuffled[n_train:n_train + n_val],
        test=shuffled[n_train + n_val:],
        ratios=tuple(ratios),
    )


# ==================== Synthetic Clips ====================

def synth_motion(
    kind: str,
    length: int,
    seed: int,
    fps: float = 20.0,
    layout: Optional[JointLayout] = None,
) -> MotionSequence:
    """
    Deterministic synthetic clip.

    Kinds:
        sine_walk: root walks forward, limbs swing sinusoidally
        random_smooth: each coordinate is a sum of slow random sinusoids
        cubic: every coordinate of joint j is a_j * t^3 (t = frame index, a_j in {1, 2, 3})
        constant: one random pose held for every frame
    """
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown generator {kind!r}; expected one of {SYNTH_KINDS}")
    if length < 4:
        raise ValueError(f"length must be >= 4, got {length}")

    layout = layout or synth_layout()
    rng = np.random.default_rng(seed)
    joints = layout.joint_count
    t = np.arange(length, dtype=np.float64)
    positions = np.zeros((length, joints, 3))

    if kind == "constant":
        positions[:] = rng.normal(scale=0.5, size=(1, joints, 3))
    elif kind == "cubic":
        coeffs = rng.integers(1, 4, size=joints).astype(np.float64)
        positions[:] = (coeffs[None, :] * t[:, None] ** 3)[:, :, None]
    elif kind == "sine_walk":
        seconds = t / fps
        speed = rng.uniform(0.8, 1.6)
        freq = rng.uniform(0.8, 1.4)
        rest = rng.normal(scale=0.3, size=(joints, 3))
        phases = rng.uniform(0, 2 * np.pi, size=joints)
        swing = 0.25 * np.sin(2 * np.pi * freq * seconds[:, None] + phases[None, :])
        positions[:] = rest[None]
        positions[:, :, 2] += speed * seconds[:, None] + swing
        positions[:, :, 1] += 0.05 * np.abs(swing)
    else:  # random_smooth
        seconds = t / fps
        components = 3
        amps = rng.uniform(0.05, 0.5, size=(components, joints, 3))
        freqs = rng.uniform(0.2, 1.5, size=(components, joints, 3))
        phases = rng.uniform(0, 2 * np.pi, size=(components, joints, 3))
        base = rng.normal(scale=0.5, size=(joints, 3))
        waves = amps[None] * np.sin(2 * np.pi * freqs[None] * seconds[:, None, None, None] + phases[None])
        positions[:] = base[None] + waves.sum(axis=1)

    frames = np.zeros((length, layout.total_dims))
    frames[:, layout.position_index()] = positions
    return MotionSequence(frames=frames, fps=fps, layout=layout)


def synth_suite(kind: str, count: int, length: int, seed: int, fps: float = 20.0) -> Dict[str, MotionSequence]:
    """`count` clips of one kind with per-clip seeds derived from `seed`"""
    seeds = np.random.SeedSequence(seed).generate_state(count)
    return {
        f"{kind}_{i:04d}": synth_motion(kind, length, int(s), fps=fps)
        for i, s in enumerate(seeds)
    }


# ==================== Temporal Patcher ====================

def patch(seq: MotionSequence, stride: int) -> LatentSequence:
    """
    Group `stride` consecutive frames into one latent row (row-major flatten).
    A partial final window is zero-padded.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    steps = -(-seq.length // stride)
    padded = np.zeros((steps * stride, seq.dims))
    padded[:seq.length] = seq.frames
    return LatentSequence(codes=padded.reshape(steps, stride * seq.dims), stride=stride)


def unpatch(
    lat: LatentSequence,
    dims: int,
    length: int,
    fps: float = 20.0,
    layout: Optional[JointLayout] = None,
) -> MotionSequence:
    """Inverse of patch: unflatten latent rows and truncate to `length` frames"""
    if lat.dim != lat.stride * dims:
        raise DataError(f"latent dim {lat.dim} != stride {lat.stride} x D {dims}")
    if not 1 <= length <= lat.length * lat.stride:
        raise DataError(f"length {length} outside 1..{lat.length * lat.stride}")
    frames = lat.codes.reshape(lat.length * lat.stride, dims)[:length]
    return MotionSequence(frames=frames, fps=fps, layout=layout or default_layout(dims))

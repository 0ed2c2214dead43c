# -*- coding: utf-8 -*-
"""
Shared fixtures: small layouts, synthetic clips written to disk, a tiny run config
"""
import json

import numpy as np
import pytest

from momask.models import CodebookStack, JointLayout, MotionSequence, default_layout, synth_layout
from momask.services.motion_data import save_motion, synth_suite


def make_seq(frames, fps: float = 20.0, layout: JointLayout = None) -> MotionSequence:
    frames = np.asarray(frames, dtype=np.float64)
    return MotionSequence(frames=frames, fps=fps, layout=layout or default_layout(frames.shape[1]))


@pytest.fixture
def layout() -> JointLayout:
    return synth_layout()


@pytest.fixture
def stack_1d() -> CodebookStack:
    """Layer 0 = {0, 4}, layer 1 = {-1, 0, 1} (d = 1)"""
    return CodebookStack.from_entries([np.array([0.0, 4.0]), np.array([-1.0, 0.0, 1.0])])


@pytest.fixture
def motion_dir(tmp_path):
    """Six 32-frame random_smooth clips plus labels.json (walk / wave)"""
    directory = tmp_path / "motions"
    clips = synth_suite("random_smooth", 6, 32, seed=3)
    labels = {}
    for i, (clip_id, seq) in enumerate(sorted(clips.items())):
        save_motion(seq, directory / f"{clip_id}.mot")
        labels[clip_id] = "walk" if i % 2 == 0 else "wave"
    (directory / "labels.json").write_text(json.dumps(labels), encoding="utf-8")
    return directory


@pytest.fixture
def config_path(tmp_path):
    """Small stack so CLI runs stay fast"""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "rvq": {"num_residual_layers": 2, "codebook_size": 8, "kmeans_iters": 10},
        "epochs": 2,
        "stride": 4,
        "predictor": {"mask_samples": 1},
    }), encoding="utf-8")
    return path

# -*- coding: utf-8 -*-
"""
Motion files, mirroring, splits, synthetic clips and the temporal patcher
"""
import json
import struct

import numpy as np
import pytest

from conftest import make_seq
from momask.errors import DataError, MotionFormatError
from momask.models import JointLayout, default_layout, synth_layout
from momask.services.motion_data import (
    augment_with_mirrors, list_motion_files, load_motion, load_motion_csv, mirror, patch,
    save_motion, save_motion_csv, split_dataset, synth_motion, synth_suite, unpatch,
)


def write_raw_motion(path, frames: np.ndarray, fps: float, layout: JointLayout, dims=None, payload=None):
    """Independent byte-level writer for the MOT1 format"""
    blob = layout.model_dump_json().encode("utf-8")
    t, d = frames.shape
    header = b"MOT1" + struct.pack("<IIfH", t, d if dims is None else dims, fps, len(blob))
    body = frames.astype("<f4").tobytes() if payload is None else payload
    path.write_bytes(header + blob + body)


class TestBinaryFormat:

    def test_round_trip_3x6(self, tmp_path):
        frames = np.arange(18, dtype=np.float32).reshape(3, 6) / 4
        seq = make_seq(frames)
        save_motion(seq, tmp_path / "a.mot")
        loaded = load_motion(tmp_path / "a.mot")
        np.testing.assert_array_equal(loaded.frames, seq.frames)
        assert loaded.fps == 20.0
        assert loaded.layout == seq.layout

    def test_round_trip_random(self, tmp_path):
        rng = np.random.default_rng(11)
        for i in range(100):
            t, d = int(rng.integers(1, 12)), int(rng.integers(3, 13))
            frames = rng.normal(size=(t, d)).astype(np.float32)
            seq = make_seq(frames, fps=float(rng.integers(10, 60)))
            path = tmp_path / f"{i}.mot"
            save_motion(seq, path)
            np.testing.assert_array_equal(load_motion(path).frames, seq.frames)

    def test_save_of_load_is_byte_identical(self, tmp_path):
        layout = default_layout(6)
        frames = np.random.default_rng(0).normal(size=(5, 6)).astype(np.float32)
        write_raw_motion(tmp_path / "src.mot", frames, 30.0, layout)
        save_motion(load_motion(tmp_path / "src.mot"), tmp_path / "dst.mot")
        assert (tmp_path / "src.mot").read_bytes() == (tmp_path / "dst.mot").read_bytes()

    def test_hand_written_263_dims(self, tmp_path):
        layout = JointLayout(joint_count=22, position_offsets=[3 * j for j in range(22)], total_dims=263)
        frames = np.random.default_rng(1).normal(size=(100, 263)).astype(np.float32)
        write_raw_motion(tmp_path / "big.mot", frames, 20.0, layout)
        seq = load_motion(tmp_path / "big.mot")
        assert seq.length == 100
        assert seq.dims == 263
        np.testing.assert_array_equal(seq.frames, frames.astype(np.float64))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.mot"
        save_motion(make_seq(np.zeros((2, 3))), path)
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(MotionFormatError, match="magic"):
            load_motion(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.mot"
        save_motion(make_seq(np.ones((4, 3))), path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(MotionFormatError, match="truncated"):
            load_motion(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "long.mot"
        save_motion(make_seq(np.ones((4, 3))), path)
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(MotionFormatError):
            load_motion(path)

    def test_header_layout_mismatch(self, tmp_path):
        frames = np.zeros((2, 6), dtype=np.float32)
        write_raw_motion(tmp_path / "m.mot", frames, 20.0, default_layout(6), dims=9,
                         payload=np.zeros((2, 9), dtype="<f4").tobytes())
        with pytest.raises(MotionFormatError, match="D=9"):
            load_motion(tmp_path / "m.mot")

    def test_non_finite_payload(self, tmp_path):
        frames = np.zeros((2, 3), dtype=np.float32)
        frames[1, 2] = np.nan
        write_raw_motion(tmp_path / "nan.mot", frames, 20.0, default_layout(3))
        with pytest.raises(MotionFormatError, match="non-finite"):
            load_motion(tmp_path / "nan.mot")


class TestCsv:

    def test_import_with_default_layout(self, tmp_path):
        path = tmp_path / "clip.csv"
        path.write_text("fps=30\n0,1,2,3,4,5\n6,7,8,9,10,11\n", encoding="utf-8")
        seq = load_motion_csv(path)
        assert seq.fps == 30.0
        assert seq.layout.joint_count == 2
        assert seq.layout.lateral_axis is None
        np.testing.assert_array_equal(seq.frames[1], np.arange(6, 12))

    def test_export_round_trip(self, tmp_path):
        frames = np.random.default_rng(4).normal(size=(5, 6))
        seq = make_seq(frames, fps=25.0)
        save_motion_csv(seq, tmp_path / "out.csv")
        np.testing.assert_array_equal(load_motion_csv(tmp_path / "out.csv").frames, frames)

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("fps=30\n0,1,2\n3,4\n", encoding="utf-8")
        with pytest.raises(MotionFormatError, match="ragged"):
            load_motion_csv(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "nohead.csv"
        path.write_text("0,1,2\n", encoding="utf-8")
        with pytest.raises(MotionFormatError):
            load_motion_csv(path)

    def test_non_finite_fps(self, tmp_path):
        for value in ("inf", "nan", "0"):
            path = tmp_path / f"fps_{value}.csv"
            path.write_text(f"fps={value}\n0,1,2\n", encoding="utf-8")
            with pytest.raises(MotionFormatError, match="invalid fps"):
                load_motion_csv(path)

    def test_sequence_rejects_infinite_fps(self):
        with pytest.raises(ValueError, match="finite"):
            make_seq(np.zeros((4, 3)), fps=float("inf"))


class TestListMotionFiles:

    def test_non_motion_file_named(self, tmp_path):
        save_motion(make_seq(np.zeros((2, 3))), tmp_path / "a.mot")
        (tmp_path / "notes.txt").write_text("hi", encoding="utf-8")
        with pytest.raises(DataError, match="notes.txt"):
            list_motion_files(tmp_path)

    def test_labels_file_allowed(self, tmp_path):
        save_motion(make_seq(np.zeros((2, 3))), tmp_path / "b.mot")
        save_motion(make_seq(np.zeros((2, 3))), tmp_path / "a.mot")
        (tmp_path / "labels.json").write_text(json.dumps({"a": "x"}), encoding="utf-8")
        assert [p.name for p in list_motion_files(tmp_path)] == ["a.mot", "b.mot"]

    def test_empty_directory(self, tmp_path):
        with pytest.raises(DataError, match="no motion files"):
            list_motion_files(tmp_path)


class TestMirror:

    def test_single_unpaired_joint(self):
        layout = JointLayout(joint_count=1, position_offsets=[0], lateral_axis="x", total_dims=3)
        out = mirror(make_seq([[1.0, 2.0, 3.0]], layout=layout))
        np.testing.assert_array_equal(out.frames, [[-1.0, 2.0, 3.0]])

    def test_pair_swap_then_negate(self):
        layout = JointLayout(
            joint_count=2, position_offsets=[0, 3], mirror_pairs=[(0, 1)], lateral_axis="x", total_dims=6,
        )
        out = mirror(make_seq([[1.0, 0, 0, 2.0, 0, 0]], layout=layout))
        np.testing.assert_array_equal(out.frames, [[-2.0, 0, 0, -1.0, 0, 0]])

    def test_involution(self):
        seq = synth_motion("random_smooth", 40, seed=5)
        twice = mirror(mirror(seq))
        np.testing.assert_array_equal(twice.frames, seq.frames)
        assert twice.fps == seq.fps

    def test_non_lateral_norm_preserved(self):
        seq = synth_motion("sine_walk", 30, seed=2)
        out = mirror(seq)
        keep = seq.layout.position_index()[:, 1:].ravel()
        np.testing.assert_allclose(
            np.linalg.norm(out.frames[:, keep], axis=1), np.linalg.norm(seq.frames[:, keep], axis=1),
        )

    def test_requires_mirror_metadata(self):
        with pytest.raises(DataError):
            mirror(make_seq(np.zeros((2, 3))))

    def test_augment_adds_twins(self):
        clips = synth_suite("sine_walk", 2, 8, seed=1)
        out = augment_with_mirrors(clips)
        assert len(out) == 4
        for clip_id in clips:
            np.testing.assert_array_equal(out[f"M{clip_id}"].frames, mirror(clips[clip_id]).frames)


class TestSplit:

    def test_default_ratios_on_20(self):
        ids = [f"c{i}" for i in range(20)]
        assert split_dataset(ids, (0.8, 0.15, 0.05), seed=0).sizes == (16, 3, 1)

    def test_all_train(self):
        ids = [f"c{i}" for i in range(7)]
        split = split_dataset(ids, (1.0, 0.0, 0.0), seed=3)
        assert sorted(split.train) == sorted(ids)
        assert split.val == [] and split.test == []

    def test_deterministic(self):
        ids = [f"c{i}" for i in range(50)]
        assert split_dataset(ids, (0.8, 0.15, 0.05), 9) == split_dataset(ids, (0.8, 0.15, 0.05), 9)

    def test_partition_property(self):
        for n in range(3, 1000, 37):
            ids = [str(i) for i in range(n)]
            split = split_dataset(ids, (0.8, 0.15, 0.05), seed=n)
            parts = split.train + split.val + split.test
            assert sorted(parts) == sorted(ids)
            assert len(set(parts)) == n

    def test_negative_ratio(self):
        with pytest.raises(ValueError):
            split_dataset(["a", "b"], (1.2, -0.2, 0.0), seed=0)


class TestSynthMotion:

    def test_constant_frames_identical(self):
        seq = synth_motion("constant", 12, seed=1)
        assert np.all(seq.frames == seq.frames[0])

    def test_cubic_third_difference(self):
        seq = synth_motion("cubic", 20, seed=4)
        d3 = np.diff(seq.frames, n=3, axis=0)
        assert np.all(d3 == d3[0])
        coeffs = d3[0] / 6.0
        assert set(np.unique(coeffs)) <= {1.0, 2.0, 3.0}

    def test_deterministic(self):
        a = synth_motion("sine_walk", 16, seed=8)
        b = synth_motion("sine_walk", 16, seed=8)
        np.testing.assert_array_equal(a.frames, b.frames)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown generator"):
            synth_motion("zigzag", 16, seed=0)

    def test_layout_is_builtin_skeleton(self):
        assert synth_motion("constant", 4, seed=0).layout == synth_layout()


class TestPatcher:

    def test_shapes(self):
        seq = make_seq(np.random.default_rng(0).normal(size=(8, 6)))
        lat = patch(seq, 4)
        assert (lat.length, lat.dim) == (2, 24)

    def test_round_trip_divisible(self):
        seq = make_seq(np.random.default_rng(1).normal(size=(8, 6)))
        back = unpatch(patch(seq, 4), 6, 8, fps=seq.fps, layout=seq.layout)
        np.testing.assert_array_equal(back.frames, seq.frames)

    def test_partial_window_padding(self):
        frames = np.random.default_rng(2).normal(size=(7, 3)) + 10.0
        seq = make_seq(frames)
        lat = patch(seq, 4)
        assert lat.length == 2
        np.testing.assert_array_equal(lat.codes[1, 9:], 0.0)
        np.testing.assert_array_equal(lat.codes[1, :9], frames[4:].ravel())
        back = unpatch(lat, 3, 7)
        assert back.length == 7
        np.testing.assert_array_equal(back.frames, frames)

    def test_dimension_mismatch(self):
        lat = patch(make_seq(np.zeros((8, 6))), 4)
        with pytest.raises(DataError):
            unpatch(lat, 3, 8)

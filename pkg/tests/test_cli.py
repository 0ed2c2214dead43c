# -*- coding: utf-8 -*-
"""
End-to-end runs through the command line: tokenize -> train-predictor -> generate -> eval -> plot
"""
import argparse
import json
import math
import shutil

import numpy as np
import pytest

from momask.cli.common import build_config
from momask.config import get_settings
from momask.main import main
from momask.services.motion_data import load_motion, save_motion, synth_motion


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def token_files(tok_dir):
    return sorted(p for p in (tok_dir / "tokens").glob("*.json") if p.name != "labels.json")


def tokenize(config_path, motion_dir, out, *extra) -> int:
    return main(["tokenize", "--config", str(config_path), "--motions", str(motion_dir), "--out", str(out), *extra])


def train(config_path, tok, out, *extra) -> int:
    return main(["train-predictor", "--config", str(config_path), "--tokenizer", str(tok), "--out", str(out), *extra])


def generate(config_path, tok, predictor, out, *extra) -> int:
    return main([
        "generate", "--config", str(config_path), "--tokenizer", str(tok),
        "--predictor", str(predictor), "--out", str(out), *extra,
    ])


@pytest.fixture
def trained(tmp_path, config_path, motion_dir):
    """Tokenizer and predictor outputs for the shared motion directory"""
    tok, pred = tmp_path / "tok", tmp_path / "pred"
    assert tokenize(config_path, motion_dir, tok) == 0
    assert train(config_path, tok, pred) == 0
    return tok, pred / "predictor.json"


class TestTokenize:

    def test_outputs(self, tmp_path, config_path, motion_dir):
        out = tmp_path / "tok"
        assert tokenize(config_path, motion_dir, out) == 0
        for name in ("codebooks.json", "mse_log.csv", "split.json", "manifest.json", "tokens/labels.json"):
            assert (out / name).exists(), name
        assert len(token_files(out)) == 6
        record = read_json(token_files(out)[0])
        assert len(record["tokens"]) == 3
        assert len(record["tokens"][0]) == 32 // 4

        manifest = read_json(out / "manifest.json")
        assert manifest["command"] == "tokenize"
        assert "paths" not in manifest["config"]
        assert "codebooks.json" in manifest["outputs"]

    def test_same_seed_same_codebooks(self, tmp_path, config_path, motion_dir):
        assert tokenize(config_path, motion_dir, tmp_path / "a", "--seed", "5") == 0
        assert tokenize(config_path, motion_dir, tmp_path / "b", "--seed", "5", "--jobs", "2") == 0
        a = read_json(tmp_path / "a" / "manifest.json")
        b = read_json(tmp_path / "b" / "manifest.json")
        assert a["outputs"]["codebooks.json"] == b["outputs"]["codebooks.json"]

    def test_residual_layers_lower_mse(self, tmp_path, config_path, motion_dir):
        assert tokenize(config_path, motion_dir, tmp_path / "v0", "--layers", "0") == 0
        assert tokenize(config_path, motion_dir, tmp_path / "v2", "--layers", "2") == 0
        mse0 = read_json(tmp_path / "v0" / "manifest.json")["log"]["final_mse"]
        mse2 = read_json(tmp_path / "v2" / "manifest.json")["log"]["final_mse"]
        assert mse2 <= mse0

    def test_non_motion_file(self, tmp_path, config_path, motion_dir, caplog):
        (motion_dir / "notes.txt").write_text("hello", encoding="utf-8")
        assert tokenize(config_path, motion_dir, tmp_path / "tok") == 3
        assert "notes.txt" in caplog.text

    def test_unknown_config_key(self, tmp_path, motion_dir):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"learning_rate": 0.1}), encoding="utf-8")
        assert tokenize(bad, motion_dir, tmp_path / "tok") == 2


class TestTrainPredictor:

    def test_writes_bundle(self, trained):
        tok, predictor = trained
        assert predictor.exists()
        manifest = read_json(predictor.parent / "manifest.json")
        assert manifest["log"]["rows"] == 6
        assert manifest["log"]["labels"] == ["walk", "wave"]
        assert manifest["log"]["residual_layers"] == [1, 2]

    def test_missing_tokenizer(self, tmp_path, config_path):
        assert train(config_path, tmp_path / "nowhere", tmp_path / "pred") == 4


class TestGenerate:

    def test_masked_counts_follow_schedule(self, tmp_path, config_path, trained):
        tok, predictor = trained
        out = tmp_path / "gen"
        assert generate(config_path, tok, predictor, out, "--cond", "walk", "--length", "60", "--iters", "10") == 0
        log = read_json(out / "decode_log.json")
        expected = [math.ceil(60 * math.cos(math.pi * (l / 10) / 2)) for l in range(1, 10)] + [0]
        assert log["masked_counts"] == expected
        assert log["base_passes"] == 10
        assert log["residual_passes"] == 2
        assert log["condition"] == "walk"

        seq = load_motion(out / "motions" / "generated.mot")
        assert seq.length == 60 * 4
        assert len(read_json(out / "generated_tokens.json")["tokens"]) == 3

    def test_inpaint_keeps_outside_region(self, tmp_path, config_path, trained):
        tok, predictor = trained
        source = token_files(tok)[0]
        out = tmp_path / "gen"
        assert generate(config_path, tok, predictor, out, "--inpaint", "2:5", "--input", str(source)) == 0
        before = np.array(read_json(source)["tokens"])
        after = np.array(read_json(out / "generated_tokens.json")["tokens"])
        keep = [0, 1, 5, 6, 7]
        np.testing.assert_array_equal(after[:, keep], before[:, keep])

    def test_inpaint_needs_input(self, tmp_path, config_path, trained):
        tok, predictor = trained
        assert generate(config_path, tok, predictor, tmp_path / "gen", "--inpaint", "2:5") == 3

    def test_bad_region(self, tmp_path, config_path, trained):
        tok, predictor = trained
        source = token_files(tok)[0]
        assert generate(config_path, tok, predictor, tmp_path / "gen", "--inpaint", "6:20", "--input", str(source)) == 3

    def test_missing_predictor(self, tmp_path, config_path, trained, caplog):
        tok, _ = trained
        assert generate(config_path, tok, tmp_path / "absent.json", tmp_path / "gen", "--length", "4") == 4
        assert "predictor file not found" in caplog.text

    def test_input_token_out_of_codebook(self, tmp_path, config_path, trained, caplog):
        tok, predictor = trained
        record = read_json(token_files(tok)[0])
        record["tokens"][0][0] = 999
        bad = tmp_path / "bad_tokens.json"
        bad.write_text(json.dumps(record), encoding="utf-8")
        assert generate(config_path, tok, predictor, tmp_path / "gen", "--inpaint", "2:5", "--input", str(bad)) == 3
        assert "token 999 out of range for layer 0" in caplog.text

    def test_unreadable_predictor(self, tmp_path, config_path, trained, caplog):
        tok, _ = trained
        bad = tmp_path / "predictor.json"
        bad.write_text("{not json", encoding="utf-8")
        assert generate(config_path, tok, bad, tmp_path / "gen", "--length", "8") == 4
        assert "cannot read predictor file" in caplog.text

    def test_unreadable_codebooks(self, tmp_path, config_path, trained):
        tok, predictor = trained
        (tok / "codebooks.json").write_text("{not json", encoding="utf-8")
        assert generate(config_path, tok, predictor, tmp_path / "gen", "--length", "8") == 4
        assert train(config_path, tok, tmp_path / "pred2") == 4

    def test_base_only(self, tmp_path, config_path, trained):
        tok, predictor = trained
        out = tmp_path / "gen"
        assert generate(config_path, tok, predictor, out, "--length", "5", "--base-only") == 0
        assert len(read_json(out / "generated_tokens.json")["tokens"]) == 1
        assert read_json(out / "decode_log.json")["residual_passes"] == 0

    def test_default_passes_with_five_residual_layers(self, tmp_path, config_path, motion_dir):
        tok, pred, out = tmp_path / "tok", tmp_path / "pred", tmp_path / "gen"
        assert tokenize(config_path, motion_dir, tok, "--layers", "5") == 0
        assert train(config_path, tok, pred) == 0
        assert generate(config_path, tok, pred / "predictor.json", out, "--cond", "wave", "--length", "8") == 0
        log = read_json(out / "decode_log.json")
        assert (log["base_passes"], log["residual_passes"], log["total_passes"]) == (10, 5, 15)

    def test_reruns_are_identical(self, tmp_path, config_path, trained):
        tok, predictor = trained
        args = ("--cond", "walk", "--length", "12", "--cfg", "0", "--temperature", "0.5")
        assert generate(config_path, tok, predictor, tmp_path / "a", *args) == 0
        assert generate(config_path, tok, predictor, tmp_path / "b", *args) == 0
        assert read_json(tmp_path / "a" / "manifest.json") == read_json(tmp_path / "b" / "manifest.json")


class TestSharedFlags:

    @pytest.fixture
    def env_seed(self, monkeypatch):
        monkeypatch.setenv("MOMASK_SEED", "7")
        get_settings.cache_clear()
        yield
        get_settings.cache_clear()

    def test_env_seed_reaches_decode(self, env_seed):
        config = build_config(argparse.Namespace(seed=None, jobs=None, config=None))
        assert config.seed == 7
        assert config.decode.seed == 7

    def test_flag_wins_over_env(self, env_seed):
        config = build_config(argparse.Namespace(seed=3, jobs=None, config=None), {"decode": {"seed": 3}})
        assert (config.seed, config.decode.seed) == (3, 3)

    def test_generate_manifest_records_env_seed(self, tmp_path, trained, env_seed):
        tok, predictor = trained
        out = tmp_path / "gen"
        assert main(["generate", "--tokenizer", str(tok), "--predictor", str(predictor),
                     "--out", str(out), "--length", "6"]) == 0
        assert read_json(out / "manifest.json")["seeds"] == {"seed": 7, "decode_seed": 7}


class TestEval:

    def test_identical_directories(self, tmp_path, motion_dir):
        out = tmp_path / "eval"
        assert main(["eval", "--pred", str(motion_dir), "--gt", str(motion_dir), "--out", str(out)]) == 0
        report = read_json(out / "report.json")
        assert report["mpjpe_mm"] == 0.0
        assert report["sjpe"] == 0.0
        assert report["fid"] < 1e-6
        assert "r_precision_top1" not in report
        assert len(list((out / "jerk").glob("*.csv"))) == 6

    def test_flat_prediction_is_static(self, tmp_path):
        pred_dir, gt_dir = tmp_path / "pred", tmp_path / "gt"
        for i in range(2):
            save_motion(synth_motion("constant", 12, seed=i), pred_dir / f"clip{i}.mot")
            save_motion(synth_motion("cubic", 12, seed=i), gt_dir / f"clip{i}.mot")
        out = tmp_path / "eval"
        assert main(["eval", "--pred", str(pred_dir), "--gt", str(gt_dir), "--out", str(out), "--noise-sigmas", "0,0.05"]) == 0
        report = read_json(out / "report.json")
        assert report["sjpe_static"] > report["sjpe_noise"]
        assert report["sjpe_noise"] == 0.0
        lines = (out / "noise_sensitivity.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "sigma,fid,sjpe,sjpe_noise,sjpe_static"
        assert len(lines) == 3

    def test_missing_ground_truth(self, tmp_path, motion_dir, caplog):
        gt_dir = tmp_path / "gt"
        gt_dir.mkdir()
        first = sorted(motion_dir.glob("*.mot"))[0]
        shutil.copy(first, gt_dir / "other.mot")
        assert main(["eval", "--pred", str(motion_dir), "--gt", str(gt_dir), "--out", str(tmp_path / "eval")]) == 3
        assert str(gt_dir / first.name) in caplog.text


class TestPlot:

    def test_renders_svgs(self, tmp_path, motion_dir):
        ev = tmp_path / "eval"
        assert main(["eval", "--pred", str(motion_dir), "--gt", str(motion_dir), "--out", str(ev)]) == 0
        out = tmp_path / "plots"
        assert main(["plot", "--csv", str(ev / "jerk"), "--out", str(out)]) == 0
        svgs = sorted(out.glob("*.svg"))
        assert len(svgs) == 6
        assert svgs[0].read_text(encoding="utf-8").lstrip().startswith("<?xml")

    def test_missing_directory(self, tmp_path):
        assert main(["plot", "--csv", str(tmp_path / "none"), "--out", str(tmp_path / "plots")]) == 3


class TestEndToEnd:

    @staticmethod
    def run_all(root, config_path, motion_dir):
        tok, pred, gen, ev = root / "tok", root / "pred", root / "gen", root / "eval"
        assert tokenize(config_path, motion_dir, tok) == 0
        assert train(config_path, tok, pred) == 0
        assert generate(config_path, tok, pred / "predictor.json", gen, "--cond", "walk", "--length", "8") == 0
        gt = root / "gt"
        first = sorted(motion_dir.glob("*.mot"))[0]
        gt.mkdir()
        shutil.copy(first, gt / "generated.mot")
        assert main(["eval", "--pred", str(gen / "motions"), "--gt", str(gt), "--out", str(ev)]) == 0
        return [read_json(d / "manifest.json") for d in (tok, pred, gen, ev)]

    def test_two_roots_match(self, tmp_path, config_path, motion_dir):
        a = self.run_all(tmp_path / "a", config_path, motion_dir)
        b = self.run_all(tmp_path / "b", config_path, motion_dir)
        assert a == b
        assert a[3]["metrics"]["mpjpe_mm"] > 0.0

# -*- coding: utf-8 -*-
"""
Pipeline Service - the tokenize / train-predictor / generate / eval stages
wired over files, plus run manifests.

Directory conventions:
    tokenize     -> codebooks.json, tokens/<clip>.json, tokens/labels.json, mse_log.csv, split.json
    train-pred.  -> predictor.json
    generate     -> generated_tokens.json, motions/generated.mot, decode_log.json
    eval         -> report.json, jerk/<clip>.csv, noise_sensitivity.csv
Every stage also writes manifest.json into its output directory.
"""
import csv
import hashlib
import json
import logging
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import pydantic
import scipy

from momask import __version__
from momask.config import Settings, get_settings
from momask.errors import DataError, ModelError
from momask.models import (
    ConditionRef, DecodeTrace, IntervalValue, JointLayout, MetricReport, MotionSequence,
    RunConfig, RunManifest, RvqConfig, TokenGrid,
)
from momask.services.masked_gen import inpaint, iterative_decode, parse_regions, region_mask, train_base_predictor
from momask.services.metrics import (
    EXTRACTOR_NAME, default_feature_extractor, diversity, fid, jerk_csv_rows,
    mean_confidence_interval, mpjpe, multimodality, noise_sensitivity, retrieval_metrics, sjpe_many,
)
from momask.services.motion_data import (
    augment_with_mirrors, list_motion_files, patch, read_any, save_motion, split_dataset, unpatch,
)
from momask.services.plotting import render_directory, write_jerk_csv
from momask.services.predictor import PredictorBundle
from momask.services.residual_gen import progressive_decode, train_residual
from momask.services.rvq import (
    check_token_range, codebook_perplexity, commitment_diagnostic, layer_mse_curve, load_stack, rvq_decode,
    rvq_encode, save_stack, train_rvq,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

LABELS_FILE = "labels.json"
STACK_FILE = "codebooks.json"
TOKENS_DIR = "tokens"
PREDICTOR_FILE = "predictor.json"
MANIFEST_FILE = "manifest.json"
MULTIMODALITY_R = 10


# ==================== File Helpers ====================

def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_json_atomic(path, data: Any) -> Path:
    """Write JSON to a temp file next to `path`, then os.replace it into place"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)
    return path


def read_labels(path) -> Dict[str, str]:
    """Optional clip id -> label map; missing file means no labels"""
    path = Path(path)
    if not path.exists():
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read labels {path}: {e}")
    if not isinstance(raw, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in raw.items()):
        raise DataError(f"{path} must map clip ids to label strings")
    return raw


def write_token_file(path, clip_id: str, grid: TokenGrid, frames: int, fps: float) -> Path:
    return write_json_atomic(path, {"id": clip_id, "frames": frames, "fps": fps, "tokens": grid.to_json()})


def read_token_file(path) -> Tuple[Dict[str, Any], TokenGrid]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            record = json.load(f)
        return record, TokenGrid(np.asarray(record["tokens"], dtype=np.int64))
    except OSError as e:
        raise DataError(f"cannot read token file {path}: {e}")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DataError(f"invalid token file {path}: {e}")


def write_rows_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def library_versions() -> Dict[str, str]:
    return {
        "momask": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


# ==================== Service ====================

class PipelineService:
    """Runs pipeline stages; holds process settings (units, default output root)"""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    @staticmethod
    def _map(fn: Callable[[T], R], items: Sequence[T], jobs: int) -> List[R]:
        """Ordered map, parallel across `jobs` threads"""
        if jobs <= 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))

    def load_clips(self, motion_dir, jobs: int = 1) -> Dict[str, MotionSequence]:
        files = list_motion_files(motion_dir)
        clips = self._map(read_any, files, jobs)
        items = {path.stem: seq for path, seq in zip(files, clips)}
        if len(items) != len(files):
            raise DataError(f"duplicate clip ids in {motion_dir} (same name, different extension)")
        logger.info(f"Loaded {len(items)} clips from {motion_dir}")
        return items

    @staticmethod
    def write_manifest(
        out_dir: Path,
        command: str,
        config: RunConfig,
        outputs: Iterable[Path],
        metrics: Optional[Dict[str, object]] = None,
        log: Optional[Dict[str, object]] = None,
    ) -> RunManifest:
        manifest = RunManifest(
            command=command,
            config=config.model_dump(mode="json", exclude={"paths"}),
            versions=library_versions(),
            seeds={"seed": config.seed, "decode_seed": config.decode.seed},
            outputs={p.relative_to(out_dir).as_posix(): sha256_file(p) for p in sorted(outputs)},
            metrics=metrics,
            log=log or {},
        )
        write_json_atomic(out_dir / MANIFEST_FILE, manifest.model_dump(mode="json"))
        logger.info(f"Manifest written to {out_dir / MANIFEST_FILE}")
        return manifest

    # ------------------------------------------------------------------
    # tokenize
    # ------------------------------------------------------------------

    def tokenize(self, config: RunConfig, motion_dir, out_dir) -> RunManifest:
        """Train the RVQ stack on the train split and tokenize every clip"""
        motion_dir, out_dir = Path(motion_dir), Path(out_dir)
        clips = self.load_clips(motion_dir, config.jobs)
        labels = read_labels(motion_dir / LABELS_FILE)

        first = next(iter(clips.values()))
        layout, fps = first.layout, first.fps
        for clip_id, seq in clips.items():
            if seq.layout != layout:
                raise DataError(f"clip {clip_id} uses a different joint layout")
            if seq.fps != fps:
                raise DataError(f"clip {clip_id} has fps {seq.fps}, expected {fps}")

        if config.augment_mirror:
            if layout.has_mirror:
                clips = augment_with_mirrors(clips)
                labels.update({f"M{k}": v for k, v in list(labels.items())})
            else:
                logger.warning("Mirror augmentation requested but the layout has no mirror metadata")

        ids = sorted(clips)
        split = split_dataset(ids, config.split_ratios, config.seed)
        train_ids = split.train or ids
        latents = dict(zip(ids, self._map(lambda i: patch(clips[i], config.stride), ids, config.jobs)))

        rvq_cfg = RvqConfig(code_dim=config.stride * layout.total_dims, **config.rvq.model_dump())
        stack, mse_log = train_rvq([latents[i] for i in train_ids], rvq_cfg, config.epochs, config.seed, config.batch_size)

        meta = {"stride": config.stride, "dims": layout.total_dims, "fps": fps, "layout": layout.model_dump(mode="json")}
        outputs = [out_dir / STACK_FILE]
        save_stack(stack, outputs[0], meta)

        traces = self._map(lambda i: rvq_encode(stack, latents[i]), ids, config.jobs)
        usage = np.zeros((stack.num_layers, rvq_cfg.codebook_size))
        for clip_id, trace in zip(ids, traces):
            outputs.append(write_token_file(
                out_dir / TOKENS_DIR / f"{clip_id}.json", clip_id, trace.tokens, clips[clip_id].length, fps,
            ))
            for v in range(stack.num_layers):
                usage[v] += np.bincount(trace.tokens.indices[v], minlength=rvq_cfg.codebook_size)
        if labels:
            outputs.append(write_json_atomic(out_dir / TOKENS_DIR / LABELS_FILE, labels))

        outputs.append(write_rows_csv(out_dir / "mse_log.csv", ["epoch", "mse"], [(e + 1, m) for e, m in enumerate(mse_log)]))
        outputs.append(write_json_atomic(out_dir / "split.json", split.model_dump(mode="json")))

        curves = np.mean([layer_mse_curve(stack, latents[i]) for i in ids], axis=0)
        log = {
            "final_mse": mse_log[-1],
            "mse_log": mse_log,
            "layer_mse": curves.tolist(),
            "commitment": float(np.mean([commitment_diagnostic(t, rvq_cfg.commitment_weight) for t in traces])),
            "perplexity": [codebook_perplexity(u) for u in usage],
            "clips": len(ids),
            "train_clips": len(train_ids),
        }
        logger.info(f"Tokenized {len(ids)} clips; final MSE {mse_log[-1]:.6g}")
        return self.write_manifest(out_dir, "tokenize", config, outputs, log=log)

    # ------------------------------------------------------------------
    # train-predictor
    # ------------------------------------------------------------------

    def train_predictor(self, config: RunConfig, tokenizer_dir, out_dir) -> RunManifest:
        """Fit the base count model and one residual model per layer from token files"""
        tokenizer_dir, out_dir = Path(tokenizer_dir), Path(out_dir)
        stack, _ = load_stack(tokenizer_dir / STACK_FILE)
        tokens_dir = tokenizer_dir / TOKENS_DIR
        if not tokens_dir.is_dir():
            raise DataError(f"token directory not found: {tokens_dir}")
        labels = read_labels(tokens_dir / LABELS_FILE)

        corpus: List[Tuple[TokenGrid, ConditionRef]] = []
        for path in sorted(tokens_dir.glob("*.json")):
            if path.name == LABELS_FILE:
                continue
            record, grid = read_token_file(path)
            if grid.num_layers != stack.num_layers:
                raise ModelError(f"{path} has {grid.num_layers} token rows, stack has {stack.num_layers} layers")
            corpus.append((grid, ConditionRef.of(labels.get(record.get("id", path.stem)))))
        if not corpus:
            raise DataError(f"no token files in {tokens_dir}")

        settings = config.predictor
        base = train_base_predictor(
            [(grid.indices[0], cond) for grid, cond in corpus],
            settings, config.seed, vocab_size=stack.layers[0].size, schedule=config.decode.schedule,
        )
        residual = train_residual(stack, corpus, settings.rremask, settings.alpha, settings.uncond_drop, config.seed)

        path = out_dir / PREDICTOR_FILE
        PredictorBundle(base, residual).save(path)
        log = {
            "rows": len(corpus),
            "labels": sorted(set(labels.values())),
            "base_contexts": len(base.tables),
            "residual_layers": sorted(residual),
        }
        return self.write_manifest(out_dir, "train-predictor", config, [path], log=log)

    # ------------------------------------------------------------------
    # generate
    # ------------------------------------------------------------------

    def generate(
        self,
        config: RunConfig,
        tokenizer_dir,
        predictor_path,
        out_dir,
        condition: Optional[str] = None,
        length: Optional[int] = None,
        regions: Optional[str] = None,
        input_tokens=None,
        base_only: bool = False,
    ) -> RunManifest:
        """
        Base row by iterative decoding (or inpainting), residual rows by
        progressive decoding, then back to motion space through the patcher.
        """
        out_dir = Path(out_dir)
        stack, meta = load_stack(Path(tokenizer_dir) / STACK_FILE)
        bundle = PredictorBundle.load(predictor_path)
        try:
            stride, dims, fps = int(meta["stride"]), int(meta["dims"]), float(meta["fps"])
            layout = JointLayout.model_validate(meta["layout"])
        except (KeyError, TypeError, ValueError) as e:
            raise ModelError(f"codebook stack is missing tokenizer metadata: {e}")

        cond = ConditionRef.of(condition)
        decode = config.decode
        trace = DecodeTrace()
        spans = None
        if regions is not None:
            if input_tokens is None:
                raise DataError("inpainting needs an input token file")
            spans = parse_regions(regions)
            _, source = read_token_file(input_tokens)
            check_token_range(stack, source.indices)
            n = source.length
            base = inpaint(bundle.base, source.indices[0], spans, cond, decode, trace=trace)
        else:
            if length is None or length < 1:
                raise DataError(f"generation length must be >= 1, got {length}")
            n = length
            base = iterative_decode(bundle.base, n, cond, decode, trace=trace)

        if base_only:
            grid, residual_passes = TokenGrid(base[None, :]), 0
        else:
            grid, residual_passes = progressive_decode(
                bundle.residual, stack, base, cond, decode.residual_cfg_scale,
                rng=np.random.default_rng([decode.seed, 1]), sample=decode.residual_sampling,
            )
            if spans is not None and source.num_layers == grid.num_layers:
                keep = ~region_mask(n, spans)
                grid.indices[:, keep] = source.indices[:, keep]

        lat = rvq_decode(stack, grid, stride=stride)
        seq = unpatch(lat, dims, n * stride, fps=fps, layout=layout)

        outputs = [
            write_token_file(out_dir / "generated_tokens.json", "generated", grid, seq.length, fps),
            out_dir / "motions" / "generated.mot",
        ]
        save_motion(seq, outputs[1])
        log = {
            "masked_counts": trace.masked_counts,
            "base_passes": trace.passes,
            "residual_passes": residual_passes,
            "total_passes": trace.passes + residual_passes,
            "noop": trace.noop,
            "condition": cond.key,
            "length": n,
        }
        outputs.append(write_json_atomic(out_dir / "decode_log.json", log))
        logger.info(f"Masked counts per iteration: {trace.masked_counts}")
        logger.info(f"Predictor passes: {trace.passes} base + {residual_passes} residual")
        return self.write_manifest(out_dir, "generate", config, outputs, log=log)

    # ------------------------------------------------------------------
    # eval
    # ------------------------------------------------------------------

    @staticmethod
    def match_files(pred_dir, gt_dir) -> List[Tuple[Path, Path]]:
        """Pair prediction and ground-truth files by clip id"""
        preds = {p.stem: p for p in list_motion_files(pred_dir)}
        gts = {p.stem: p for p in list_motion_files(gt_dir)}
        for stem, path in sorted(preds.items()):
            if stem not in gts:
                raise DataError(
                    f"missing ground truth for {path}: expected {Path(gt_dir) / (stem + path.suffix)}",
                    details={"path": str(Path(gt_dir) / (stem + path.suffix))},
                )
        extra = sorted(set(gts) - set(preds))
        if extra:
            raise DataError(f"ground truth without prediction: {gts[extra[0]]}", details={"path": str(gts[extra[0]])})
        return [(preds[s], gts[s]) for s in sorted(preds)]

    def evaluate(
        self,
        config: RunConfig,
        pred_dir,
        gt_dir,
        out_dir,
        pool_size: int = 32,
        repeats: int = 1,
        joint: Optional[int] = None,
        tokens_dir=None,
        noise_sigmas: Sequence[float] = (),
    ) -> RunManifest:
        """Metric report, per-clip jerk CSVs and optional noise-sensitivity sweep"""
        if repeats < 1:
            raise DataError(f"repeats must be >= 1, got {repeats}")
        out_dir = Path(out_dir)
        pairs = self.match_files(pred_dir, gt_dir)
        loaded = self._map(lambda pg: (read_any(pg[0]), read_any(pg[1])), pairs, config.jobs)
        preds = [p for p, _ in loaded]
        gts = [g for _, g in loaded]

        unit = self.settings.POSITION_UNIT_MM
        mpjpe_mm = float(np.mean([mpjpe(p, g, unit) for p, g in loaded]))
        sjpe_report = sjpe_many(preds, gts)
        pred_feats = np.stack(self._map(default_feature_extractor, preds, config.jobs))
        gt_feats = np.stack(self._map(default_feature_extractor, gts, config.jobs))
        fid_value = max(0.0, fid(gt_feats, pred_feats))

        labels = read_labels(Path(pred_dir) / LABELS_FILE)
        groups: Dict[str, List[np.ndarray]] = {}
        for (pred_path, _), feats in zip(pairs, pred_feats):
            if pred_path.stem in labels:
                groups.setdefault(labels[pred_path.stem], []).append(feats)
        mm_ready = bool(groups) and all(len(v) >= 2 * MULTIMODALITY_R for v in groups.values())

        m = len(pairs)
        samples: Dict[str, List[float]] = {}
        for k in range(repeats):
            seed = config.seed + k
            values: Dict[str, float] = {}
            if m >= pool_size:
                values.update(retrieval_metrics(gt_feats, pred_feats, pool_size, seed))
            if m >= 2:
                values["diversity"] = diversity(pred_feats, 300, seed)
            if mm_ready:
                values["multimodality"] = multimodality(
                    {label: np.stack(v) for label, v in groups.items()}, MULTIMODALITY_R, seed,
                )
            for name, value in values.items():
                samples.setdefault(name, []).append(value)
        if m < pool_size:
            logger.info(f"Skipping retrieval metrics: {m} pairs < pool size {pool_size}")
        if labels and not mm_ready:
            logger.info(f"Skipping multimodality: every label needs {2 * MULTIMODALITY_R} generations")

        intervals: Dict[str, IntervalValue] = {}
        if repeats > 1:
            intervals = {name: mean_confidence_interval(v) for name, v in samples.items()}

        perplexity = None
        if tokens_dir is not None:
            base_tokens = []
            for path in sorted(Path(tokens_dir).glob("*.json")):
                if path.name != LABELS_FILE:
                    base_tokens.append(read_token_file(path)[1].indices[0])
            if not base_tokens:
                raise DataError(f"no token files in {tokens_dir}")
            perplexity = codebook_perplexity(np.bincount(np.concatenate(base_tokens)))

        report = MetricReport(
            extractor=EXTRACTOR_NAME,
            mpjpe_mm=mpjpe_mm,
            fid=fid_value,
            sjpe=sjpe_report,
            codebook_perplexity=perplexity,
            intervals=intervals,
            **{name: float(np.mean(v)) for name, v in samples.items()},
        )

        outputs = [write_json_atomic(out_dir / "report.json", report.flat())]
        for (pred_path, _), (pred, gt) in zip(pairs, loaded):
            path = out_dir / "jerk" / f"{pred_path.stem}.csv"
            write_jerk_csv(jerk_csv_rows(pred, gt, joint), path)
            outputs.append(path)
        if noise_sigmas:
            rows = noise_sensitivity(gts, noise_sigmas, config.seed)
            header = ["sigma", "fid", "sjpe", "sjpe_noise", "sjpe_static"]
            outputs.append(write_rows_csv(out_dir / "noise_sensitivity.csv", header, [[r[h] for h in header] for r in rows]))

        logger.info(f"Evaluated {m} pairs: mpjpe {mpjpe_mm:.4f} mm, sJPE {sjpe_report.total:.4f}, FID {fid_value:.6g}")
        return self.write_manifest(out_dir, "eval", config, outputs, metrics=report.flat())

    # ------------------------------------------------------------------
    # plot
    # ------------------------------------------------------------------

    def plot(self, config: RunConfig, csv_dir, out_dir) -> RunManifest:
        out_dir = Path(out_dir)
        rendered = render_directory(csv_dir, out_dir)
        return self.write_manifest(out_dir, "plot", config, rendered, log={"plots": len(rendered)})


# ------------------------------------------------------------------
# Singleton
# ------------------------------------------------------------------

_pipeline_service: Optional[PipelineService] = None


def get_pipeline_service() -> PipelineService:
    """Get pipeline service singleton."""
    global _pipeline_service
    if _pipeline_service is None:
        _pipeline_service = PipelineService()
    return _pipeline_service

# -*- coding: utf-8 -*-
"""
Metrics Service - MPJPE, jerk, sJPE, FID, retrieval and diversity metrics.

FID here uses `default_feature_extractor`, a statistical descriptor. Its values
are not comparable with numbers from neural evaluators; reports carry the
extractor name.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter1d

from momask.errors import DataError
from momask.models import IntervalValue, JerkSeries, MotionSequence, SjpeReport
from momask.services.linalg import jacobi_eigh, sqrtm_psd

logger = logging.getLogger(__name__)

FEATURE_GROUPS = 16
FID_RIDGE = 1e-6
EXTRACTOR_NAME = "default"

FeatureExtractor = Callable[[MotionSequence], np.ndarray]


def _check_pair(pred: MotionSequence, gt: MotionSequence) -> None:
    if pred.length != gt.length:
        raise DataError(f"frame count mismatch: pred {pred.length}, gt {gt.length}")
    if pred.layout != gt.layout:
        raise DataError("pred and gt use different joint layouts")


# ==================== Position / Jerk ====================

def mpjpe(pred: MotionSequence, gt: MotionSequence, unit_mm: float = 1.0) -> float:
    """Mean per-joint position error in mm; `unit_mm` converts position units"""
    _check_pair(pred, gt)
    dist = np.linalg.norm(pred.positions() - gt.positions(), axis=-1)
    return float(dist.mean() * unit_mm)


def jerk(seq: MotionSequence) -> JerkSeries:
    """Third backward difference of joint positions times fps^3, norm over xyz"""
    if seq.length < 4:
        raise DataError(f"jerk needs at least 4 frames, got {seq.length}")
    p = seq.positions()
    d3 = (p[3:] - p[:-3]) - 3.0 * (p[2:-1] - p[1:-2])
    values = np.linalg.norm(d3, axis=-1) * seq.fps ** 3
    return JerkSeries(values=values, fps=seq.fps)


def sjpe_terms(pred_jerk: JerkSeries, gt_jerk: JerkSeries) -> Tuple[np.ndarray, np.ndarray]:
    """Per (frame, joint) overestimation and underestimation terms; 0/0 -> 0"""
    p, g = pred_jerk.values, gt_jerk.values
    if p.shape != g.shape:
        raise DataError(f"jerk series shape mismatch: pred {p.shape}, gt {g.shape}")
    denom = p + g
    safe = denom > 0
    noise = np.divide(np.maximum(p - g, 0.0), denom, out=np.zeros_like(denom), where=safe)
    static = np.divide(np.maximum(g - p, 0.0), denom, out=np.zeros_like(denom), where=safe)
    return noise, static


def _report(noise_terms: np.ndarray, static_terms: np.ndarray) -> SjpeReport:
    noise = min(float(noise_terms.mean()), 1.0) if noise_terms.size else 0.0
    static = min(float(static_terms.mean()), 1.0 - noise) if static_terms.size else 0.0
    return SjpeReport(total=noise + static, noise=noise, static=static)


def sjpe(pred_jerk: JerkSeries, gt_jerk: JerkSeries) -> SjpeReport:
    """
    Symmetric jerk percentage error averaged over frames and joints.

    noise collects frames where the prediction is jerkier than ground truth,
    static the frames where it is smoother; total is their sum.
    """
    return _report(*sjpe_terms(pred_jerk, gt_jerk))


def sjpe_many(preds: Sequence[MotionSequence], gts: Sequence[MotionSequence]) -> SjpeReport:
    """sJPE pooled over every (frame, joint) of several clip pairs"""
    if len(preds) != len(gts) or not preds:
        raise DataError(f"need matched non-empty lists, got {len(preds)} pred and {len(gts)} gt")
    noise, static = [], []
    for pred, gt in zip(preds, gts):
        _check_pair(pred, gt)
        n, s = sjpe_terms(jerk(pred), jerk(gt))
        noise.append(n.ravel())
        static.append(s.ravel())
    return _report(np.concatenate(noise), np.concatenate(static))


def jerk_csv_rows(pred: MotionSequence, gt: MotionSequence, joint: Optional[int] = None) -> List[Dict[str, object]]:
    """Rows (frame, gt_jerk, pred_jerk, term, sign); jerk is the joint mean unless `joint` is given"""
    _check_pair(pred, gt)
    pj, gj = jerk(pred), jerk(gt)
    if joint is None:
        p, g = pj.mean_over_joints(), gj.mean_over_joints()
    else:
        if not 0 <= joint < pred.layout.joint_count:
            raise DataError(f"joint {joint} out of range")
        p, g = pj.values[:, joint], gj.values[:, joint]

    rows = []
    for i, (pv, gv) in enumerate(zip(p, g)):
        denom = pv + gv
        term = abs(pv - gv) / denom if denom > 0 else 0.0
        sign = "noise" if pv > gv else ("static" if gv > pv else "zero")
        rows.append({
            "frame": i + 3,
            "gt_jerk": float(gv),
            "pred_jerk": float(pv),
            "term": float(term),
            "sign": sign,
        })
    return rows


# ==================== Distribution Metrics ====================

def frechet_distance(mu_a: np.ndarray, cov_a: np.ndarray, mu_b: np.ndarray, cov_b: np.ndarray) -> float:
    """
    ||mu_a - mu_b||^2 + Tr(cov_a + cov_b - 2 (cov_a cov_b)^(1/2)).

    The trace of the cross term is sum(sqrt(eig(S))) with
    S = cov_a^(1/2) cov_b cov_a^(1/2); negative eigenvalues clamp to 0.
    """
    mu_a, mu_b = np.atleast_1d(mu_a).astype(np.float64), np.atleast_1d(mu_b).astype(np.float64)
    cov_a, cov_b = np.atleast_2d(cov_a).astype(np.float64), np.atleast_2d(cov_b).astype(np.float64)
    if mu_a.shape != mu_b.shape or cov_a.shape != cov_b.shape or cov_a.shape != (mu_a.size, mu_a.size):
        raise DataError(
            f"dimension mismatch: mu {mu_a.shape}/{mu_b.shape}, cov {cov_a.shape}/{cov_b.shape}"
        )
    diff = mu_a - mu_b
    root_a = sqrtm_psd(cov_a)
    s = root_a @ cov_b @ root_a
    eig, _ = jacobi_eigh(s)
    cross = float(np.sum(np.sqrt(np.maximum(eig, 0.0))))
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * cross)


def feature_stats(feats: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and sample covariance; ridge added when there are fewer than F+1 rows"""
    feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    m, f = feats.shape
    if m < 1:
        raise DataError("empty feature set")
    mu = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False).reshape(f, f) if m > 1 else np.zeros((f, f))
    if m < f + 1:
        cov = cov + FID_RIDGE * np.eye(f)
    return mu, cov


def fid(feats_a: np.ndarray, feats_b: np.ndarray) -> float:
    feats_a, feats_b = np.atleast_2d(feats_a), np.atleast_2d(feats_b)
    if feats_a.shape[1] != feats_b.shape[1]:
        raise DataError(f"feature dims differ: {feats_a.shape[1]} vs {feats_b.shape[1]}")
    return frechet_distance(*feature_stats(feats_a), *feature_stats(feats_b))


def retrieval_metrics(
    cond_feats: np.ndarray,
    motion_feats: np.ndarray,
    pool_size: int = 32,
    seed: int = 0,
) -> Dict[str, float]:
    """
    R-precision top-1/2/3 and multimodal distance.

    Each motion ranks its own condition against pool_size-1 distractor
    conditions drawn from the other pairs. Ties count in favour of the true
    condition.
    """
    cond = np.atleast_2d(np.asarray(cond_feats, dtype=np.float64))
    motion = np.atleast_2d(np.asarray(motion_feats, dtype=np.float64))
    if cond.shape != motion.shape:
        raise DataError(f"condition/motion features differ in shape: {cond.shape} vs {motion.shape}")
    m = cond.shape[0]
    if pool_size < 1:
        raise ValueError(f"pool_size must be >= 1, got {pool_size}")
    if m < pool_size:
        raise DataError(f"retrieval needs at least {pool_size} pairs, got {m}")

    rng = np.random.default_rng(seed)
    true_dist = np.linalg.norm(motion - cond, axis=1)
    ranks = np.empty(m, dtype=np.int64)
    for i in range(m):
        others = rng.choice(m - 1, size=pool_size - 1, replace=False)
        others = others + (others >= i)
        d = np.linalg.norm(cond[others] - motion[i], axis=1)
        ranks[i] = 1 + int(np.sum(d < true_dist[i]))

    return {
        "r_precision_top1": float(np.mean(ranks <= 1)),
        "r_precision_top2": float(np.mean(ranks <= 2)),
        "r_precision_top3": float(np.mean(ranks <= 3)),
        "mm_dist": float(true_dist.mean()),
    }


def multimodality(generations: Dict[str, np.ndarray], r: int = 10, seed: int = 0) -> float:
    """Mean distance between two disjoint r-subsets of each condition's generations"""
    if not generations:
        raise DataError("multimodality needs at least one condition")
    rng = np.random.default_rng(seed)
    per_condition = []
    for key in sorted(generations):
        feats = np.atleast_2d(np.asarray(generations[key], dtype=np.float64))
        if feats.shape[0] < 2 * r:
            raise DataError(f"condition {key!r} has {feats.shape[0]} generations, need {2 * r}")
        order = rng.permutation(feats.shape[0])
        first, second = feats[order[:r]], feats[order[r:2 * r]]
        per_condition.append(np.linalg.norm(first - second, axis=1).mean())
    return float(np.mean(per_condition))


def diversity(features: np.ndarray, samples: int = 300, seed: int = 0) -> float:
    """Mean distance between two random disjoint index sets of equal size"""
    feats = np.atleast_2d(np.asarray(features, dtype=np.float64))
    size = min(samples, feats.shape[0] // 2)
    if size < 1:
        raise DataError(f"diversity needs at least 2 feature vectors, got {feats.shape[0]}")
    order = np.random.default_rng(seed).permutation(feats.shape[0])
    return float(np.linalg.norm(feats[order[:size]] - feats[order[size:2 * size]], axis=1).mean())


# ==================== Feature Extraction ====================

def _pool(values: np.ndarray, groups: int = FEATURE_GROUPS) -> np.ndarray:
    if values.size <= groups:
        return values
    return np.array([chunk.mean() for chunk in np.array_split(values, groups)])


def default_feature_extractor(seq: MotionSequence) -> np.ndarray:
    """
    Statistical descriptor: per-dim mean, std, mean |first difference| and
    per-joint mean jerk, each block pooled to at most 16 values.
    """
    frames = seq.frames
    blocks = [
        frames.mean(axis=0),
        frames.std(axis=0),
        np.abs(np.diff(frames, axis=0)).mean(axis=0),
        jerk(seq).values.mean(axis=0),
    ]
    return np.concatenate([_pool(block) for block in blocks])


def extract_features(seqs: Sequence[MotionSequence], extractor: FeatureExtractor = default_feature_extractor) -> np.ndarray:
    return np.stack([extractor(seq) for seq in seqs])


# ==================== Repeats / Sensitivity ====================

def mean_confidence_interval(values: Sequence[float]) -> IntervalValue:
    """Mean and 95% half-width 1.96*std/sqrt(R)"""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("no values")
    return IntervalValue(
        mean=float(values.mean()),
        conf95=float(1.96 * values.std() / math.sqrt(values.size)),
    )


def add_frame_noise(seq: MotionSequence, sigma: float, seed: int) -> MotionSequence:
    """Independent Gaussian noise on every joint coordinate of every frame"""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    frames = np.array(seq.frames)
    index = seq.layout.position_index().ravel()
    noise = np.random.default_rng(seed).normal(0.0, sigma, size=(seq.length, index.size))
    frames[:, index] += noise
    return seq.with_frames(frames)


def noise_sensitivity(
    seqs: Sequence[MotionSequence],
    sigmas: Sequence[float],
    seed: int = 0,
    extractor: FeatureExtractor = default_feature_extractor,
) -> List[Dict[str, float]]:
    """FID and sJPE between clean clips and noisy copies, one row per sigma"""
    clean_feats = extract_features(seqs, extractor)
    rows = []
    for k, sigma in enumerate(sigmas):
        noisy = [add_frame_noise(seq, sigma, seed + 1000 * k + i) for i, seq in enumerate(seqs)]
        report = sjpe_many(noisy, seqs)
        rows.append({
            "sigma": float(sigma),
            "fid": max(0.0, fid(clean_feats, extract_features(noisy, extractor))),
            "sjpe": report.total,
            "sjpe_noise": report.noise,
            "sjpe_static": report.static,
        })
        logger.info(f"sigma={sigma}: fid={rows[-1]['fid']:.6f} sjpe={report.total:.4f}")
    return rows


def fine_grained_trajectory(seq: MotionSequence, joint: int, sigma: float = 2.0) -> np.ndarray:
    """Joint trajectory minus its Gaussian-smoothed version, (T, 3)"""
    if not 0 <= joint < seq.layout.joint_count:
        raise DataError(f"joint {joint} out of range")
    traj = seq.positions()[:, joint, :]
    smooth = gaussian_filter1d(traj, sigma=sigma, axis=0, mode="nearest")
    return traj - smooth

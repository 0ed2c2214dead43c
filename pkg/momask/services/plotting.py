# -*- coding: utf-8 -*-
"""
Plot Service - jerk CSV files and their SVG renderings
"""
import csv
import logging
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from momask.errors import DataError  # noqa: E402

logger = logging.getLogger(__name__)

JERK_COLUMNS = ["frame", "gt_jerk", "pred_jerk", "term", "sign"]


def write_jerk_csv(rows: List[Dict[str, object]], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=JERK_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_jerk_csv(path) -> Dict[str, np.ndarray]:
    path = Path(path)
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != JERK_COLUMNS:
                raise DataError(f"{path}: expected columns {JERK_COLUMNS}, got {reader.fieldnames}")
            rows = list(reader)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}")
    try:
        return {
            "frame": np.array([int(r["frame"]) for r in rows]),
            "gt_jerk": np.array([float(r["gt_jerk"]) for r in rows]),
            "pred_jerk": np.array([float(r["pred_jerk"]) for r in rows]),
            "term": np.array([float(r["term"]) for r in rows]),
            "sign": np.array([r["sign"] for r in rows]),
        }
    except (KeyError, ValueError) as e:
        raise DataError(f"{path}: malformed row: {e}")


def render_jerk_svg(csv_path, svg_path) -> Path:
    """gt vs pred jerk; the gap is filled red where pred is jerkier, blue where it is smoother"""
    data = read_jerk_csv(csv_path)
    frame, gt, pred = data["frame"], data["gt_jerk"], data["pred_jerk"]

    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(frame, gt, color="black", linewidth=1.0, label="ground truth")
    ax.plot(frame, pred, color="tab:orange", linewidth=1.0, label="prediction")
    ax.fill_between(frame, gt, pred, where=pred > gt, color="tab:red", alpha=0.3, interpolate=True, label="noise")
    ax.fill_between(frame, gt, pred, where=pred < gt, color="tab:blue", alpha=0.3, interpolate=True, label="static")
    ax.set_xlabel("frame")
    ax.set_ylabel("jerk")
    ax.set_title(Path(csv_path).stem)
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()

    svg_path = Path(svg_path)
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    # fixed hash salt and no date keep reruns byte-identical
    with plt.rc_context({"svg.hashsalt": "momask"}):
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg_path


def render_directory(csv_dir, out_dir) -> List[Path]:
    """Render every *.csv under `csv_dir` to `out_dir/<name>.svg`"""
    csv_dir = Path(csv_dir)
    if not csv_dir.is_dir():
        raise DataError(f"plot input directory not found: {csv_dir}")
    paths = sorted(csv_dir.glob("*.csv"))
    if not paths:
        raise DataError(f"no jerk CSV files in {csv_dir}")
    rendered = [render_jerk_svg(p, Path(out_dir) / f"{p.stem}.svg") for p in paths]
    logger.info(f"Rendered {len(rendered)} plots into {out_dir}")
    return rendered

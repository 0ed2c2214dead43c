# -*- coding: utf-8 -*-
"""
K-Means - k-means++ seeding and Lloyd iterations used to initialize codebooks
"""
import logging

import numpy as np

logger = logging.getLogger(__name__)

# Upper bound on floats materialized per distance chunk
_CHUNK_FLOATS = 1 << 22


def squared_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """
    Exact (M, K) squared Euclidean distances.

    Computed as sum((x - c)^2) rather than the |x|^2 - 2xc + |c|^2 expansion so
    that exact matches give exactly 0 and ties compare equal.
    """
    x = np.asarray(x, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    out = np.empty((x.shape[0], centers.shape[0]))
    rows = max(1, _CHUNK_FLOATS // max(1, centers.shape[0] * centers.shape[1]))
    for start in range(0, x.shape[0], rows):
        block = x[start:start + rows]
        diff = block[:, None, :] - centers[None, :, :]
        out[start:start + rows] = np.einsum("mkd,mkd->mk", diff, diff)
    return out


def assign(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest center per row; ties go to the lowest index"""
    return np.argmin(squared_distances(x, centers), axis=1)


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding; falls back to uniform picks once every point is covered"""
    m = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(m)]
    closest = squared_distances(x, centers[:1])[:, 0]
    for i in range(1, k):
        total = closest.sum()
        if total > 0:
            pick = rng.choice(m, p=closest / total)
        else:
            pick = rng.integers(m)
        centers[i] = x[pick]
        closest = np.minimum(closest, squared_distances(x, centers[i:i + 1])[:, 0])
    return centers


def kmeans(x: np.ndarray, k: int, rng: np.random.Generator, max_iters: int = 50) -> np.ndarray:
    """
    Lloyd's algorithm from a k-means++ start.

    Args:
        x: (M, d) data
        k: number of centers
        rng: seeded generator (only the seeding consumes randomness)
        max_iters: iteration cap

    Returns:
        (k, d) centers; a center that loses all its points keeps its position
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"k-means needs at least one data vector, got shape {x.shape}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")

    centers = kmeans_plus_plus(x, k, rng)
    labels = None
    for it in range(max_iters):
        new_labels = assign(x, centers)
        if labels is not None and np.array_equal(new_labels, labels):
            logger.debug(f"k-means converged after {it} iterations (k={k})")
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        filled = counts > 0
        centers[filled] = sums[filled] / counts[filled, None]
    return centers

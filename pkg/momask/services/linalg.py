# -*- coding: utf-8 -*-
"""
Symmetric eigensolver (cyclic Jacobi) and PSD matrix square roots
"""
import logging
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps every (p, q) pair until the off-diagonal Frobenius norm drops below
    tol * max(1, ||A||_F) or `max_sweeps` is reached.

    Returns:
        eigenvalues (unsorted) and eigenvectors as columns
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))

    for sweep in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app, aqq = a[p, p], a[q, q]
                g = 100.0 * abs(apq)
                # below the precision of both diagonal entries: zero it without rotating
                if sweep > 3 and abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    a[p, q] = a[q, p] = 0.0
                    continue
                h = aqq - app
                if abs(h) + g == abs(h):
                    t = apq / h
                else:
                    theta = 0.5 * h / apq
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        logger.warning(f"Jacobi eigensolver hit {max_sweeps} sweeps without converging")

    return np.diag(a).copy(), v


def sqrtm_psd(a: np.ndarray) -> np.ndarray:
    """Symmetric square root; negative eigenvalues clamp to 0"""
    values, vectors = jacobi_eigh(a)
    return (vectors * np.sqrt(np.maximum(values, 0.0))) @ vectors.T

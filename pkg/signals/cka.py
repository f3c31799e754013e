"""
Linear centered kernel alignment between two token-by-feature matrices.

Rows are tokens (examples), columns are features. Both matrices are
column-centered, then

    CKA(X, Y) = ||Yc^T Xc||_F^2 / (||Xc^T Xc||_F * ||Yc^T Yc||_F)

which equals HSIC(K, L) / sqrt(HSIC(K, K) HSIC(L, L)) for linear kernels.
A matrix whose centered form vanishes has no variance to align: two such
inputs score 1, one scores 0.
"""

import numpy as np

from models.errors import RejectedInputError
from numerics import as_matrix

# Centered norm at or below this fraction of the raw norm counts as zero variance.
DEGENERATE_RTOL = 1e-12


def center_columns(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=0, keepdims=True)


def _is_degenerate(x: np.ndarray, xc: np.ndarray) -> bool:
    scale = max(float(np.linalg.norm(x)), np.finfo(np.float64).tiny)
    return float(np.linalg.norm(xc)) <= DEGENERATE_RTOL * scale


def cka(x, y) -> float:
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape != y.shape:
        raise RejectedInputError(f"CKA needs equal shapes, got {x.shape} and {y.shape}")
    if x.shape[0] < 2:
        raise RejectedInputError(f"CKA needs at least 2 rows, got {x.shape[0]}")

    xc, yc = center_columns(x), center_columns(y)
    x_flat, y_flat = _is_degenerate(x, xc), _is_degenerate(y, yc)
    if x_flat and y_flat:
        return 1.0
    if x_flat or y_flat:
        return 0.0

    cross = np.linalg.norm(yc.T @ xc, ord='fro') ** 2
    norm_x = np.linalg.norm(xc.T @ xc, ord='fro')
    norm_y = np.linalg.norm(yc.T @ yc, ord='fro')
    return float(np.clip(cross / (norm_x * norm_y), 0.0, 1.0))

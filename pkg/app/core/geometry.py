"""Euclidean distance geometry shared by mining, losses and evaluation."""
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from app.core.errors import MalformedInputError


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise MalformedInputError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise MalformedInputError(f"{name} has non-finite entries")
    return arr


def l2_distance(u, v) -> float:
    """
    Euclidean distance between two vectors.

    Args:
        u: First vector
        v: Second vector of the same length

    Returns:
        float: ||u - v||_2
    """
    a = _as_vector(u, "u")
    b = _as_vector(v, "v")
    if a.shape != b.shape:
        raise MalformedInputError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(np.linalg.norm(a - b))


def distance_matrix(x: np.ndarray) -> np.ndarray:
    """All-pairs l2 distances of the rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise MalformedInputError(f"expected a 2-D matrix, got shape {x.shape}")
    d = cdist(x, x, metric="euclidean")
    np.fill_diagonal(d, 0.0)
    return d


def pairwise_distances(s: Union["EmbeddingSet", np.ndarray]) -> np.ndarray:  # noqa: F821
    """
    N x N distance matrix of an embedding snapshot.

    The result is symmetric with a zero diagonal.
    """
    rows = s.embeddings if hasattr(s, "embeddings") else s
    return distance_matrix(rows)


# Distances closer than this fraction of the largest one rank as ties
TIE_RTOL = 1e-9


def snap_distances(d: np.ndarray, rtol: float = TIE_RTOL) -> np.ndarray:
    """
    Integer ranking keys for a distance array.

    Each distance is rounded to a multiple of ``rtol`` times the largest
    finite distance, so equal keys mark ties and the keys are unchanged
    when every distance is multiplied by the same positive constant.
    Infinite entries stay infinite.
    """
    d = np.asarray(d, dtype=np.float64)
    finite = d[np.isfinite(d)]
    top = float(finite.max()) if finite.size else 0.0
    if top <= 0.0:
        return np.where(np.isfinite(d), 0.0, d)
    return np.round(d / (rtol * top))

"""Zero-shot retrieval and clustering metrics: Recall@K and NMI."""
import logging
import warnings
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning
from sklearn.metrics import mutual_info_score, normalized_mutual_info_score

from app.core.errors import InsufficientDataError, MalformedInputError
from app.core.geometry import pairwise_distances, snap_distances
from app.models.embedding import EmbeddingSet
from app.models.report import EvalReport

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 2, 4, 8)
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 100
# Mutual information below this is treated as exactly zero
MI_ZERO = 1e-12


@dataclass(frozen=True)
class Clustering:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float


def neighbor_ranking(s: EmbeddingSet) -> np.ndarray:
    """
    For every row, all other rows ordered by snapped distance (ties by index).

    Returns an N x (N-1) index matrix; a row never ranks itself.
    """
    if len(s) < 2:
        raise InsufficientDataError(f"retrieval needs at least 2 embeddings, got {len(s)}")
    keys = snap_distances(pairwise_distances(s))
    np.fill_diagonal(keys, np.inf)
    order = np.argsort(keys, axis=1, kind="stable")
    return order[:, :-1]


def recall_at_ks(s: EmbeddingSet, ks: Sequence[int]) -> Dict[int, float]:
    """Recall@K for several K from one neighbour ranking."""
    if any(k < 1 for k in ks):
        raise MalformedInputError(f"K must be >= 1, got {list(ks)}")
    ranking = neighbor_ranking(s)
    same = s.fine[ranking] == s.fine[:, None]
    hits_by_depth = np.logical_or.accumulate(same, axis=1)
    depth = ranking.shape[1]
    return {int(k): float(hits_by_depth[:, min(k, depth) - 1].mean()) for k in ks}


def recall_at_k(s: EmbeddingSet, k: int) -> float:
    """Fraction of queries with a same-fine-class sample among their K nearest neighbours."""
    return recall_at_ks(s, [k])[k]


def kmeans(s: EmbeddingSet, k_clusters: int, seed: int = 0) -> Clustering:
    """
    Seeded k-means++ with Lloyd iterations, best inertia over 10 restarts.

    Args:
        s: Embeddings to cluster
        k_clusters: Number of clusters, 1 <= k_clusters <= N
        seed: Seed of the initialisations
    """
    if not 1 <= k_clusters <= len(s):
        raise MalformedInputError(f"k_clusters must be in [1, {len(s)}], got {k_clusters}")
    model = KMeans(
        n_clusters=k_clusters,
        init="k-means++",
        n_init=KMEANS_RESTARTS,
        max_iter=KMEANS_MAX_ITER,
        algorithm="lloyd",
        random_state=seed,
    )
    with warnings.catch_warnings():
        # fewer distinct points than clusters is legal here
        warnings.simplefilter("ignore", ConvergenceWarning)
        labels = model.fit_predict(s.embeddings)
    return Clustering(
        labels=labels.astype(np.int64),
        centers=model.cluster_centers_,
        inertia=float(model.inertia_),
    )


def nmi(assignment: Sequence, labels: Sequence) -> float:
    """
    Normalised mutual information with the geometric-mean normalisation.

    Returns 1 when both partitions are a single block and 0 whenever the
    mutual information vanishes.
    """
    a = np.asarray(assignment)
    y = np.asarray(labels)
    if a.shape != y.shape or a.ndim != 1 or a.size == 0:
        raise MalformedInputError(
            f"assignment and labels must be equal-length non-empty sequences, got {a.shape} and {y.shape}"
        )
    if np.unique(a).size == 1 and np.unique(y).size == 1:
        return 1.0
    if mutual_info_score(y, a) <= MI_ZERO:
        return 0.0
    value = normalized_mutual_info_score(y, a, average_method="geometric")
    return float(np.clip(value, 0.0, 1.0))


def evaluate(s: EmbeddingSet, ks: Sequence[int] = DEFAULT_KS, seed: int = 0) -> EvalReport:
    """Recall@K for every K and NMI of a k-means clustering with one cluster per fine class."""
    classes = np.unique(s.fine).size
    if classes < 2:
        raise InsufficientDataError(f"NMI needs at least 2 fine classes, got {classes}")
    recalls = recall_at_ks(s, ks)
    clusters = kmeans(s, classes, seed)
    report = EvalReport(recall_at=recalls, nmi=nmi(clusters.labels, s.fine), n_queries=len(s))
    logger.debug("evaluated %d queries: %s", len(s), report)
    return report

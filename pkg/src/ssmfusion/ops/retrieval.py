import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from ssmfusion.models import KernelParams, LabeledCollection, PRCurve, SnfParams, SquareMatrix
from ssmfusion.ops.kernel import gaussian_similarity
from ssmfusion.ops.snf import snf_fuse

logger = logging.getLogger(__name__)


def _rankings(collection: LabeledCollection) -> np.ndarray:
    """(n, n-1) array, row q holds the ranking of all items except q. Ties go to the lower index."""
    key = np.array(collection.matrix.values, dtype=np.float64)
    if not collection.ascending:
        key = -key
    n = key.shape[0]
    order = np.argsort(key, axis=1, kind="stable")
    # Drop the query by index, +inf entries can sort after it
    keep = order != np.arange(n)[:, None]
    return order[keep].reshape(n, n - 1)


def rank_items(query: int, collection: LabeledCollection) -> List[int]:
    """Rank all other items by increasing distance (or decreasing similarity) from the query.

    Args:
        query: Index of the query item. It is left out of its own ranking.
        collection: The labeled collection.

    Returns:
        List[int]: The n-1 other indices, best first.
    """
    if not 0 <= query < collection.n:
        raise ValueError(f"query {query} out of range for {collection.n} items")

    row = np.array(collection.matrix.values[query], dtype=np.float64)
    others = np.delete(np.arange(collection.n), query)
    key = row[others] if collection.ascending else -row[others]
    return others[np.argsort(key, kind="stable")].tolist()


def _curve_from_hits(hits: np.ndarray) -> PRCurve:
    positions = np.flatnonzero(hits) + 1
    R = positions.size
    i = np.arange(1, R + 1)
    return PRCurve(recalls=(i / R).tolist(), precisions=(i / positions).tolist())


def _check_query_class(query: int, collection: LabeledCollection) -> None:
    label = collection.labels[query]
    if collection.labels.count(label) < 2:
        raise ValueError(f"class {label!r} of query {query} is a singleton: no relevant items")


def precision_recall(query: int, collection: LabeledCollection) -> PRCurve:
    """Precision-recall curve of one query, with one point per relevant item.

    The i-th point has recall i / R and precision i / (rank of the i-th relevant item).

    Raises:
        ValueError: If the query's class has no other member.
    """
    ranking = rank_items(query, collection)
    _check_query_class(query, collection)
    labels = np.array(collection.labels)
    return _curve_from_hits(labels[ranking] == labels[query])


def average_precision(query: int, collection: LabeledCollection) -> float:
    """Mean precision at the relevant items of one query."""
    return precision_recall(query, collection).average_precision


def average_precisions(collection: LabeledCollection) -> np.ndarray:
    """Average precision of every query, in query order.

    Raises:
        ValueError: If any class has fewer than two members.
    """
    for label, size in collection.class_sizes().items():
        if size < 2:
            raise ValueError(f"class {label!r} is a singleton: no relevant items")

    labels = np.array(collection.labels)
    hits = labels[_rankings(collection)] == labels[:, None]
    cum = np.cumsum(hits, axis=1)
    ranks = np.arange(1, collection.n)
    R = hits.sum(axis=1)
    return np.where(hits, cum / ranks, 0.0).sum(axis=1) / R


def mean_average_precision(collection: LabeledCollection) -> float:
    """Mean over all queries of the per-query average precision."""
    return float(np.mean(average_precisions(collection)))


def per_class_map(collection: LabeledCollection) -> Dict[str, float]:
    """Mean average precision over the queries of each class, keyed by class id."""
    aps = average_precisions(collection)
    labels = np.array(collection.labels)
    return {str(c): float(np.mean(aps[labels == c])) for c in np.unique(labels)}


def mean_pr_curve(collection: LabeledCollection) -> PRCurve:
    """Average the per-query precision-recall curves.

    If every query has the same number of relevant items, precisions are averaged point by point. Otherwise, for
    every distinct recall level r, each query contributes its precision at its smallest recall >= r.
    """
    curves = [precision_recall(q, collection) for q in range(collection.n)]
    lengths = {len(c.recalls) for c in curves}

    if len(lengths) == 1:
        precisions = np.mean([c.precisions for c in curves], axis=0)
        return PRCurve(recalls=curves[0].recalls, precisions=precisions.tolist())

    levels = np.unique(np.concatenate([c.recalls for c in curves]))
    sampled = []
    for c in curves:
        recalls = np.array(c.recalls)
        idx = np.searchsorted(recalls, levels - 1e-12, side="left")
        sampled.append(np.array(c.precisions)[idx])
    return PRCurve(recalls=levels.tolist(), precisions=np.mean(sampled, axis=0).tolist())


def downstream_fuse(
    mus: Sequence[SquareMatrix],
    kernel_params: Optional[KernelParams] = None,
    snf_params: Optional[SnfParams] = None,
) -> SquareMatrix:
    """Fuse object-level distance matrices into one object-level similarity.

    Every distance matrix goes through the autotuned Gaussian kernel, then all kernels are fused by SNF.

    Args:
        mus: M >= 2 object-level distance matrices over the same items.
        kernel_params: Kernel parameters. Default is kappa=0.1, beta=0.5.
        snf_params: Fusion parameters. Default is kappa=0.1, T=20.

    Returns:
        SquareMatrix: Fused object-level similarity, kind "fused".
    """
    if len(mus) < 2:
        raise ValueError(f"need at least two modalities, got {len(mus)}")
    sizes = {mu.n for mu in mus}
    if len(sizes) != 1:
        raise ValueError(f"size mismatch: matrices of sizes {sorted(sizes)}")

    logger.info("Downstream fusion of %d object-level matrices over %d items", len(mus), mus[0].n)
    return snf_fuse([gaussian_similarity(mu, kernel_params) for mu in mus], snf_params)

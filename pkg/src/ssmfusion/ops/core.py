from typing import Callable, Optional, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform
from skimage.transform import warp

from ssmfusion.models import SquareMatrix, TimeOrderedPointCloud

DEFAULT_COMMON_DIM = 256

Metric = Callable[[np.ndarray, np.ndarray], float]


def _as_topc(topc: Union[TimeOrderedPointCloud, np.ndarray]) -> TimeOrderedPointCloud:
    if isinstance(topc, TimeOrderedPointCloud):
        return topc
    arr = np.asarray(topc, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty input")
    return TimeOrderedPointCloud(points=arr)


def _values(m: Union[SquareMatrix, np.ndarray]) -> np.ndarray:
    return m.values if isinstance(m, SquareMatrix) else np.asarray(m, dtype=np.float64)


def pairwise_distance_matrix(
    topc: Union[TimeOrderedPointCloud, np.ndarray],
    metric: Optional[Metric] = None,
) -> SquareMatrix:
    """Compute the self-similarity matrix D_ij = rho(X_i, X_j) of a time-ordered point cloud.

    Args:
        topc: The point cloud, or an (N, d) array of points.
        metric: Distance callback taking two points. Default is the Euclidean distance.

    Returns:
        SquareMatrix: N x N distance matrix.

    Raises:
        ValueError: If the point cloud is empty.
    """
    points = _as_topc(topc).points
    d = pdist(points, "euclidean") if metric is None else pdist(points, metric)
    return SquareMatrix(values=squareform(d, checks=False), kind="distance")


def resize_matrix(m: SquareMatrix, target_n: int = DEFAULT_COMMON_DIM) -> SquareMatrix:
    """Resize a square matrix by bilinear interpolation on a corner-aligned grid, so that entry (0, 0) maps to (0, 0)
    and entry (n-1, n-1) to (target_n-1, target_n-1).

    Args:
        m: The matrix to resize, at least 2 x 2.
        target_n: Output side length, at least 2.

    Returns:
        SquareMatrix: target_n x target_n matrix of the same kind. Distance matrices keep a zero diagonal.
    """
    if target_n < 2:
        raise ValueError(f"target_n must be at least 2, got {target_n}.")
    if m.n < 2:
        raise ValueError(f"Cannot resize a {m.n}x{m.n} matrix.")
    if target_n == m.n:
        return m

    grid = np.linspace(0.0, m.n - 1, target_n)
    coords = np.stack(np.meshgrid(grid, grid, indexing="ij"))
    out = warp(m.values, coords, order=1, mode="edge", clip=False, preserve_range=True)
    if m.kind == "distance":
        np.fill_diagonal(out, 0.0)
    return SquareMatrix(values=out, kind=m.kind)


def frobenius_distance(a: Union[SquareMatrix, np.ndarray], b: Union[SquareMatrix, np.ndarray]) -> float:
    """Frobenius norm of the entrywise difference of two equally sized matrices."""
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise ValueError(f"size mismatch: {va.shape} vs {vb.shape}")
    return float(np.linalg.norm(va - vb))

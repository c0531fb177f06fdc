import math
from typing import Optional

import numpy as np

from ssmfusion.models import KernelParams, SquareMatrix


def neighbor_count(kappa: float, n: int) -> int:
    """Number of nearest neighbors, ceil(kappa * n), excluding the point itself.

    The product is rounded to 9 decimals first so that e.g. 0.1 * 30 yields 3, and the result is clamped to n - 1.

    Raises:
        ValueError: If no neighbor remains.
    """
    k = min(math.ceil(round(kappa * n, 9)), n - 1)
    if k < 1:
        raise ValueError(f"no neighbors: kappa={kappa} with {n} points")
    return k


def nearest_neighbors(d: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest neighbors of every row, excluding the row itself. Ties go to the lower index."""
    masked = np.array(d, dtype=np.float64)
    np.fill_diagonal(masked, np.inf)
    return np.argsort(masked, axis=1, kind="stable")[:, :k]


def autotuned_sigma(d: SquareMatrix, params: Optional[KernelParams] = None) -> SquareMatrix:
    """Neighbor-adaptive kernel bandwidths.

    sigma_ij = beta / 3 * (mean distance of i to its ceil(kappa N) nearest neighbors
                           + the same mean for j
                           + rho(x_i, x_j))

    Args:
        d: Distance matrix of at least two points.
        params: Kernel parameters. Default is kappa=0.1, beta=0.5.

    Returns:
        SquareMatrix: Symmetric matrix of bandwidths, kind "bandwidth".
    """
    params = params or KernelParams()
    if d.n < 2:
        raise ValueError(f"At least two points are required, got {d.n}.")

    D = d.values
    k = neighbor_count(params.kappa, d.n)
    nbrs = nearest_neighbors(D, k)
    mean_nn = np.take_along_axis(D, nbrs, axis=1).mean(axis=1)

    sigma = (params.beta / 3.0) * (mean_nn[:, None] + mean_nn[None, :] + D)
    return SquareMatrix(values=sigma, kind="bandwidth")


def similarity_kernel(d: SquareMatrix, sigma: SquareMatrix) -> SquareMatrix:
    """Gaussian similarity W_ij = exp(-rho_ij^2 / sigma_ij), with W_ij = 1 wherever rho_ij = 0.

    Args:
        d: Distance matrix.
        sigma: Bandwidths of the same size, positive wherever the distance is positive.

    Returns:
        SquareMatrix: Similarity matrix with entries in (0, 1] and ones on the diagonal.
    """
    if d.n != sigma.n:
        raise ValueError(f"size mismatch: distance is {d.n}x{d.n}, sigma is {sigma.n}x{sigma.n}")

    D, S = d.values, sigma.values
    apart = D > 0
    np.fill_diagonal(apart, False)
    if np.any(S[apart] <= 0):
        raise ValueError("sigma must be positive at every off-diagonal entry with a positive distance.")

    W = np.ones_like(D)
    W[apart] = np.exp(-(D[apart] ** 2) / S[apart])
    return SquareMatrix(values=W, kind="similarity")


def gaussian_similarity(d: SquareMatrix, params: Optional[KernelParams] = None) -> SquareMatrix:
    """Autotuned bandwidths followed by the Gaussian kernel."""
    return similarity_kernel(d, autotuned_sigma(d, params))

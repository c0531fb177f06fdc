import logging
from typing import List, Optional, Sequence

import numpy as np

from ssmfusion.models import SnfParams, SquareMatrix
from ssmfusion.ops.kernel import neighbor_count

logger = logging.getLogger(__name__)


def _off_diagonal(w: SquareMatrix) -> np.ndarray:
    off = np.array(w.values, dtype=np.float64)
    np.fill_diagonal(off, 0.0)
    return off


def full_transition(w: SquareMatrix) -> SquareMatrix:
    """Normalize a similarity matrix into a transition matrix that keeps half of each row's mass on the diagonal.

    P_ij = W_ij / (2 * sum_{k != i} W_ik) for j != i, and P_ii = 1/2.

    Raises:
        ValueError: If a row has no off-diagonal mass.
    """
    off = _off_diagonal(w)
    mass = off.sum(axis=1)
    isolated = np.flatnonzero(mass <= 0)
    if isolated.size:
        raise ValueError(f"isolated node(s) {isolated.tolist()}: no off-diagonal similarity")

    P = off / (2.0 * mass[:, None])
    np.fill_diagonal(P, 0.5)
    return SquareMatrix(values=P, kind="transition")


def masked_transition(w: SquareMatrix, kappa: float = 0.1) -> SquareMatrix:
    """Transition matrix restricted to each row's ceil(kappa N) most similar columns, excluding the row itself.

    S_ij = W_ij / sum_{k in N_i} W_ik for j in N_i, 0 otherwise. Ties go to the lower index.

    Raises:
        ValueError: If a row has no mass inside its neighborhood.
    """
    off = _off_diagonal(w)
    n = w.n
    k = neighbor_count(kappa, n)

    ranked = np.array(off)
    np.fill_diagonal(ranked, -np.inf)
    nbrs = np.argsort(-ranked, axis=1, kind="stable")[:, :k]

    vals = np.take_along_axis(off, nbrs, axis=1)
    mass = vals.sum(axis=1)
    isolated = np.flatnonzero(mass <= 0)
    if isolated.size:
        raise ValueError(f"isolated node(s) {isolated.tolist()}: no similarity inside the neighborhood")

    S = np.zeros((n, n), dtype=np.float64)
    np.put_along_axis(S, nbrs, vals / mass[:, None], axis=1)
    return SquareMatrix(values=S, kind="transition")


def snf_fuse(ws: Sequence[SquareMatrix], params: Optional[SnfParams] = None) -> SquareMatrix:
    """Fuse M >= 2 similarity matrices by cross diffusion.

    Each modality starts from its full transition matrix and is updated T times as
    P_m <- S_m (sum_{k != m} P_k / (M - 1)) S_m^T + reg I, with S_m the masked transition matrix. The result is the
    symmetrized average of the final P_m. With reg > 0 the result keeps local neighborhood structure for any T.

    Args:
        ws: Similarity matrices in correspondence, all of the same size.
        params: Fusion parameters. Default is kappa=0.1, T=20, reg=0.

    Returns:
        SquareMatrix: Fused similarity matrix, kind "fused".
    """
    params = params or SnfParams()
    M = len(ws)
    if M < 2:
        raise ValueError(f"need at least two modalities, got {M}")
    sizes = {w.n for w in ws}
    if len(sizes) != 1:
        raise ValueError(f"size mismatch: matrices of sizes {sorted(sizes)}")

    Ps: List[np.ndarray] = [full_transition(w).values for w in ws]
    Ss: List[np.ndarray] = [masked_transition(w, params.kappa).values for w in ws]

    for t in range(params.iterations):
        nxt = []
        for m in range(M):
            # Fixed summation order over the other modalities
            others = np.zeros_like(Ps[m])
            for k in range(M):
                if k != m:
                    others += Ps[k]
            nxt.append(Ss[m] @ (others / (M - 1)) @ Ss[m].T)
            if params.reg > 0:
                nxt[m] += params.reg * np.eye(nxt[m].shape[0])
        Ps = nxt
        logger.debug("SNF iteration %d/%d", t + 1, params.iterations)

    F = sum(Ps[1:], Ps[0]) / M
    return SquareMatrix(values=(F + F.T) / 2.0, kind="fused")

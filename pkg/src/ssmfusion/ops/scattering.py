import concurrent.futures
import logging
from typing import Optional, Tuple, Union

import numpy as np
from scipy import fft
from skimage.transform import downscale_local_mean

from ssmfusion.models import FilterBank, PathDescriptor, ScatteringFeatures, ScatteringParams, SquareMatrix

logger = logging.getLogger(__name__)


def _grid(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Signed periodic pixel offsets (rows, cols) with the origin at index 0."""
    idx = np.fft.fftfreq(n, d=1.0 / n)
    return np.meshgrid(idx, idx, indexing="ij")


def build_filter_bank(params: Optional[ScatteringParams] = None) -> FilterBank:
    """Build J x L Morlet wavelets and one Gaussian lowpass.

    The wavelet at scale j and direction theta_l = l * pi / L is
    2^(-2j) * (exp(i xi_j (cos(theta_l) u + sin(theta_l) v)) - c) * exp(-(u^2 + v^2) / sigma_j^2) with
    sigma_j = sigma0 * 2^j, xi_j = xi0 / 2^j and c chosen so that the wavelet has zero mean. The lowpass is the
    Gaussian at scale J normalized to unit sum.

    Args:
        params: Scattering parameters. Default is J=4, L=8 on 256 x 256 images.

    Returns:
        FilterBank: The bank, in the frequency domain.
    """
    params = params or ScatteringParams()
    n, J, L = params.input_n, params.J, params.L
    U, V = _grid(n)
    r2 = U**2 + V**2

    psi = np.empty((J, L, n, n), dtype=np.complex128)
    for j in range(J):
        sigma = params.sigma0 * 2**j
        xi = params.xi0 / 2**j
        envelope = np.exp(-r2 / sigma**2)
        for l in range(L):  # noqa: E741
            theta = l * np.pi / L
            wave = np.exp(1j * xi * (np.cos(theta) * U + np.sin(theta) * V))
            c = (wave * envelope).sum() / envelope.sum()
            psi[j, l] = fft.fft2(2.0 ** (-2 * j) * (wave - c) * envelope)
            psi[j, l, 0, 0] = 0.0

    lowpass = np.exp(-r2 / (params.sigma0 * 2**J) ** 2)
    phi = fft.fft2(lowpass / lowpass.sum()).real

    return FilterBank(params=params, psi=psi, phi=phi)


def convolve(image: np.ndarray, filter_hat: np.ndarray) -> np.ndarray:
    """Circular convolution of an image with a filter given in the frequency domain.

    Args:
        image: Real or complex (n, n) array.
        filter_hat: (n, n) frequency response.

    Returns:
        np.ndarray: Complex (n, n) result.
    """
    image = np.asarray(image)
    if image.shape != filter_hat.shape:
        raise ValueError(f"size mismatch: image {image.shape}, filter {filter_hat.shape}")
    return fft.ifft2(fft.fft2(image) * filter_hat)


def scattering_paths(params: ScatteringParams) -> Tuple[PathDescriptor, ...]:
    """Paths in storage order: order 0, order 1 by (j, l), order 2 by (j1, l1, j2, l2) with j2 < j1."""
    paths = [PathDescriptor(order=0)]
    paths += [PathDescriptor(order=1, j1=j, l1=l) for j in range(params.J) for l in range(params.L)]  # noqa: E741
    paths += [
        PathDescriptor(order=2, j1=j, l1=li, j2=lj, l2=lk)
        for j in range(params.J)
        for li in range(params.L)
        for lj in range(j)
        for lk in range(params.L)
    ]
    return tuple(paths)


class _Cascade:
    """Fills the preassigned slots of one feature vector."""

    def __init__(self, bank: FilterBank):
        p = bank.params
        self.bank = bank
        self.factor = p.input_n // p.output_n
        self.block = p.output_n**2
        self.out = np.zeros(sum(p.n_paths) * self.block, dtype=np.float64)

    def pool(self, field_hat: np.ndarray, slot: int, clip: bool) -> None:
        low = fft.ifft2(field_hat * self.bank.phi).real
        if clip:
            low = np.maximum(low, 0.0)
        pooled = downscale_local_mean(low, (self.factor, self.factor))
        self.out[slot * self.block : (slot + 1) * self.block] = pooled.ravel()

    def first_order(self, x_hat: np.ndarray, j: int, l: int) -> np.ndarray:  # noqa: E741
        u1 = np.abs(fft.ifft2(x_hat * self.bank.psi[j, l]))
        self.pool(fft.fft2(u1), 1 + j * self.bank.params.L + l, clip=True)
        return u1

    def second_order(self, u1: np.ndarray, j: int, li: int) -> None:
        L = self.bank.params.L
        u1_hat = fft.fft2(u1)
        # Order-2 slots of all (j', l') before (j, li), then (lj, lk) within
        base = 1 + self.bank.params.J * L + L * L * (j * (j - 1) // 2) + li * j * L
        for lj in range(j):
            for lk in range(L):
                u2 = np.abs(fft.ifft2(u1_hat * self.bank.psi[lj, lk]))
                self.pool(fft.fft2(u2), base + lj * L + lk, clip=True)


def scattering_transform(
    image: Union[SquareMatrix, np.ndarray],
    bank: FilterBank,
    params: Optional[ScatteringParams] = None,
    workers: int = 1,
) -> ScatteringFeatures:
    """Two-level scattering transform of a square image.

    Order 0 is the lowpassed image, order 1 the lowpassed moduli |I * psi_(j, l)|, order 2 the lowpassed
    moduli ||I * psi_(j, l1)| * psi_(j2, l2)| with j2 < j. Every path is lowpassed by phi at full resolution and
    then block averaged down to output_n x output_n.

    Args:
        image: (input_n, input_n) image or square matrix. Resize upstream with `resize_matrix` if needed.
        bank: Filter bank built for the same parameters.
        params: Must equal bank.params when given.
        workers: Threads used for the order-1 paths and their order-2 children. Results do not depend on it.

    Returns:
        ScatteringFeatures: The flattened coefficients and their path index.
    """
    if params is not None and params != bank.params:
        raise ValueError("params do not match the filter bank.")
    params = bank.params
    x = image.values if isinstance(image, SquareMatrix) else np.asarray(image, dtype=np.float64)

    if x.shape != (params.input_n, params.input_n):
        raise ValueError(f"size mismatch: image {x.shape}, expected {params.input_n}x{params.input_n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image contains non-finite values")

    cascade = _Cascade(bank)
    x_hat = fft.fft2(x)
    cascade.pool(x_hat, 0, clip=False)

    def branch(jl: Tuple[int, int]) -> None:
        j, l = jl  # noqa: E741
        u1 = cascade.first_order(x_hat, j, l)
        cascade.second_order(u1, j, l)

    tasks = [(j, l) for j in range(params.J) for l in range(params.L)]  # noqa: E741
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            list(executor.map(branch, tasks))
    else:
        for task in tasks:
            branch(task)

    logger.debug("Scattering transform: %d coefficients", cascade.out.size)
    return ScatteringFeatures(
        coefficients=cascade.out,
        path_index=scattering_paths(params),
        output_n=params.output_n,
    )


def scattering_distance(a: ScatteringFeatures, b: ScatteringFeatures) -> float:
    """Euclidean distance between two feature vectors with identical path layouts."""
    if a.output_n != b.output_n or a.path_index != b.path_index:
        raise ValueError("path_index mismatch")
    return float(np.linalg.norm(a.coefficients - b.coefficients))

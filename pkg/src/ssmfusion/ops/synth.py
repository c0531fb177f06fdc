import logging
from typing import List, Literal, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, model_validator

from ssmfusion.models import TimeOrderedPointCloud

logger = logging.getLogger(__name__)

TopcKind = Literal["cosine_1d", "ribbon_2d", "knot_3d"]

DIM_A = 8
DIM_B = 3
SAMPLES_A = 64
SAMPLES_B = 48
N_KNOTS = 8


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator, reproducible across platforms for a given seed."""
    return np.random.Generator(np.random.PCG64(seed))


class SynthItem(BaseModel):
    """One item of a synthetic multimodal dataset.

    Attributes:
        name: Item name, unique within the dataset.
        modality_a: First modality ("audio"), 8-dimensional.
        modality_b: Second modality ("video"), 3-dimensional.
        label: Class id.
    """

    name: str
    modality_a: TimeOrderedPointCloud
    modality_b: TimeOrderedPointCloud
    label: str


class SynthDataset(BaseModel):
    """A labeled collection of two-modality items.

    Attributes:
        items: The items, ordered by class.
        seed: Seed the dataset was generated from.
    """

    items: List[SynthItem]
    seed: int

    @model_validator(mode="after")
    def validate_classes(self) -> "SynthDataset":
        labels, counts = np.unique([it.label for it in self.items], return_counts=True)
        assert len(labels) >= 2, "At least two classes are required."
        assert np.all(counts >= 2), "Every class needs at least two items."
        return self

    @property
    def labels(self) -> List[str]:
        return [it.label for it in self.items]


def gen_clusters(
    n_clusters: int,
    per_cluster: int,
    noise_sd: float,
    seed: int,
) -> Tuple[TimeOrderedPointCloud, np.ndarray]:
    """Sample 2D points around cluster centers spaced evenly on the unit circle.

    Args:
        n_clusters: Number of clusters, at least 2.
        per_cluster: Points per cluster, at least 1.
        noise_sd: Standard deviation of the isotropic Gaussian noise.
        seed: Generator seed.

    Returns:
        Tuple[TimeOrderedPointCloud, np.ndarray]: The points, in contiguous cluster blocks, and their cluster ids.
    """
    if n_clusters < 2 or per_cluster < 1:
        raise ValueError("n_clusters must be at least 2 and per_cluster at least 1.")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative.")

    rng = make_rng(seed)
    angles = 2 * np.pi * np.arange(n_clusters) / n_clusters
    centers = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    labels = np.repeat(np.arange(n_clusters), per_cluster)
    points = centers[labels] + noise_sd * rng.standard_normal((labels.size, 2))
    return TimeOrderedPointCloud(points=points), labels


def _pixel_centers(n: int) -> Tuple[np.ndarray, np.ndarray]:
    c = (np.arange(n) + 0.5) / n
    y, x = np.meshgrid(c, c, indexing="ij")
    return x, y


def gen_blob_image(center: Tuple[float, float], radius: float, n: int) -> np.ndarray:
    """Image of a smooth bump of peak 1, a Gaussian with sd radius / 4 cut off at the radius.

    Args:
        center: (x, y) in the unit square. x runs along columns, y along rows.
        radius: Support radius in unit-square coordinates.
        n: Image side length in pixels.

    Returns:
        np.ndarray: (n, n) image with values in [0, 1].
    """
    if radius <= 0:
        raise ValueError("radius must be positive.")
    if n < 1:
        raise ValueError("n must be positive.")

    x, y = _pixel_centers(n)
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2
    sd = radius / 4.0
    return np.where(r2 <= radius**2, np.exp(-r2 / (2 * sd**2)), 0.0)


def compose_blobs(*images: np.ndarray) -> np.ndarray:
    """Combine blob images by pointwise maximum."""
    return np.maximum.reduce([np.asarray(im, dtype=np.float64) for im in images])


def gen_blob_pair(centers: Sequence[Tuple[float, float]], radius: float, n: int) -> np.ndarray:
    """Image of several blobs of one radius."""
    return compose_blobs(*[gen_blob_image(c, radius, n) for c in centers])


def gen_parametric_topc(
    kind: TopcKind,
    n_samples: int,
    seed: int = 0,
    periods: int = 2,
    noise_sd: float = 0.0,
) -> TimeOrderedPointCloud:
    """Sample one of three reference curves uniformly in time.

    cosine_1d: cos(2 pi k t); ribbon_2d: (t, sin(2 pi k t)), t in [0, 1); knot_3d: the trefoil
    (sin t + 2 sin 2t, cos t - 2 cos 2t, -sin 3t), t in [0, 2 pi).

    Args:
        kind: Which curve.
        n_samples: Number of samples, at least 4.
        seed: Seed of the optional jitter.
        periods: Number of periods k of the cosine and the ribbon.
        noise_sd: Standard deviation of Gaussian jitter added to every coordinate.
    """
    if n_samples < 4:
        raise ValueError("n_samples must be at least 4.")

    t = np.arange(n_samples) / n_samples
    if kind == "cosine_1d":
        points = np.cos(2 * np.pi * periods * t)[:, None]
    elif kind == "ribbon_2d":
        points = np.stack([t, np.sin(2 * np.pi * periods * t)], axis=1)
    elif kind == "knot_3d":
        s = 2 * np.pi * t
        points = np.stack([np.sin(s) + 2 * np.sin(2 * s), np.cos(s) - 2 * np.cos(2 * s), -np.sin(3 * s)], axis=1)
    else:
        raise ValueError(f"unknown kind {kind!r}")

    if noise_sd > 0:
        points = points + noise_sd * make_rng(seed).standard_normal(points.shape)
    return TimeOrderedPointCloud(points=points, timestamps=t)


def _template(rng: np.random.Generator) -> np.ndarray:
    """Knot values of a random piecewise-linear pattern on [0, 1]."""
    return rng.uniform(-1.0, 1.0, N_KNOTS)


def _evaluate_template(knots: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.interp(t, np.linspace(0.0, 1.0, knots.size), knots)


def monotone_warp(t: np.ndarray, strength: float, rng: np.random.Generator) -> np.ndarray:
    """Smooth monotone reparameterization of [0, 1] fixing both ends.

    tau(t) = t + strength * sum_k c_k sin(pi k t) / (pi k), k = 1..3, with sum |c_k| <= 1, so that
    tau'(t) >= 1 - strength > 0.

    Raises:
        ValueError: If strength is outside [0, 1) or the warp is not strictly increasing.
    """
    if not 0 <= strength < 1:
        raise ValueError(f"warp strength must be in [0, 1), got {strength}")

    c = rng.uniform(-1.0, 1.0, 3)
    c /= max(1.0, np.abs(c).sum())
    k = np.arange(1, 4)
    tau = t + strength * (c[None, :] * np.sin(np.pi * k[None, :] * t[:, None]) / (np.pi * k[None, :])).sum(axis=1)

    if np.any(np.diff(tau) <= 0):
        raise ValueError("warp is not strictly increasing")
    return tau


def shared_warp(
    t_a: np.ndarray,
    t_b: np.ndarray,
    strength: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """One monotone warp sampled on two time grids of [0, 1]. The second grid is interpolated from the first."""
    tau_a = monotone_warp(t_a, strength, rng)
    return tau_a, np.interp(t_b, t_a, tau_a)


def gen_multimodal_dataset(
    n_classes: int,
    per_class: int,
    warp_strength: float,
    seed: int,
    noise_sd: float = 0.0,
) -> SynthDataset:
    """Generate labeled two-modality sequences.

    Every class owns one random piecewise-linear template per modality. Every item warps time with its own
    monotone reparameterization, shared by both modalities, samples the templates (64 samples for modality A, 48 for B), embeds them in 8 and
    3 dimensions through fixed random linear maps shared by the whole dataset, and adds independent Gaussian noise
    per modality.

    Args:
        n_classes: Number of classes, at least 2.
        per_class: Items per class, at least 2.
        warp_strength: Bound on the time warps, in [0, 1).
        seed: Generator seed.
        noise_sd: Standard deviation of the additive noise.
    """
    if n_classes < 2 or per_class < 2:
        raise ValueError("n_classes and per_class must be at least 2.")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative.")

    rng = make_rng(seed)
    embed_a = rng.standard_normal(DIM_A)
    embed_b = rng.standard_normal(DIM_B)
    templates = [(_template(rng), _template(rng)) for _ in range(n_classes)]

    t_a = np.linspace(0.0, 1.0, SAMPLES_A)
    t_b = np.linspace(0.0, 1.0, SAMPLES_B)
    width = len(str(n_classes * per_class - 1))

    items = []
    for c, (knots_a, knots_b) in enumerate(templates):
        for i in range(per_class):
            tau_a, tau_b = shared_warp(t_a, t_b, warp_strength, rng)
            sig_a = _evaluate_template(knots_a, tau_a)
            sig_b = _evaluate_template(knots_b, tau_b)
            pts_a = sig_a[:, None] * embed_a[None, :] + noise_sd * rng.standard_normal((SAMPLES_A, DIM_A))
            pts_b = sig_b[:, None] * embed_b[None, :] + noise_sd * rng.standard_normal((SAMPLES_B, DIM_B))
            items.append(
                SynthItem(
                    name=f"item_{c * per_class + i:0{width}d}",
                    modality_a=TimeOrderedPointCloud(points=pts_a, timestamps=t_a),
                    modality_b=TimeOrderedPointCloud(points=pts_b, timestamps=t_b),
                    label=f"class_{c}",
                ),
            )

    logger.info("Generated %d items in %d classes (seed %d)", len(items), n_classes, seed)
    return SynthDataset(items=items, seed=seed)

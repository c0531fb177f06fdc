import numpy as np
import pytest
from pydantic import ValidationError
from ssmfusion.ops.core import frobenius_distance, pairwise_distance_matrix
from ssmfusion.ops.synth import (
    SynthDataset,
    compose_blobs,
    gen_blob_image,
    gen_blob_pair,
    gen_clusters,
    gen_multimodal_dataset,
    gen_parametric_topc,
    make_rng,
    monotone_warp,
    shared_warp,
)

NUMERICAL_PRECISION = 1e-9


def test_clusters():
    points, labels = gen_clusters(3, 100, 0.2, seed=0)
    assert points.n == 300 and points.d == 2, "Expected 300 points in the plane"
    assert np.array_equal(labels, np.repeat([0, 1, 2], 100)), "Labels should come in contiguous runs"

    again, _ = gen_clusters(3, 100, 0.2, seed=0)
    assert np.array_equal(points.points, again.points), "Same seed should give the same points"

    exact, exact_labels = gen_clusters(4, 5, 0.0, seed=1)
    d = pairwise_distance_matrix(exact).values
    same = exact_labels[:, None] == exact_labels[None, :]
    assert np.all(d[same] == 0), "Noise-free clusters should collapse to their centers"
    assert np.allclose(np.linalg.norm(exact.points, axis=1), 1.0, rtol=0, atol=1e-12), "Centers lie on the unit circle"

    with pytest.raises(ValueError):
        gen_clusters(1, 10, 0.1, seed=0)
    with pytest.raises(ValueError):
        gen_clusters(3, 10, -0.1, seed=0)


def test_blob_image():
    n = 64
    center = ((32 + 0.5) / n, (20 + 0.5) / n)
    blob = gen_blob_image(center, 0.1, n)
    assert blob.shape == (n, n), "Incorrect shape"
    assert blob.min() >= 0 and blob.max() <= 1, "Values should lie in [0, 1]"
    assert blob[20, 32] == 1.0, "Peak should sit at the center, y along rows and x along columns"

    assert frobenius_distance(blob, gen_blob_image(center, 0.1, n)) == 0.0, "Identical parameters, identical images"

    far = gen_blob_image((center[0] + 0.3, center[1]), 0.1, n)
    assert np.sum(blob * far) < 1e-6, "Blobs three radii apart should not overlap"

    y, x = np.indices((n, n))
    outside = ((x + 0.5) / n - center[0]) ** 2 + ((y + 0.5) / n - center[1]) ** 2 > 0.1**2
    assert np.all(blob[outside] == 0), "Support should end at the radius"

    with pytest.raises(ValueError, match="radius"):
        gen_blob_image(center, 0.0, n)


def test_blob_composition():
    a = gen_blob_image((0.25, 0.5), 0.1, 32)
    b = gen_blob_image((0.75, 0.5), 0.1, 32)
    pair = gen_blob_pair([(0.25, 0.5), (0.75, 0.5)], 0.1, 32)
    assert np.array_equal(pair, np.maximum(a, b)), "Blob pairs should compose by pointwise maximum"
    assert np.array_equal(compose_blobs(a), a), "A single image should compose to itself"


def test_cosine_topc():
    topc = gen_parametric_topc("cosine_1d", 100, periods=3)
    x = np.cos(2 * np.pi * 3 * np.arange(100) / 100)
    d = pairwise_distance_matrix(topc).values
    assert np.allclose(d, np.abs(x[:, None] - x[None, :]), rtol=0, atol=NUMERICAL_PRECISION), (
        "Cosine SSM should match the closed form"
    )
    assert np.allclose(topc.timestamps, np.arange(100) / 100, rtol=0, atol=1e-15), "Samples should be uniform in time"


def test_ribbon_topc():
    topc = gen_parametric_topc("ribbon_2d", 100, periods=2)
    y = topc.points[:, 1]
    assert np.allclose(y[:50], y[50:], rtol=0, atol=NUMERICAL_PRECISION), "Points one period apart share y"
    assert np.all(np.diff(topc.points[:, 0]) > 0), "x should advance with time"


def test_knot_topc():
    topc = gen_parametric_topc("knot_3d", 120)
    assert topc.d == 3, "The knot lives in three dimensions"

    noisy = gen_parametric_topc("knot_3d", 120, seed=3, noise_sd=0.1)
    assert np.array_equal(noisy.points, gen_parametric_topc("knot_3d", 120, seed=3, noise_sd=0.1).points), (
        "Jitter should be deterministic per seed"
    )
    assert not np.array_equal(noisy.points, topc.points), "Jitter should move the points"

    with pytest.raises(ValueError, match="unknown kind"):
        gen_parametric_topc("spiral", 100)
    with pytest.raises(ValueError, match="at least 4"):
        gen_parametric_topc("knot_3d", 3)


def test_monotone_warp():
    t = np.linspace(0.0, 1.0, 200)
    rng = make_rng(0)
    for strength in (0.0, 0.3, 0.9):
        tau = monotone_warp(t, strength, rng)
        assert np.all(np.diff(tau) > 0), f"Warp of strength {strength} should be strictly increasing"
        assert abs(tau[0]) < 1e-12 and abs(tau[-1] - 1) < 1e-12, "Warps should fix both ends"

    with pytest.raises(ValueError, match="warp strength"):
        monotone_warp(t, 1.0, rng)


def test_shared_warp():
    t_a, t_b = np.linspace(0.0, 1.0, 64), np.linspace(0.0, 1.0, 48)
    tau_a, tau_b = shared_warp(t_a, t_b, 0.4, make_rng(3))

    assert np.array_equal(tau_a, monotone_warp(t_a, 0.4, make_rng(3))), "The first grid gets the drawn warp"
    assert np.all(np.diff(tau_b) > 0), "The second grid should be strictly increasing"
    assert abs(tau_b[0]) < 1e-12 and abs(tau_b[-1] - 1) < 1e-12, "Both grids should keep the ends fixed"

    _, tau_sub = shared_warp(t_a, t_a[::7], 0.4, make_rng(3))
    assert np.allclose(tau_sub, tau_a[::7], rtol=0, atol=NUMERICAL_PRECISION), "Common times should warp alike"


def test_multimodal_layout():
    ds = gen_multimodal_dataset(10, 6, 0.3, seed=0, noise_sd=0.05)
    assert len(ds.items) == 60, "Expected 10 x 6 items"
    assert ds.labels == [f"class_{c}" for c in range(10) for _ in range(6)], "Items should be ordered by class"
    assert len({it.name for it in ds.items}) == 60, "Names should be unique"
    assert ds.items[0].name == "item_00", "Names should be zero padded"

    item = ds.items[0]
    assert (item.modality_a.n, item.modality_a.d) == (64, 8), "Modality A has 64 samples in 8 dimensions"
    assert (item.modality_b.n, item.modality_b.d) == (48, 3), "Modality B has 48 samples in 3 dimensions"


def test_multimodal_deterministic():
    a = gen_multimodal_dataset(3, 3, 0.5, seed=11, noise_sd=0.1)
    b = gen_multimodal_dataset(3, 3, 0.5, seed=11, noise_sd=0.1)
    for x, y in zip(a.items, b.items):
        assert x.modality_a.points.tobytes() == y.modality_a.points.tobytes(), "Same seed, same modality A"
        assert x.modality_b.points.tobytes() == y.modality_b.points.tobytes(), "Same seed, same modality B"

    c = gen_multimodal_dataset(3, 3, 0.5, seed=12, noise_sd=0.1)
    assert not np.array_equal(a.items[0].modality_a.points, c.items[0].modality_a.points), "Seeds should matter"


def test_multimodal_duplicates():
    ds = gen_multimodal_dataset(2, 3, 0.0, seed=7)
    for i in range(3):
        first, other = ds.items[0], ds.items[i]
        assert np.array_equal(first.modality_a.points, other.modality_a.points), "No warp, no noise, equal items"
        assert np.array_equal(first.modality_b.points, other.modality_b.points), "No warp, no noise, equal items"
    assert not np.array_equal(ds.items[0].modality_a.points, ds.items[3].modality_a.points), (
        "Classes should differ"
    )


def test_multimodal_errors():
    with pytest.raises(ValueError):
        gen_multimodal_dataset(1, 3, 0.0, seed=0)
    with pytest.raises(ValueError):
        gen_multimodal_dataset(2, 3, 1.5, seed=0)

    ds = gen_multimodal_dataset(2, 2, 0.0, seed=0)
    with pytest.raises(ValidationError, match="at least two items"):
        SynthDataset(items=ds.items[:3], seed=0)

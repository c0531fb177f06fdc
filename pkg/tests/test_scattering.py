import numpy as np
import pytest
from conftest import RUN_SLOW
from pydantic import ValidationError
from ssmfusion.models import ScatteringParams
from ssmfusion.ops.core import frobenius_distance
from ssmfusion.ops.scattering import (
    build_filter_bank,
    convolve,
    scattering_distance,
    scattering_paths,
    scattering_transform,
)
from ssmfusion.ops.synth import gen_blob_image

NUMERICAL_PRECISION = 1e-9

SMALL = ScatteringParams(J=2, L=4, input_n=32, output_n=8)


@pytest.fixture(scope="module")
def small_bank():
    return build_filter_bank(SMALL)


def _circular_oracle(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    n = image.shape[0]
    u, v = np.indices((n, n))
    out = np.zeros((n, n), dtype=np.complex128)
    for a in range(n):
        for b in range(n):
            out[a, b] = np.sum(image * kernel[(a - u) % n, (b - v) % n])
    return out


def _relative(a, b, norm) -> float:
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)) / norm)


def test_params_validation():
    p = ScatteringParams()
    assert (p.J, p.L, p.input_n, p.output_n) == (4, 8, 256, 32), "Incorrect defaults"
    assert p.n_paths == (1, 32, 384), "Incorrect path counts"
    assert p.n_coefficients == 427008, "Incorrect coefficient count"

    with pytest.raises(ValidationError, match="power of two"):
        ScatteringParams(input_n=100)
    with pytest.raises(ValidationError, match="exceeds input_n"):
        ScatteringParams(J=6, input_n=32, output_n=8)
    with pytest.raises(ValidationError, match="divide"):
        ScatteringParams(input_n=32, output_n=5)
    with pytest.raises(ValidationError):
        ScatteringParams(L=0)


def test_path_enumeration():
    for J, L in [(1, 1), (2, 4), (3, 2), (4, 8)]:
        params = ScatteringParams(J=J, L=L, input_n=16, output_n=4)
        paths = scattering_paths(params)
        orders = [p.order for p in paths]
        assert orders.count(1) == L * J, f"Incorrect order-1 count for J={J}, L={L}"
        assert orders.count(2) == L**2 * J * (J - 1) // 2, f"Incorrect order-2 count for J={J}, L={L}"
        assert orders == sorted(orders), "Paths should be grouped by order"
        assert all(p.j2 < p.j1 for p in paths if p.order == 2), "Order-2 paths need j2 < j1"

    paths = scattering_paths(SMALL)
    first = [(p.j1, p.l1) for p in paths if p.order == 1]
    second = [(p.j1, p.l1, p.j2, p.l2) for p in paths if p.order == 2]
    assert first == sorted(first), "Order-1 paths should be sorted by (j, l)"
    assert second == sorted(second), "Order-2 paths should be sorted by (j1, l1, j2, l2)"


def test_filter_bank(small_bank):
    default = build_filter_bank()
    assert default.psi.shape == (4, 8, 256, 256), "Expected 32 bandpass filters"
    assert default.phi.shape == (256, 256), "Expected one lowpass filter"
    assert abs(default.phi[0, 0] - 1.0) < NUMERICAL_PRECISION, "Lowpass should have unit DC gain"

    for j in range(SMALL.J):
        for l in range(SMALL.L):  # noqa: E741
            spatial = small_bank.spatial(j, l)
            assert abs(spatial.sum()) <= 1e-10 * np.abs(spatial).sum(), f"Filter ({j}, {l}) should be zero mean"

    expected = np.arange(4) * np.pi / 4
    assert np.allclose(small_bank.directions, expected, rtol=0, atol=1e-15), "Directions should be l * pi / L"


def test_filter_directions():
    params = ScatteringParams(J=2, L=4, input_n=64, output_n=8)
    bank = build_filter_bank(params)
    freqs = np.fft.fftfreq(64, d=1.0 / 64)

    for j in range(params.J):
        radius = params.xi0 / 2**j * 64 / (2 * np.pi)
        angles = []
        for l in range(params.L):  # noqa: E741
            r, c = np.unravel_index(np.argmax(np.abs(bank.psi[j, l])), (64, 64))
            fr, fc = freqs[r], freqs[c]
            assert abs(np.hypot(fr, fc) - radius) < 1.0, f"Filter ({j}, {l}) peaks off its center frequency"
            angles.append(np.arctan2(fc, fr))

        for l in range(params.L - 1):  # noqa: E741
            step = angles[l + 1] - angles[l]
            assert abs(step - np.pi / params.L) < 2.0 / radius, f"Direction {l} -> {l + 1} should rotate by pi / L"


def test_convolve_identities(small_bank):
    impulse = np.zeros((32, 32))
    impulse[0, 0] = 1.0
    out = convolve(impulse, small_bank.psi[1, 2])
    assert np.allclose(out, small_bank.spatial(1, 2), rtol=0, atol=1e-12), "Impulse should return the filter"

    constant = np.full((32, 32), 3.0)
    for j in range(SMALL.J):
        for l in range(SMALL.L):  # noqa: E741
            assert np.abs(convolve(constant, small_bank.psi[j, l])).max() <= NUMERICAL_PRECISION, (
                "Zero-mean filters should cancel constants"
            )

    with pytest.raises(ValueError, match="size mismatch"):
        convolve(np.zeros((16, 16)), small_bank.psi[0, 0])


@pytest.mark.parametrize("n, trials", [(8, 10), (16, 50)])
def test_convolve_oracle(n, trials):
    rng = np.random.default_rng(n)
    for trial in range(trials):
        image = rng.standard_normal((n, n))
        filter_hat = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))

        out = convolve(image, filter_hat)
        oracle = _circular_oracle(image, np.fft.ifft2(filter_hat))
        assert np.allclose(out, oracle, rtol=0, atol=1e-6), f"Convolution differs from the oracle in trial {trial}"


def test_default_transform_size():
    params = ScatteringParams()
    rng = np.random.default_rng(0)
    features = scattering_transform(rng.random((256, 256)), build_filter_bank(params))

    assert features.coefficients.shape == (427008,), "Incorrect coefficient count"
    assert features.order2.shape == (384, 32, 32), "Incorrect order-2 block count"
    assert np.all(np.isfinite(features.coefficients)), "Coefficients should be finite"
    assert np.all(features.order1 >= 0) and np.all(features.order2 >= 0), "Moduli should be non-negative"


def test_constant_image(small_bank):
    features = scattering_transform(np.full((32, 32), 0.7), small_bank)
    assert features.order0.shape == (1, 8, 8), "Incorrect order-0 shape"
    assert np.allclose(features.order0, 0.7, rtol=0, atol=NUMERICAL_PRECISION), "Order 0 should keep the constant"
    assert np.abs(features.order1).max() <= NUMERICAL_PRECISION, "Order 1 should vanish on constants"
    assert np.abs(features.order2).max() <= NUMERICAL_PRECISION, "Order 2 should vanish on constants"


def test_homogeneity(small_bank):
    rng = np.random.default_rng(1)
    image = rng.random((32, 32))
    base = scattering_transform(image, small_bank)

    for alpha in (2.5, -0.3):
        scaled = scattering_transform(alpha * image, small_bank)
        assert np.allclose(scaled.order0, alpha * base.order0, rtol=1e-12, atol=1e-14), "Order 0 should be linear"
        assert np.allclose(scaled.order1, abs(alpha) * base.order1, rtol=1e-10, atol=1e-12), (
            "Order 1 should be absolutely homogeneous"
        )


def test_workers_determinism(small_bank):
    rng = np.random.default_rng(2)
    image = rng.random((32, 32))
    serial = scattering_transform(image, small_bank, workers=1)
    threaded = scattering_transform(image, small_bank, SMALL, workers=4)
    assert serial.coefficients.tobytes() == threaded.coefficients.tobytes(), "Output should not depend on workers"
    assert serial.path_index == threaded.path_index, "Path index should not depend on workers"


def test_transform_errors(small_bank):
    with pytest.raises(ValueError, match="size mismatch"):
        scattering_transform(np.zeros((16, 16)), small_bank)

    image = np.zeros((32, 32))
    image[3, 4] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        scattering_transform(image, small_bank)

    with pytest.raises(ValueError, match="do not match"):
        scattering_transform(np.zeros((32, 32)), small_bank, ScatteringParams(J=1, L=4, input_n=32, output_n=8))


def test_distance_metric(small_bank):
    rng = np.random.default_rng(3)
    feats = [scattering_transform(rng.random((32, 32)), small_bank) for _ in range(4)]

    assert scattering_distance(feats[0], feats[0]) == 0.0, "Distance to itself should be 0"
    for a in feats:
        for b in feats:
            for c in feats:
                ab, bc, ac = scattering_distance(a, b), scattering_distance(b, c), scattering_distance(a, c)
                assert ac <= ab + bc + NUMERICAL_PRECISION, "Triangle inequality violated"

    other = scattering_transform(np.zeros((32, 32)), build_filter_bank(ScatteringParams(J=1, L=4, input_n=32)))
    with pytest.raises(ValueError, match="path_index mismatch"):
        scattering_distance(feats[0], other)


def test_checkerboard_shift(small_bank):
    board = (np.indices((32, 32)) // 4).sum(axis=0) % 2 * 1.0
    shifted = np.roll(board, 1, axis=0)

    s, s_shifted = scattering_transform(board, small_bank), scattering_transform(shifted, small_bank)
    raw = frobenius_distance(board, shifted) / np.linalg.norm(board)
    scattered = scattering_distance(s, s_shifted) / np.linalg.norm(s.coefficients)
    assert scattered < raw, f"Scattering ({scattered}) should be more stable than raw pixels ({raw})"


def test_translation_stability(small_bank):
    image = gen_blob_image((0.5, 0.5), 0.4, 32)
    base = scattering_transform(image, small_bank)
    norm_s, norm_i = np.linalg.norm(base.coefficients), np.linalg.norm(image)

    previous = 0.0
    for tau in (1, 2, 4):
        shifted = np.roll(image, tau, axis=1)
        s_dist = _relative(scattering_transform(shifted, small_bank).coefficients, base.coefficients, norm_s)
        i_dist = _relative(shifted, image, norm_i)
        assert s_dist < i_dist, f"Scattering should be more stable than pixels at shift {tau}"
        assert s_dist >= previous, f"Scattering distance should not decrease at shift {tau}"
        previous = s_dist


def _blob_sweep(params: ScatteringParams, displacements):
    bank = build_filter_bank(params)
    n = params.input_n
    reference = gen_blob_image((0.3, 0.5), 0.1, n)
    s_ref = scattering_transform(reference, bank)

    raw, scattered = [], []
    for d in displacements:
        moved = gen_blob_image((0.3 + d, 0.5), 0.1, n)
        raw.append(frobenius_distance(reference, moved))
        scattered.append(scattering_distance(s_ref, scattering_transform(moved, bank)))
    return np.array(raw), np.array(scattered)


def _check_sweep(displacements: np.ndarray, raw: np.ndarray, scattered: np.ndarray) -> None:
    plateau = raw[displacements >= 0.12 - 1e-9]
    assert (plateau.max() - plateau.min()) / plateau.max() < 0.01, "Raw distance should plateau once blobs separate"

    tail = scattered[displacements >= 0.10 - 1e-9]
    assert np.all(np.diff(tail) > 0), "Scattering distance should keep increasing"


def test_blob_sweep():
    displacements = np.linspace(0.1, 0.2, 6)
    raw, scattered = _blob_sweep(ScatteringParams(J=2, L=4, input_n=64, output_n=8), displacements)
    _check_sweep(displacements, raw, scattered)


@pytest.mark.skipif(not RUN_SLOW, reason="Slow reproduction, set RUN_SLOW=1")
def test_blob_sweep_full():
    displacements = np.linspace(0.0, 0.2, 21)
    raw, scattered = _blob_sweep(ScatteringParams(), displacements)
    _check_sweep(displacements, raw, scattered)

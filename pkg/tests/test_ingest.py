import math

import numpy as np
import pytest
from pydantic import ValidationError
from ssmfusion.models import AudioClip, FrameSequence, MfccParams
from ssmfusion.ops.core import pairwise_distance_matrix
from ssmfusion.ops.ingest import add_noise_at_psnr, frames_to_topc, mfcc, psnr

NUMERICAL_PRECISION = 1e-12


def _tone(freq: float, seconds: float = 1.0, sr: int = 22050) -> AudioClip:
    t = np.arange(int(seconds * sr)) / sr
    return AudioClip(samples=0.5 * np.sin(2 * np.pi * freq * t), sample_rate=sr)


def test_params_validation():
    with pytest.raises(ValidationError, match="hop must not exceed window"):
        MfccParams(window=256, hop=512)
    with pytest.raises(ValidationError, match="n_coeffs"):
        MfccParams(n_coeffs=50, n_mels=40)


def test_mfcc_frame_count():
    rng = np.random.default_rng(0)
    params = MfccParams()
    for length in (4096, 4097, 4352, 5000, 22050):
        clip = AudioClip(samples=rng.uniform(-1, 1, length), sample_rate=22050)
        topc = mfcc(clip, params)
        assert topc.n == 1 + (length - 4096) // 256, f"Incorrect frame count for {length} samples"
        assert topc.d == 20, "Expected 20 coefficients"

    times = mfcc(AudioClip(samples=rng.uniform(-1, 1, 5000), sample_rate=22050)).timestamps
    assert np.allclose(times, np.arange(4) * 256 / 22050, rtol=0, atol=NUMERICAL_PRECISION), (
        "Frames should be stamped with their start times"
    )


def test_mfcc_silence():
    topc = mfcc(AudioClip(samples=np.zeros(8192), sample_rate=22050))
    assert np.all(topc.points == topc.points[0]), "Silent frames should all be identical"
    assert np.all(np.isfinite(topc.points)), "The log floor should keep coefficients finite"


def test_mfcc_tone_separation():
    low, high = mfcc(_tone(440.0)).points, mfcc(_tone(880.0)).points

    def spread(points):
        return math.sqrt(np.mean(np.sum((points - points.mean(axis=0)) ** 2, axis=1)))

    separation = np.linalg.norm(low.mean(axis=0) - high.mean(axis=0))
    assert separation >= 5 * max(spread(low), spread(high)), "Tones should separate well beyond frame jitter"


def test_mfcc_errors():
    with pytest.raises(ValueError, match="shorter than one window"):
        mfcc(AudioClip(samples=np.zeros(4095), sample_rate=22050))
    with pytest.raises(ValueError, match="Resample upstream"):
        mfcc(AudioClip(samples=np.zeros(8192), sample_rate=16000))


def test_frames_to_topc():
    rng = np.random.default_rng(1)
    frame = rng.random((25, 25))
    topc = frames_to_topc(FrameSequence(frames=[frame]))
    assert (topc.n, topc.d) == (1, 625), "One 25x25 frame should give one 625-dimensional point"
    assert np.array_equal(topc.points[0], frame.ravel()), "Frames should be flattened row-major"

    same = frames_to_topc(FrameSequence(frames=[frame, frame]))
    assert pairwise_distance_matrix(same).values[0, 1] == 0.0, "Identical frames should be at distance 0"

    board = np.indices((25, 25)).sum(axis=0) % 2 * 1.0
    pair = frames_to_topc(FrameSequence(frames=[board, 1.0 - board]))
    assert abs(pairwise_distance_matrix(pair).values[0, 1] - 25.0) < NUMERICAL_PRECISION, (
        "Inverted binary frames should be sqrt(h * w) apart"
    )


def test_frame_validation():
    with pytest.raises(ValidationError, match="inconsistent frame sizes"):
        FrameSequence(frames=[np.zeros((2, 2)), np.zeros((3, 3))])
    with pytest.raises(ValidationError, match="empty input"):
        FrameSequence(frames=np.zeros((0, 4, 4)))


def test_noise_hits_target():
    rng = np.random.default_rng(2)
    signal = rng.uniform(-1, 1, 10000)
    for target in (30.0, 20.0, 10.0, 0.0):
        noisy = add_noise_at_psnr(signal, target, seed=5)
        assert abs(psnr(signal, noisy) - target) < 0.1, f"Realized pSNR should be within 0.1 dB of {target}"


def test_noise_infinite_and_deterministic():
    rng = np.random.default_rng(3)
    signal = rng.uniform(-1, 1, (20, 8))

    assert np.array_equal(add_noise_at_psnr(signal, math.inf, seed=1), signal), "Infinite pSNR adds no noise"
    assert psnr(signal, signal) == math.inf, "Zero error should give infinite pSNR"

    a, b = add_noise_at_psnr(signal, 10.0, seed=1), add_noise_at_psnr(signal, 10.0, seed=1)
    assert a.tobytes() == b.tobytes(), "Same seed should give bit-identical output"
    assert a.shape == signal.shape, "Shape should be preserved"
    assert not np.array_equal(a, add_noise_at_psnr(signal, 10.0, seed=2)), "Seeds should change the noise"


def test_noise_energy_monotone():
    rng = np.random.default_rng(4)
    signal = rng.uniform(0, 1, 5000)
    energies = [np.sum((add_noise_at_psnr(signal, db, seed=0) - signal) ** 2) for db in (40, 30, 20, 10, 5, 0)]
    assert all(a <= b for a, b in zip(energies, energies[1:])), "Lower pSNR should inject more error energy"


def test_noise_clip():
    frames = np.full((4, 5, 5), 0.5)
    noisy = add_noise_at_psnr(frames, 0.0, seed=0, clip=(0.0, 1.0))
    assert noisy.min() >= 0.0 and noisy.max() <= 1.0, "Clipped noise should stay in range"


def test_noise_errors():
    with pytest.raises(ValueError, match="undefined"):
        add_noise_at_psnr(np.zeros(10), 20.0, seed=0)
    with pytest.raises(ValueError, match="empty input"):
        add_noise_at_psnr(np.zeros(0), 20.0, seed=0)


@pytest.mark.parametrize("target", [-math.inf, math.nan])
def test_noise_rejects_undefined_targets(target):
    with pytest.raises(ValueError, match="finite or \\+infinity"):
        add_noise_at_psnr(np.ones(10), target, seed=0)

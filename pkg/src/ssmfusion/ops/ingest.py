import logging
import math
from typing import Optional, Tuple

import librosa
import numpy as np
from scipy import fft

from ssmfusion.models import AudioClip, FrameSequence, MfccParams, TimeOrderedPointCloud

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-10


def mfcc(clip: AudioClip, params: Optional[MfccParams] = None) -> TimeOrderedPointCloud:
    """Mel-frequency cepstral coefficients, one point per analysis frame.

    Each frame is Hann-windowed, its magnitude spectrum is pooled by triangular HTK mel bands spanning 0 Hz to
    Nyquist, floored at 1e-10, log-compressed and decorrelated by an orthonormal DCT-II.

    Args:
        clip: Mono clip at params.sample_rate, at least one window long.
        params: MFCC parameters. Default is window 4096, hop 256, 20 coefficients, 40 bands at 22050 Hz.

    Returns:
        TimeOrderedPointCloud: 1 + (len - window) // hop points in n_coeffs dimensions, stamped with frame start
            times.
    """
    params = params or MfccParams()
    if clip.sample_rate != params.sample_rate:
        raise ValueError(
            f"Clip sample rate {clip.sample_rate} Hz differs from {params.sample_rate} Hz. Resample upstream.",
        )
    if clip.samples.size < params.window:
        raise ValueError(f"Clip of {clip.samples.size} samples is shorter than one window ({params.window}).")

    spectrum = np.abs(
        librosa.stft(
            clip.samples,
            n_fft=params.window,
            hop_length=params.hop,
            window="hann",
            center=False,
        ),
    )
    mel = librosa.filters.mel(
        sr=params.sample_rate,
        n_fft=params.window,
        n_mels=params.n_mels,
        fmin=0.0,
        fmax=params.sample_rate / 2.0,
        htk=True,
        norm=None,
    )
    energies = np.log(np.maximum(mel @ spectrum, LOG_FLOOR))
    coeffs = fft.dct(energies, type=2, norm="ortho", axis=0)[: params.n_coeffs]

    n_frames = coeffs.shape[1]
    times = np.arange(n_frames) * params.hop / params.sample_rate
    logger.debug("MFCC: %d frames of %d coefficients", n_frames, params.n_coeffs)
    return TimeOrderedPointCloud(points=coeffs.T, timestamps=times)


def frames_to_topc(seq: FrameSequence) -> TimeOrderedPointCloud:
    """Flatten every frame row-major into one point of dimension h * w."""
    n, h, w = seq.frames.shape
    return TimeOrderedPointCloud(points=seq.frames.reshape(n, h * w))


def psnr(clean: np.ndarray, noisy: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB, 20 log10(max |clean| / RMS(noisy - clean))."""
    clean = np.asarray(clean, dtype=np.float64)
    err = np.asarray(noisy, dtype=np.float64) - clean
    rms = math.sqrt(float(np.mean(err**2)))
    if rms == 0:
        return math.inf
    return 20.0 * math.log10(float(np.max(np.abs(clean))) / rms)


def add_noise_at_psnr(
    signal: np.ndarray,
    target_psnr_db: float,
    seed: int,
    clip: Optional[Tuple[float, float]] = None,
) -> np.ndarray:
    """Add zero-mean Gaussian noise scaled so that the realized pSNR equals the target.

    Args:
        signal: Non-empty array of any shape, not all zeros.
        target_psnr_db: Target pSNR in dB. Infinity returns the signal unchanged.
        seed: Seed of the PCG64 noise generator.
        clip: Optional (low, high) range the noisy signal is clamped to, e.g. (0, 1) for video.

    Returns:
        np.ndarray: Noisy copy of the signal.
    """
    x = np.array(signal, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty input")
    peak = float(np.max(np.abs(x)))
    if peak == 0:
        raise ValueError("pSNR is undefined for an all-zero signal")
    if math.isnan(target_psnr_db) or target_psnr_db == -math.inf:
        raise ValueError(f"target pSNR must be finite or +infinity, got {target_psnr_db}")
    if math.isinf(target_psnr_db):
        return x

    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.standard_normal(x.shape)
    if noise.size > 1:
        noise -= noise.mean()

    target_rms = peak / 10.0 ** (target_psnr_db / 20.0)
    noise *= target_rms / math.sqrt(float(np.mean(noise**2)))

    out = x + noise
    if clip is not None:
        out = np.clip(out, clip[0], clip[1])
    return out

"""Log mel filterbank energies (MFSC).

The front-end is a Hamming-windowed, preemphasized short-time power spectrum
passed through triangular filters equally spaced on the mel scale, followed
by a floored natural log.  No DCT: the log energies themselves are the
features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sigio import AudioBuffer, FrameSpec, frame_signal

LOG_FLOOR = 1e-10


def mel_scale(freq_hz):
    """Hz -> mel, 1127 * ln(1 + f/700). Accepts scalars or arrays."""
    f = np.asarray(freq_hz, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("mel_scale is undefined for negative frequencies")
    out = 1127.0 * np.log1p(f / 700.0)
    return float(out) if np.isscalar(freq_hz) else out


def mel_to_hz(mel):
    m = np.asarray(mel, dtype=np.float64)
    out = 700.0 * np.expm1(m / 1127.0)
    return float(out) if np.isscalar(mel) else out


def default_fft_size(window_samples: int) -> int:
    """Smallest power of two holding one analysis window."""
    size = 1
    while size < window_samples:
        size *= 2
    return size


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular filters over FFT bins, rows summing the power spectrum.

    ``weights`` has shape (n_filters, fft_size//2 + 1); each row peaks at 1.0
    at its own center and falls to zero at the neighboring centers.
    """

    sample_rate_hz: int
    n_filters: int
    fft_size: int
    low_hz: float
    high_hz: float
    centers_hz: np.ndarray
    weights: np.ndarray


def build_filterbank(
    sample_rate_hz: int,
    n_filters: int = 40,
    fft_size: int | None = None,
    low_hz: float = 0.0,
    high_hz: float | None = None,
) -> MelFilterbank:
    """Construct ``n_filters`` triangles equally spaced in mel between the
    band edges.

    ``fft_size`` defaults to the smallest power of two covering a 25 ms
    window at ``sample_rate_hz``.  Validates band edges, filter count and
    FFT resolution; raises ``ValueError`` if any filter would end up with no
    positive-weight bin.
    """
    if n_filters < 1:
        raise ValueError(f"n_filters must be >= 1, got {n_filters}")
    if high_hz is None:
        high_hz = sample_rate_hz / 2.0
    if fft_size is None:
        fft_size = default_fft_size(int(round(0.025 * sample_rate_hz)))
    if not (0.0 <= low_hz < high_hz):
        raise ValueError(f"band edges must satisfy 0 <= low < high, got [{low_hz}, {high_hz}]")
    if high_hz > sample_rate_hz / 2.0 + 1e-9:
        raise ValueError(
            f"high_hz {high_hz} exceeds the Nyquist frequency {sample_rate_hz / 2.0}"
        )
    if fft_size < 2 * n_filters:
        raise ValueError(
            f"fft_size {fft_size} too small for {n_filters} filters (need >= {2 * n_filters})"
        )

    points_mel = np.linspace(mel_scale(low_hz), mel_scale(high_hz), n_filters + 2)
    centers_hz = mel_to_hz(points_mel[1:-1])
    n_bins = fft_size // 2 + 1
    bin_mel = mel_scale(np.arange(n_bins) * (sample_rate_hz / fft_size))

    left = points_mel[:-2, None]
    center = points_mel[1:-1, None]
    right = points_mel[2:, None]
    up = (bin_mel[None, :] - left) / (center - left)
    down = (right - bin_mel[None, :]) / (right - center)
    weights = np.maximum(np.minimum(up, down), 0.0)

    empty = np.flatnonzero(weights.sum(axis=1) == 0.0)
    if empty.size:
        raise ValueError(
            f"filters {empty.tolist()} have no FFT bin inside their triangle; "
            f"increase fft_size (currently {fft_size})"
        )
    return MelFilterbank(
        sample_rate_hz=int(sample_rate_hz),
        n_filters=int(n_filters),
        fft_size=int(fft_size),
        low_hz=float(low_hz),
        high_hz=float(high_hz),
        centers_hz=centers_hz,
        weights=weights,
    )


def compute_mfsc(buf: AudioBuffer, spec: FrameSpec, fb: MelFilterbank) -> np.ndarray:
    """Log mel filterbank energies, one row per analysis frame.

    Frames are preemphasized and windowed per ``spec``, zero-padded to
    ``fb.fft_size``, squared-magnitude transformed, and summed through the
    filterbank.  Energies are floored at ``LOG_FLOOR`` before the natural
    log, so digital silence maps to ``log(LOG_FLOOR)`` in every coefficient.
    """
    if fb.sample_rate_hz != buf.sample_rate_hz:
        raise ValueError(
            f"filterbank built for {fb.sample_rate_hz} Hz, buffer is {buf.sample_rate_hz} Hz"
        )
    w = spec.window_samples(buf.sample_rate_hz)
    if fb.fft_size < w:
        raise ValueError(
            f"fft_size {fb.fft_size} smaller than the {w}-sample analysis window"
        )
    frames = frame_signal(buf, spec)
    spectrum = np.fft.rfft(frames, n=fb.fft_size, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    energies = power @ fb.weights.T
    return np.log(np.maximum(energies, LOG_FLOOR))

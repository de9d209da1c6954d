"""Audio ingestion, resampling, framing and windowing.

Every extractor in this package consumes the :class:`AudioBuffer` produced
here.  Operations are pure: they never mutate their inputs, so buffers can be
shared freely between threads and worker processes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.signal

WINDOW_FUNCTIONS = ("hamming", "hanning", "rectangular")

_WAVE_FMT_PCM = 0x0001
_WAVE_FMT_FLOAT = 0x0003
_WAVE_FMT_EXTENSIBLE = 0xFFFE


class WavFormatError(ValueError):
    """Malformed or unsupported WAV data.

    The message carries the byte offset of the offending structure whenever
    one can be attributed, so corrupt files can be inspected with a hex dump.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TooShortError(ValueError):
    """Input signal shorter than a single analysis window."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio: float64 samples, nominally in [-1, 1], plus sample rate.

    Integer PCM is scaled by 1/32768 on ingestion so that the most negative
    16-bit code maps to exactly -1.0.  Buffers are treated as immutable.
    """

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain non-finite values")
        rate = self.sample_rate_hz
        if not isinstance(rate, (int, np.integer)) or rate <= 0:
            raise ValueError(f"sample_rate_hz must be a positive integer, got {rate!r}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass(frozen=True)
class FrameSpec:
    """Rolling analysis frame geometry plus per-frame preprocessing.

    Defaults are the front-end used throughout: 25 ms windows every 10 ms,
    Hamming weighting, preemphasis 0.97.
    """

    window_ms: float = 25.0
    stride_ms: float = 10.0
    window_fn: str = "hamming"
    preemphasis: float = 0.97

    def __post_init__(self):
        if not (self.stride_ms > 0):
            raise ValueError(f"stride_ms must be positive, got {self.stride_ms}")
        if self.stride_ms > self.window_ms:
            raise ValueError(
                f"stride_ms ({self.stride_ms}) must not exceed window_ms ({self.window_ms})"
            )
        if self.window_fn not in WINDOW_FUNCTIONS:
            raise ValueError(
                f"unknown window_fn {self.window_fn!r}, expected one of {WINDOW_FUNCTIONS}"
            )
        if not (0.0 <= self.preemphasis < 1.0):
            raise ValueError(f"preemphasis must be in [0, 1), got {self.preemphasis}")

    def window_samples(self, sample_rate_hz: int) -> int:
        w = int(round(self.window_ms * sample_rate_hz / 1000.0))
        if w < 2:
            raise ValueError(
                f"window of {self.window_ms} ms at {sample_rate_hz} Hz is below 2 samples"
            )
        return w

    def stride_samples(self, sample_rate_hz: int) -> int:
        s = int(round(self.stride_ms * sample_rate_hz / 1000.0))
        if s < 1:
            raise ValueError(
                f"stride of {self.stride_ms} ms at {sample_rate_hz} Hz is below 1 sample"
            )
        return s


def _read_u32(data: bytes, offset: int) -> int:
    return struct.unpack_from("<I", data, offset)[0]


def load_wav(path) -> AudioBuffer:
    """Read a RIFF/WAVE file into an :class:`AudioBuffer`.

    Supports 16-bit PCM and 32-bit IEEE float, 1 or 2 channels (stereo is
    averaged to mono after scaling).  Raises :class:`WavFormatError` with the
    offending byte offset for anything malformed, and ``FileNotFoundError``
    for a missing path.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[0:4] != b"RIFF":
        raise WavFormatError("not a RIFF file", 0)
    if data[8:12] != b"WAVE":
        raise WavFormatError("RIFF payload is not WAVE", 8)

    fmt = None
    fmt_offset = None
    raw = None
    data_offset = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        size = _read_u32(data, pos + 4)
        body = pos + 8
        if body + size > len(data):
            raise WavFormatError(
                f"truncated {chunk_id!r} chunk: declares {size} bytes, "
                f"{len(data) - body} remain",
                pos,
            )
        if chunk_id == b"fmt ":
            if size < 16:
                raise WavFormatError(f"fmt chunk too small ({size} bytes)", pos)
            code, channels, rate, _, block_align, bits = struct.unpack_from(
                "<HHIIHH", data, body
            )
            if code == _WAVE_FMT_EXTENSIBLE:
                if size < 26:
                    raise WavFormatError("extensible fmt chunk too small", pos)
                code = struct.unpack_from("<H", data, body + 24)[0]
            fmt = (code, channels, rate, block_align, bits)
            fmt_offset = pos
        elif chunk_id == b"data":
            raw = data[body : body + size]
            data_offset = pos
        pos = body + size + (size & 1)

    if fmt is None:
        raise WavFormatError("missing fmt chunk", len(data))
    if raw is None:
        raise WavFormatError("missing data chunk", len(data))

    code, channels, rate, _, bits = fmt
    if channels not in (1, 2):
        raise WavFormatError(f"unsupported channel count {channels}", fmt_offset)
    if (code, bits) == (_WAVE_FMT_PCM, 16):
        sample_width = 2
        decode = lambda b: np.frombuffer(b, dtype="<i2").astype(np.float64) / 32768.0
    elif (code, bits) == (_WAVE_FMT_FLOAT, 32):
        sample_width = 4
        decode = lambda b: np.clip(
            np.frombuffer(b, dtype="<f4").astype(np.float64), -1.0, 1.0
        )
    else:
        raise WavFormatError(
            f"unsupported codec: format {code:#06x} at {bits} bits "
            "(expected 16-bit PCM or 32-bit float)",
            fmt_offset,
        )

    frame_bytes = sample_width * channels
    if len(raw) % frame_bytes != 0:
        raise WavFormatError(
            f"data chunk of {len(raw)} bytes is not a multiple of the "
            f"{frame_bytes}-byte sample frame",
            data_offset,
        )
    samples = decode(raw)
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(samples, int(rate))


def write_wav(buf: AudioBuffer, path, encoding: str = "float32") -> None:
    """Write a buffer as a single-chunk RIFF/WAVE file.

    ``encoding`` is ``"float32"`` (lossless for our float pipelines) or
    ``"pcm16"``.
    """
    if encoding == "float32":
        payload = buf.samples.astype("<f4").tobytes()
        code, bits = _WAVE_FMT_FLOAT, 32
    elif encoding == "pcm16":
        scaled = np.clip(np.round(buf.samples * 32768.0), -32768, 32767)
        payload = scaled.astype("<i2").tobytes()
        code, bits = _WAVE_FMT_PCM, 16
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    byte_rate = buf.sample_rate_hz * bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, code, 1, buf.sample_rate_hz, byte_rate, bits // 8, bits
    )
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


def resample(buf: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Rate-convert with a windowed-sinc polyphase low-pass interpolator.

    Identity (bitwise) when ``target_hz`` equals the source rate.  Output
    length is ``ceil(n * target / source)``, i.e. within one sample of the
    exact ratio.
    """
    if not isinstance(target_hz, (int, np.integer)) or target_hz <= 0:
        raise ValueError(f"target_hz must be a positive integer, got {target_hz!r}")
    if int(target_hz) == buf.sample_rate_hz:
        return AudioBuffer(buf.samples, buf.sample_rate_hz)
    ratio = Fraction(int(target_hz), buf.sample_rate_hz)
    out = scipy.signal.resample_poly(buf.samples, ratio.numerator, ratio.denominator)
    return AudioBuffer(out, int(target_hz))


def frame_count(n_samples: int, window_samples: int, stride_samples: int) -> int:
    """Number of full analysis windows: floor((N - window)/stride) + 1."""
    if n_samples < window_samples:
        raise TooShortError(
            f"signal of {n_samples} samples is shorter than one "
            f"{window_samples}-sample window"
        )
    return (n_samples - window_samples) // stride_samples + 1


def window_vector(window_fn: str, window_samples: int) -> np.ndarray:
    if window_fn == "hamming":
        return np.hamming(window_samples)
    if window_fn == "hanning":
        return np.hanning(window_samples)
    if window_fn == "rectangular":
        return np.ones(window_samples)
    raise ValueError(f"unknown window_fn {window_fn!r}")


def frame_signal(buf: AudioBuffer, spec: FrameSpec) -> np.ndarray:
    """Slice, preemphasize and window a buffer into analysis frames.

    Returns a ``(frames, window_samples)`` float64 array.  Preemphasis is
    applied per frame (``x[n] - k*x[n-1]``, with the first sample of each
    frame emphasized against itself), then the window function is applied.
    With a rectangular window and zero preemphasis each frame is exactly the
    raw signal slice.
    """
    w = spec.window_samples(buf.sample_rate_hz)
    s = spec.stride_samples(buf.sample_rate_hz)
    t = frame_count(len(buf), w, s)
    idx = np.arange(t)[:, None] * s + np.arange(w)[None, :]
    frames = buf.samples[idx]
    k = spec.preemphasis
    if k > 0.0:
        emphasized = frames.copy()
        emphasized[:, 1:] -= k * frames[:, :-1]
        emphasized[:, 0] -= k * frames[:, 0]
        frames = emphasized
    if spec.window_fn != "rectangular":
        frames = frames * window_vector(spec.window_fn, w)
    return frames

"""NCCF pitch tracking in the getF0/Kaldi family.

The signal is resampled to a low internal rate, the Normalized Cross
Correlation Function is evaluated over the candidate lag range for every
analysis frame, and the Viterbi algorithm picks the lag sequence that
maximizes total NCCF minus a squared log-lag-ratio transition penalty.
Three frame-level features come out: a probability-of-voicing value mapped
from the NCCF, log pitch, and delta log pitch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sigio import AudioBuffer, frame_count, resample


@dataclass(frozen=True)
class PitchConfig:
    """Knobs for the tracker.

    The candidate lag range [floor(internal_sr/max_f0), ceil(internal_sr/min_f0)]
    is derived, not stored.  ``nccf_ballast`` damps the correlation of
    low-energy frames; the effective value is scaled by the window length
    (``nccf_ballast * window_samples / internal_sr_hz``).  ``soft_min_f0_hz``
    applies a mild short-lag preference before the Viterbi pass so that
    signals which are also periodic at twice the true period (for example
    amplitude-alternating voices) do not collapse an octave down.
    ``pov_threshold`` is the voicing decision boundary used downstream,
    compared against the ballast-free NCCF at the chosen lag.
    """

    min_f0_hz: float = 50.0
    max_f0_hz: float = 400.0
    internal_sr_hz: int = 4000
    window_ms: float = 25.0
    stride_ms: float = 10.0
    penalty_factor: float = 0.1
    nccf_ballast: float = 7000.0
    soft_min_f0_hz: float = 10.0
    pov_threshold: float = 0.45

    def __post_init__(self):
        if not (0 < self.min_f0_hz < self.max_f0_hz):
            raise ValueError(
                f"need 0 < min_f0_hz < max_f0_hz, got [{self.min_f0_hz}, {self.max_f0_hz}]"
            )
        if self.max_f0_hz > self.internal_sr_hz / 2:
            raise ValueError(
                f"max_f0_hz {self.max_f0_hz} above Nyquist of internal rate "
                f"{self.internal_sr_hz}"
            )
        if self.internal_sr_hz <= 0:
            raise ValueError("internal_sr_hz must be positive")
        if not (0 < self.stride_ms <= self.window_ms):
            raise ValueError("need 0 < stride_ms <= window_ms")
        if self.penalty_factor < 0:
            raise ValueError("penalty_factor must be nonnegative")
        if self.nccf_ballast < 0:
            raise ValueError("nccf_ballast must be nonnegative")
        if not (0.0 < self.pov_threshold < 1.0):
            raise ValueError(f"pov_threshold must be in (0, 1), got {self.pov_threshold}")

    def lag_min(self) -> int:
        return int(math.floor(self.internal_sr_hz / self.max_f0_hz))

    def lag_max(self) -> int:
        return int(math.ceil(self.internal_sr_hz / self.min_f0_hz))

    def lags(self) -> np.ndarray:
        lags = np.arange(self.lag_min(), self.lag_max() + 1, dtype=np.int64)
        if lags[0] < 1:
            raise ValueError("max_f0_hz too high: smallest candidate lag is below 1 sample")
        return lags

    def window_samples(self) -> int:
        return int(round(self.window_ms * self.internal_sr_hz / 1000.0))

    def stride_samples(self) -> int:
        return int(round(self.stride_ms * self.internal_sr_hz / 1000.0))

    def ballast_effective(self) -> float:
        return self.nccf_ballast * self.window_samples() / self.internal_sr_hz


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame tracker output.

    ``pov``, ``log_pitch`` and ``delta_pitch`` are the emitted features;
    ``best_lag`` (integer samples at the internal rate) and ``best_nccf``
    (ballast-free NCCF at that lag, clamped to [-1, 1]) are diagnostics.
    ``delta_pitch[0]`` is zero and ``delta_pitch[t] = log_pitch[t] -
    log_pitch[t-1]`` exactly.
    """

    pov: np.ndarray
    log_pitch: np.ndarray
    delta_pitch: np.ndarray
    best_lag: np.ndarray
    best_nccf: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.pov.shape[0]

    @property
    def f0_hz(self) -> np.ndarray:
        return np.exp(self.log_pitch)


def _nccf_frames(ext: np.ndarray, window_samples: int, lags: np.ndarray, ballast: float) -> np.ndarray:
    """NCCF for a batch of lookahead-extended frames.

    ``ext`` is (frames, window_samples + max_lag).  For each lag l,
    nccf(l) = sum(x[n] x[n+l]) / sqrt((e0 + ballast) * e_l), zero where the
    denominator vanishes, clamped to [-1, 1].
    """
    w = window_samples
    first = ext[:, :w]
    e0 = np.einsum("ij,ij->i", first, first)
    sq = np.empty((ext.shape[0], ext.shape[1] + 1))
    sq[:, 0] = 0.0
    np.cumsum(ext * ext, axis=1, out=sq[:, 1:])
    out = np.empty((ext.shape[0], lags.size))
    denom_base = e0 + ballast
    for j, lag in enumerate(lags):
        lag = int(lag)
        seg = ext[:, lag : lag + w]
        num = np.einsum("ij,ij->i", first, seg)
        e_l = np.maximum(sq[:, lag + w] - sq[:, lag], 0.0)
        denom = np.sqrt(denom_base * e_l)
        out[:, j] = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0.0)
    np.clip(out, -1.0, 1.0, out=out)
    return out


def compute_nccf(frame, lags, window_samples: int | None = None, ballast: float = 0.0) -> np.ndarray:
    """NCCF of one lookahead-extended frame over candidate lags.

    Parameters
    ----------
    frame : array
        Analysis window plus at least ``max(lags)`` lookahead samples.
    lags : array of int
        Candidate lags in samples, ascending, all >= 1.
    window_samples : int, optional
        Correlation window length; defaults to ``len(frame) - max(lags)``.
    ballast : float
        Added to the energy of the leading segment before normalization.
    """
    frame = np.asarray(frame, dtype=np.float64)
    lags = np.asarray(lags, dtype=np.int64)
    if frame.ndim != 1:
        raise ValueError("frame must be 1-D")
    if lags.size == 0 or np.any(lags < 1) or np.any(np.diff(lags) <= 0):
        raise ValueError("lags must be ascending positive integers")
    max_lag = int(lags[-1])
    if window_samples is None:
        window_samples = frame.size - max_lag
    if window_samples < 1:
        raise ValueError("window_samples must be >= 1")
    if window_samples + max_lag > frame.size:
        raise ValueError(
            f"lag range up to {max_lag} exceeds the available lookahead: frame has "
            f"{frame.size} samples for a {window_samples}-sample window"
        )
    return _nccf_frames(frame[None, :], window_samples, lags, ballast)[0]


def viterbi_lags(nccf_table, cfg: PitchConfig) -> np.ndarray:
    """Best lag per frame under the NCCF-minus-transition-penalty objective.

    Maximizes sum_t nccf[t][lag_t] - penalty_factor * ln(lag_t/lag_{t-1})^2
    over lag sequences; ties at every maximization resolve toward the
    smaller lag.  Returns the lag values (samples), not column indices.
    """
    table = np.asarray(nccf_table, dtype=np.float64)
    lags = cfg.lags()
    if table.ndim != 2 or table.shape[0] < 1:
        raise ValueError("nccf_table must be a nonempty 2-D array")
    if table.shape[1] != lags.size:
        raise ValueError(
            f"nccf_table has {table.shape[1]} columns but the config implies "
            f"{lags.size} candidate lags"
        )
    log_lags = np.log(lags.astype(np.float64))
    penalty = cfg.penalty_factor * (log_lags[None, :] - log_lags[:, None]) ** 2

    n_frames, n_lags = table.shape
    back = np.zeros((n_frames, n_lags), dtype=np.int64)
    score = table[0].copy()
    for t in range(1, n_frames):
        cand = score[:, None] - penalty
        best_prev = np.argmax(cand, axis=0)  # first max = smaller previous lag
        score = table[t] + cand[best_prev, np.arange(n_lags)]
        back[t] = best_prev
    j = int(np.argmax(score))
    path = np.empty(n_frames, dtype=np.int64)
    path[-1] = j
    for t in range(n_frames - 1, 0, -1):
        j = int(back[t, j])
        path[t - 1] = j
    return lags[path]


def nccf_to_pov_feature(nccf):
    """Map NCCF to the probability-of-voicing feature.

    pov = 2 * ((1.0001 - c)^(-0.15) - 1) with c the NCCF clamped to [-1, 1].
    Strictly increasing and finite over the whole input range.
    """
    c = np.clip(np.asarray(nccf, dtype=np.float64), -1.0, 1.0)
    out = 2.0 * ((1.0001 - c) ** -0.15 - 1.0)
    return float(out) if np.isscalar(nccf) else out


def _refine_lags(table: np.ndarray, idx: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """Sub-sample lag estimates from a parabola through the NCCF peak.

    The Viterbi pass picks integer lags; for tones whose true period falls
    between grid points that quantization alone costs several Hz, so the
    emitted pitch interpolates the NCCF around the chosen lag.  Diagnostics
    keep the integer lag.
    """
    refined = lags[idx].astype(np.float64)
    interior = (idx > 0) & (idx < lags.size - 1)
    rows = np.flatnonzero(interior)
    if rows.size:
        i = idx[rows]
        y0 = table[rows, i - 1]
        y1 = table[rows, i]
        y2 = table[rows, i + 1]
        denom = y0 - 2.0 * y1 + y2
        safe = np.where(denom < 0.0, denom, -1.0)
        offset = np.where(denom < 0.0, 0.5 * (y0 - y2) / safe, 0.0)
        np.clip(offset, -0.5, 0.5, out=offset)
        refined[rows] += offset
    return refined


def extract_pitch(buf: AudioBuffer, cfg: PitchConfig = PitchConfig()) -> PitchTrack:
    """Track pitch over a buffer.

    The frame count is computed from the original-rate signal with the same
    window/stride arithmetic as the spectral front end, so pitch rows always
    align one-to-one with MFSC rows.  At the internal rate each frame is
    extended with up to ``lag_max`` lookahead samples (zero-padded past the
    end of the signal).
    """
    sr = buf.sample_rate_hz
    w_orig = int(round(cfg.window_ms * sr / 1000.0))
    s_orig = int(round(cfg.stride_ms * sr / 1000.0))
    n_frames = frame_count(len(buf), w_orig, s_orig)

    internal = resample(buf, cfg.internal_sr_hz)
    isr = cfg.internal_sr_hz
    w = cfg.window_samples()
    s = cfg.stride_samples()
    lags = cfg.lags()
    lag_max = int(lags[-1])

    needed = (n_frames - 1) * s + w + lag_max
    x = internal.samples
    if x.size < needed:
        x = np.concatenate([x, np.zeros(needed - x.size)])
    ext = x[np.arange(n_frames)[:, None] * s + np.arange(w + lag_max)[None, :]]

    nccf_ballasted = _nccf_frames(ext, w, lags, cfg.ballast_effective())
    nccf_plain = _nccf_frames(ext, w, lags, 0.0)

    lag_weight = 1.0 - cfg.soft_min_f0_hz * lags.astype(np.float64) / isr
    lag_path = viterbi_lags(nccf_ballasted * lag_weight[None, :], cfg)
    idx = (lag_path - lags[0]).astype(np.int64)

    refined = _refine_lags(nccf_ballasted, idx, lags)
    rows = np.arange(n_frames)
    best_nccf = np.clip(nccf_plain[rows, idx], -1.0, 1.0)
    pov = nccf_to_pov_feature(best_nccf)
    f0 = np.clip(isr / refined, cfg.min_f0_hz, cfg.max_f0_hz)
    log_pitch = np.log(f0)
    delta = np.empty_like(log_pitch)
    delta[0] = 0.0
    delta[1:] = log_pitch[1:] - log_pitch[:-1]
    return PitchTrack(
        pov=pov,
        log_pitch=log_pitch,
        delta_pitch=delta,
        best_lag=lag_path.astype(np.int64),
        best_nccf=best_nccf,
    )

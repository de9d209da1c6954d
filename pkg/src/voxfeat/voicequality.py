"""Cycle-level jitter and shimmer, averaged over sliding windows.

Pitch cycles are laid out by integrating the frame-level f0 track and then
phase-locked to the waveform: each nominal mark snaps to the strongest local
peak of the original-rate signal (with sub-sample parabolic refinement), so
cycle-to-cycle period perturbations survive the 10 ms frame grid.  Cycle
amplitude is the peak-to-peak range of a one-period window centred on the
mark, which keeps an alternating-amplitude neighbor's pulse out of the
measurement.  Cycles whose covering frame shows no voicing evidence (or
whose implied f0 leaves the tracker's range) are dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pitch import PitchConfig, PitchTrack
from .sigio import AudioBuffer

MEASURES = ("jitter_abs", "jitter_rel", "shimmer_db", "shimmer_rel")


@dataclass(frozen=True)
class PeriodMarks:
    """Voiced pitch cycles: parallel arrays of start, period, amplitude.

    ``evidence`` carries the per-cycle voicing evidence (ballast-free NCCF
    of the covering frame).  Consecutive entries of a voiced run are
    contiguous: starts_s[i+1] == starts_s[i] + periods_s[i].
    """

    starts_s: np.ndarray
    periods_s: np.ndarray
    amplitudes: np.ndarray
    evidence: np.ndarray

    def __len__(self) -> int:
        return self.starts_s.shape[0]


@dataclass(frozen=True)
class VoiceQualityFrame:
    """All four measures for one analysis window."""

    jitter_abs: float
    jitter_rel: float
    shimmer_db: float
    shimmer_rel: float


def jitter_absolute(periods_s) -> float:
    """Mean absolute difference of consecutive periods, in seconds."""
    p = _as_periods(periods_s)
    return float(np.mean(np.abs(np.diff(p))))


def jitter_relative(periods_s) -> float:
    """jitter_absolute normalized by the mean period, as a percentage."""
    p = _as_periods(periods_s)
    return float(np.mean(np.abs(np.diff(p))) / np.mean(p) * 100.0)


def shimmer_db(amplitudes) -> float:
    """Mean absolute dB ratio of consecutive cycle amplitudes."""
    a = np.asarray(amplitudes, dtype=np.float64)
    if a.size < 2:
        raise ValueError("shimmer requires at least 2 cycles")
    if np.any(a <= 0):
        raise ValueError("shimmer_db requires positive amplitudes")
    return float(np.mean(np.abs(20.0 * np.log10(a[1:] / a[:-1]))))


def shimmer_relative(amplitudes) -> float:
    """Mean absolute amplitude difference over the mean amplitude, percent."""
    a = np.asarray(amplitudes, dtype=np.float64)
    if a.size < 2:
        raise ValueError("shimmer requires at least 2 cycles")
    return float(np.mean(np.abs(np.diff(a))) / np.mean(a) * 100.0)


def _as_periods(periods_s) -> np.ndarray:
    p = np.asarray(periods_s, dtype=np.float64)
    if p.size < 2:
        raise ValueError("jitter requires at least 2 cycles")
    if np.any(p <= 0):
        raise ValueError("periods must be positive")
    return p


def measures_for_window(periods_s, amplitudes, which=MEASURES) -> VoiceQualityFrame:
    """Reference scalar path for one window's cycle lists.

    Implements the defined-zero rule: fewer than two cycles (or, for
    ``shimmer_db``, fewer than two positive-amplitude cycles) yields 0.0.
    """
    p = np.asarray(periods_s, dtype=np.float64)
    a = np.asarray(amplitudes, dtype=np.float64)
    out = dict.fromkeys(MEASURES, 0.0)
    if p.size >= 2:
        if "jitter_abs" in which:
            out["jitter_abs"] = jitter_absolute(p)
        if "jitter_rel" in which:
            out["jitter_rel"] = jitter_relative(p)
        if "shimmer_rel" in which:
            out["shimmer_rel"] = shimmer_relative(a)
        if "shimmer_db" in which:
            pos = a[a > 0]
            if pos.size >= 2:
                out["shimmer_db"] = shimmer_db(pos)
    return VoiceQualityFrame(**out)


def _snap_peak(x: np.ndarray, center: float, radius: float) -> float:
    """Strongest sample near ``center`` with parabolic sub-sample refinement."""
    lo = max(int(math.ceil(center - radius)), 0)
    hi = min(int(math.floor(center + radius)), x.size - 1)
    if hi <= lo:
        return float(min(max(center, 0.0), x.size - 1))
    i = lo + int(np.argmax(x[lo : hi + 1]))
    if 0 < i < x.size - 1:
        y0, y1, y2 = x[i - 1], x[i], x[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0.0:
            offset = 0.5 * (y0 - y2) / denom
            return i + float(np.clip(offset, -0.5, 0.5))
    return float(i)


def _empty_marks() -> PeriodMarks:
    z = np.zeros(0)
    return PeriodMarks(z, z.copy(), z.copy(), z.copy())


def mark_periods(buf: AudioBuffer, track: PitchTrack, cfg: PitchConfig = PitchConfig()) -> PeriodMarks:
    """Lay out pitch cycles over the buffer from a pitch track.

    Walks the signal one period at a time (period = 1/f0 of the frame
    covering the current mark), snapping each mark to the nearby waveform
    peak.  Emits only voiced cycles; fully unvoiced audio yields an empty
    result.
    """
    x = buf.samples
    sr = buf.sample_rate_hz
    stride = int(round(cfg.stride_ms * sr / 1000.0))
    f0 = track.f0_hz
    n_frames = track.n_frames
    if n_frames == 0 or x.size == 0:
        return _empty_marks()

    def frame_at(position: float) -> int:
        return min(int(position // stride), n_frames - 1)

    first_period = sr / f0[0]
    marks = [_snap_peak(x, 0.625 * first_period, 0.625 * first_period)]
    while True:
        last = marks[-1]
        period = sr / f0[frame_at(last)]
        nominal = last + period
        if nominal > x.size - 1:
            break
        snapped = _snap_peak(x, nominal, 0.35 * period)
        if snapped <= last + 0.5 * period:
            snapped = nominal  # flat or pathological stretch: keep walking
        marks.append(snapped)
    if len(marks) < 2:
        return _empty_marks()

    marks = np.asarray(marks)
    starts = marks[:-1]
    periods = np.diff(marks)

    half = periods / 2.0
    lo = np.clip(np.ceil(starts - half).astype(np.int64), 0, x.size - 1)
    hi = np.clip(np.floor(starts + half).astype(np.int64), 0, x.size - 1)
    amps = np.empty(starts.size)
    for k in range(starts.size):
        window = x[lo[k] : hi[k] + 1]
        amps[k] = window.max() - window.min()

    frames = np.minimum((starts // stride).astype(np.int64), n_frames - 1)
    evidence = track.best_nccf[frames]
    implied_f0 = sr / periods
    voiced = (
        (evidence >= cfg.pov_threshold)
        & (implied_f0 >= cfg.min_f0_hz)
        & (implied_f0 <= cfg.max_f0_hz)
    )
    return PeriodMarks(
        starts_s=starts[voiced] / sr,
        periods_s=periods[voiced] / sr,
        amplitudes=amps[voiced],
        evidence=evidence[voiced],
    )


def extract_vq(
    buf: AudioBuffer,
    track: PitchTrack,
    cfg: PitchConfig = PitchConfig(),
    which=("jitter_rel", "shimmer_rel"),
    window_s: float = 0.5,
) -> np.ndarray:
    """Windowed voice-quality measures per analysis frame.

    For frame t the measures are computed over all voiced cycles whose start
    lies within ``window_s`` centred at t's frame time (clipped at the
    utterance edges).  Frames with fewer than two such cycles emit zeros.
    Columns follow the canonical order of ``MEASURES`` restricted to
    ``which``; the row count always equals ``track.n_frames``.
    """
    selected = [m for m in MEASURES if m in which]
    if len(selected) != len(set(which)):
        unknown = set(which) - set(MEASURES)
        raise ValueError(f"unknown measures {sorted(unknown)}; choose from {MEASURES}")
    n_frames = track.n_frames
    out = np.zeros((n_frames, len(selected)))
    marks = mark_periods(buf, track, cfg)
    if len(marks) < 2:
        return out

    starts = marks.starts_s
    periods = marks.periods_s
    amps = marks.amplitudes

    stride_s = cfg.stride_ms / 1000.0
    times = np.arange(n_frames) * stride_s
    a = np.searchsorted(starts, times - window_s / 2.0, side="left")
    b = np.searchsorted(starts, times + window_s / 2.0, side="right")
    count = b - a
    ok = count >= 2
    pairs = np.where(ok, count - 1, 1)

    cum_p = np.concatenate([[0.0], np.cumsum(periods)])
    cum_dp = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(periods)))])
    cum_a = np.concatenate([[0.0], np.cumsum(amps)])
    cum_da = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(amps)))])

    b_hi = np.maximum(b - 1, 0)
    sum_dp = np.where(ok, cum_dp[b_hi] - cum_dp[np.minimum(a, b_hi)], 0.0)
    sum_da = np.where(ok, cum_da[b_hi] - cum_da[np.minimum(a, b_hi)], 0.0)
    mean_p = np.where(ok, (cum_p[b] - cum_p[a]) / np.where(ok, count, 1), 1.0)
    mean_a_raw = np.where(ok, (cum_a[b] - cum_a[a]) / np.where(ok, count, 1), 0.0)
    mean_a = np.where(mean_a_raw > 0.0, mean_a_raw, 1.0)

    values = {}
    values["jitter_abs"] = np.where(ok, sum_dp / pairs, 0.0)
    values["jitter_rel"] = np.where(ok, values["jitter_abs"] / mean_p * 100.0, 0.0)
    values["shimmer_rel"] = np.where(
        ok & (mean_a_raw > 0.0), sum_da / pairs / mean_a * 100.0, 0.0
    )

    if "shimmer_db" in selected:
        pos = amps > 0.0
        starts_pos = starts[pos]
        amps_pos = amps[pos]
        db = np.zeros(n_frames)
        if amps_pos.size >= 2:
            cum_db = np.concatenate(
                [[0.0], np.cumsum(np.abs(20.0 * np.log10(amps_pos[1:] / amps_pos[:-1])))]
            )
            ap = np.searchsorted(starts_pos, times - window_s / 2.0, side="left")
            bp = np.searchsorted(starts_pos, times + window_s / 2.0, side="right")
            okp = (bp - ap) >= 2
            bp_hi = np.maximum(bp - 1, 0)
            sums = cum_db[bp_hi] - cum_db[np.minimum(ap, bp_hi)]
            db = np.where(okp, sums / np.where(okp, bp - ap - 1, 1), 0.0)
        values["shimmer_db"] = db

    for col, name in enumerate(selected):
        out[:, col] = values[name]
    return out

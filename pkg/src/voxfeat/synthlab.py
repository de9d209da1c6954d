"""Deterministic synthetic test signals with exact ground truth.

Every generated buffer comes with a :class:`GroundTruth` record carrying the
true per-cycle periods and amplitudes (where the notion applies) and the true
instantaneous f0, so extractor accuracy can be asserted against closed-form
values instead of eyeballed output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sigio import AudioBuffer

KINDS = ("sine", "chirp", "pulse_train", "white_noise", "silence")

# Fraction of each cycle occupied by the raised-cosine excitation pulse.
PULSE_DUTY = 0.25


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic signal.

    ``period_pattern`` and ``amplitude_pattern`` are per-cycle multipliers,
    tiled cyclically over the pulse train; both default to a constant cycle.
    ``f0_end_hz`` is only meaningful for ``chirp`` (linear sweep).
    """

    kind: str
    f0_start_hz: float = 200.0
    f0_end_hz: float | None = None
    amplitude_pattern: tuple[float, ...] = (1.0,)
    period_pattern: tuple[float, ...] = (1.0,)
    duration_s: float = 1.0
    sample_rate_hz: int = 16000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}, expected one of {KINDS}")
        if not (self.duration_s > 0):
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "amplitude_pattern", tuple(self.amplitude_pattern))
        object.__setattr__(self, "period_pattern", tuple(self.period_pattern))
        if not self.amplitude_pattern or min(self.amplitude_pattern) <= 0:
            raise ValueError("amplitude_pattern entries must be positive")
        if not self.period_pattern or min(self.period_pattern) <= 0:
            raise ValueError("period_pattern entries must be positive")
        if self.kind in ("sine", "chirp", "pulse_train") and not (self.f0_start_hz > 0):
            raise ValueError(f"f0_start_hz must be positive for {self.kind}")


@dataclass(frozen=True)
class GroundTruth:
    """What the generator actually put into the signal."""

    kind: str
    sample_rate_hz: int
    duration_s: float
    f0_start_hz: float | None = None
    f0_end_hz: float | None = None
    cycle_starts_s: tuple[float, ...] = ()
    cycle_periods_s: tuple[float, ...] = ()
    cycle_amplitudes: tuple[float, ...] = ()
    prng: str | None = None
    seed: int | None = None

    def instantaneous_f0(self, t):
        """True f0 at time ``t`` (scalar or array), linear over the sweep."""
        if self.f0_start_hz is None:
            raise ValueError(f"{self.kind} carries no f0")
        f1 = self.f0_end_hz if self.f0_end_hz is not None else self.f0_start_hz
        return self.f0_start_hz + (f1 - self.f0_start_hz) * np.asarray(t) / self.duration_s


def _sine_like(spec: SynthSpec, n: int):
    sr = spec.sample_rate_hz
    f0 = spec.f0_start_hz
    f1 = spec.f0_end_hz if (spec.kind == "chirp" and spec.f0_end_hz is not None) else f0
    amp = spec.amplitude_pattern[0]
    t = np.arange(n) / sr
    sweep = (f1 - f0) / (2.0 * spec.duration_s)
    phase = 2.0 * np.pi * (f0 * t + sweep * t * t)
    samples = amp * np.sin(phase)

    # Cycle boundaries are the solutions of the integrated-phase equation
    # f0*t + sweep*t^2 = k.
    starts = []
    k = 0
    while True:
        if sweep == 0.0:
            tk = k / f0
        else:
            tk = (-f0 + math.sqrt(f0 * f0 + 4.0 * sweep * k)) / (2.0 * sweep)
        if tk >= spec.duration_s:
            break
        starts.append(tk)
        k += 1
    if len(starts) > 1:
        periods = tuple(float(p) for p in np.diff(np.asarray(starts)))
        starts_out = tuple(starts[:-1])
    else:
        periods = ()
        starts_out = ()
    truth = GroundTruth(
        kind=spec.kind,
        sample_rate_hz=sr,
        duration_s=spec.duration_s,
        f0_start_hz=f0,
        f0_end_hz=f1,
        cycle_starts_s=starts_out,
        cycle_periods_s=periods,
        cycle_amplitudes=(2.0 * amp,) * len(periods),
    )
    return samples, truth


def _pulse_train(spec: SynthSpec, n: int):
    sr = spec.sample_rate_hz
    base_period = sr / spec.f0_start_hz  # samples
    samples = np.zeros(n)
    centers = []
    periods = []
    amplitudes = []
    k = 0
    center = 0.5 * base_period * spec.period_pattern[0]
    while True:
        period = base_period * spec.period_pattern[k % len(spec.period_pattern)]
        width = PULSE_DUTY * period
        if center + 0.5 * width > n:
            break
        amp = spec.amplitude_pattern[k % len(spec.amplitude_pattern)]
        lo = max(int(math.ceil(center - 0.5 * width)), 0)
        hi = min(int(math.floor(center + 0.5 * width)), n - 1)
        offsets = np.arange(lo, hi + 1) - center
        samples[lo : hi + 1] += amp * 0.5 * (1.0 + np.cos(2.0 * np.pi * offsets / width))
        centers.append(center / sr)
        periods.append(period / sr)
        amplitudes.append(amp)
        center += period
        k += 1
    truth = GroundTruth(
        kind="pulse_train",
        sample_rate_hz=sr,
        duration_s=spec.duration_s,
        f0_start_hz=spec.f0_start_hz,
        f0_end_hz=spec.f0_start_hz,
        cycle_starts_s=tuple(centers),
        cycle_periods_s=tuple(periods),
        cycle_amplitudes=tuple(amplitudes),
    )
    return samples, truth


def synth(spec: SynthSpec):
    """Render ``spec`` into ``(AudioBuffer, GroundTruth)``.

    Deterministic: the same spec always yields bitwise-identical samples.
    Buffers are exactly ``round(duration_s * sample_rate_hz)`` samples long.
    """
    n = int(round(spec.duration_s * spec.sample_rate_hz))
    if spec.kind in ("sine", "chirp"):
        samples, truth = _sine_like(spec, n)
    elif spec.kind == "pulse_train":
        samples, truth = _pulse_train(spec, n)
    elif spec.kind == "white_noise":
        rng = np.random.default_rng(spec.seed)
        amp = spec.amplitude_pattern[0]
        samples = amp * rng.uniform(-1.0, 1.0, n)
        truth = GroundTruth(
            kind="white_noise",
            sample_rate_hz=spec.sample_rate_hz,
            duration_s=spec.duration_s,
            prng="pcg64-uniform",
            seed=spec.seed,
        )
    else:  # silence
        samples = np.zeros(n)
        truth = GroundTruth(
            kind="silence",
            sample_rate_hz=spec.sample_rate_hz,
            duration_s=spec.duration_s,
        )
    return AudioBuffer(samples, spec.sample_rate_hz), truth

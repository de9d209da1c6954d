"""Feature assembly, serialization and batch extraction.

Five feature sets are supported, always in the same column order:
40 MFSC coefficients, then (pov, log_pitch, delta_pitch), then jitter_rel
and/or shimmer_rel.  Matrices are stored as float32, either in the compact
``.pft`` binary layout (magic ``PFT1``, little-endian u32 rows/cols,
row-major little-endian f32 payload) or as CSV with a header row and nine
significant digits, which round-trips float32 exactly.
"""

from __future__ import annotations

import concurrent.futures
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import mfsc as mfsc_mod
from .pitch import PitchConfig, extract_pitch
from .sigio import AudioBuffer, FrameSpec, load_wav
from .voicequality import extract_vq

PFT_MAGIC = b"PFT1"

FEATURE_SETS = (
    "mfsc",
    "mfsc+pitch",
    "mfsc+pitch+jitter",
    "mfsc+pitch+shimmer",
    "mfsc+pitch+jitter+shimmer",
)

_PITCH_COLUMNS = ("pov", "log_pitch", "delta_pitch")


@dataclass(frozen=True)
class FeatureConfig:
    """Everything needed to turn a buffer into a feature matrix."""

    features: str = "mfsc"
    frame: FrameSpec = field(default_factory=FrameSpec)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    n_filters: int = 40
    fft_size: int | None = None
    low_hz: float = 0.0
    high_hz: float | None = None
    vq_window_s: float = 0.5

    def __post_init__(self):
        if self.features not in FEATURE_SETS:
            raise ValueError(
                f"unknown feature set {self.features!r}, expected one of {FEATURE_SETS}"
            )
        if (self.frame.window_ms, self.frame.stride_ms) != (
            self.pitch.window_ms,
            self.pitch.stride_ms,
        ):
            raise ValueError(
                "frame and pitch window/stride must agree for the streams to stay aligned"
            )
        if self.vq_window_s <= 0:
            raise ValueError("vq_window_s must be positive")

    @property
    def wants_pitch(self) -> bool:
        return self.features != "mfsc"

    @property
    def vq_measures(self) -> tuple[str, ...]:
        measures = []
        if "jitter" in self.features:
            measures.append("jitter_rel")
        if "shimmer" in self.features:
            measures.append("shimmer_rel")
        return tuple(measures)

    def column_names(self) -> tuple[str, ...]:
        names = [f"mfsc_{i}" for i in range(self.n_filters)]
        if self.wants_pitch:
            names.extend(_PITCH_COLUMNS)
        names.extend(self.vq_measures)
        return tuple(names)


@dataclass(frozen=True)
class FeatureMatrix:
    """frames x dimensions float32 matrix with named columns."""

    data: np.ndarray
    columns: tuple[str, ...]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError(f"feature data must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature data contains non-finite values")
        columns = tuple(self.columns)
        if len(columns) != data.shape[1]:
            raise ValueError(
                f"{len(columns)} column names for {data.shape[1]} data columns"
            )
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "columns", columns)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_dims(self) -> int:
        return self.data.shape[1]


class FrameCountMismatch(RuntimeError):
    """Internal consistency failure: extractor streams disagree on length."""


def extract(buf: AudioBuffer, cfg: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    """Run the configured extractors and assemble the feature matrix.

    Each block is computed in float64 and cast to float32 at assembly;
    column slices of the result are therefore bit-identical to the cast
    standalone extractor outputs.
    """
    window = cfg.frame.window_samples(buf.sample_rate_hz)
    fft_size = cfg.fft_size or mfsc_mod.default_fft_size(window)
    fb = mfsc_mod.build_filterbank(
        buf.sample_rate_hz, cfg.n_filters, fft_size, cfg.low_hz, cfg.high_hz
    )
    mfsc = mfsc_mod.compute_mfsc(buf, cfg.frame, fb)
    blocks = [mfsc.astype(np.float32)]

    if cfg.wants_pitch:
        track = extract_pitch(buf, cfg.pitch)
        if track.n_frames != mfsc.shape[0]:
            raise FrameCountMismatch(
                f"pitch produced {track.n_frames} frames, MFSC {mfsc.shape[0]}"
            )
        blocks.append(
            np.stack([track.pov, track.log_pitch, track.delta_pitch], axis=1).astype(
                np.float32
            )
        )
        if cfg.vq_measures:
            vq = extract_vq(buf, track, cfg.pitch, cfg.vq_measures, cfg.vq_window_s)
            if vq.shape[0] != mfsc.shape[0]:
                raise FrameCountMismatch(
                    f"voice quality produced {vq.shape[0]} frames, MFSC {mfsc.shape[0]}"
                )
            blocks.append(vq.astype(np.float32))

    return FeatureMatrix(np.concatenate(blocks, axis=1), cfg.column_names())


def write_matrix(matrix: FeatureMatrix, path, fmt: str = "bin") -> None:
    """Serialize a matrix as ``.pft`` binary (default) or CSV."""
    path = Path(path)
    if fmt == "bin":
        header = PFT_MAGIC + struct.pack("<II", matrix.n_frames, matrix.n_dims)
        path.write_bytes(header + matrix.data.astype("<f4").tobytes())
    elif fmt == "csv":
        lines = [",".join(matrix.columns)]
        for row in matrix.data:
            lines.append(",".join(f"{float(v):.9g}" for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown format {fmt!r}, expected 'bin' or 'csv'")


def read_matrix(path, fmt: str | None = None) -> FeatureMatrix:
    """Load a matrix written by :func:`write_matrix`.

    Format is sniffed from the file contents when not given.  The binary
    layout carries no column names, so those come back as ``c0..cN``.
    """
    path = Path(path)
    raw = path.read_bytes()
    if fmt is None:
        fmt = "bin" if raw[:4] == PFT_MAGIC else "csv"
    if fmt == "bin":
        if raw[:4] != PFT_MAGIC:
            raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected {PFT_MAGIC!r}")
        if len(raw) < 12:
            raise ValueError(f"{path}: truncated header ({len(raw)} bytes)")
        rows, cols = struct.unpack_from("<II", raw, 4)
        expected = 12 + 4 * rows * cols
        if len(raw) != expected:
            raise ValueError(
                f"{path}: payload is {len(raw) - 12} bytes, header implies {expected - 12}"
            )
        data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(rows, cols)
        return FeatureMatrix(data, tuple(f"c{i}" for i in range(cols)))
    if fmt == "csv":
        lines = [ln for ln in raw.decode("utf-8").splitlines() if ln]
        if not lines:
            raise ValueError(f"{path}: empty CSV")
        columns = tuple(lines[0].split(","))
        values = [
            np.asarray([float(v) for v in ln.split(",")], dtype=np.float64)
            for ln in lines[1:]
        ]
        data = (
            np.stack(values).astype(np.float32)
            if values
            else np.zeros((0, len(columns)), dtype=np.float32)
        )
        if values and data.shape[1] != len(columns):
            raise ValueError(f"{path}: row width differs from header width")
        return FeatureMatrix(data, columns)
    raise ValueError(f"unknown format {fmt!r}, expected 'bin' or 'csv'")


@dataclass(frozen=True)
class DatasetEntry:
    utt_id: str
    path: str
    duration_s: float
    transcript: str


@dataclass(frozen=True)
class DatasetList:
    entries: tuple[DatasetEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


def load_dataset_list(path) -> DatasetList:
    """Parse a tab-separated dataset list: id, wav path, duration, transcript."""
    entries = []
    seen = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t", 3)
        if len(parts) != 4:
            raise ValueError(
                f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}"
            )
        utt_id, wav_path, duration, transcript = parts
        if utt_id in seen:
            raise ValueError(f"{path}:{lineno}: duplicate utterance id {utt_id!r}")
        seen.add(utt_id)
        try:
            duration_s = float(duration)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad duration {duration!r}") from None
        entries.append(DatasetEntry(utt_id, wav_path, duration_s, transcript))
    return DatasetList(tuple(entries))


@dataclass(frozen=True)
class BatchSummary:
    n_ok: int
    failures: tuple[tuple[str, str], ...]  # (utterance id, reason), sorted by id


def _extract_one(args) -> tuple[str, str | None]:
    entry, cfg, out_dir = args
    try:
        buf = load_wav(entry.path)
        matrix = extract(buf, cfg)
        write_matrix(matrix, Path(out_dir) / f"{entry.utt_id}.pft", "bin")
        return entry.utt_id, None
    except Exception as exc:  # per-entry failures are data, not crashes
        return entry.utt_id, f"{type(exc).__name__}: {exc}"


def batch_extract(
    dataset: DatasetList, cfg: FeatureConfig, out_dir, jobs: int = 1
) -> BatchSummary:
    """Extract every entry to ``<out_dir>/<id>.pft``.

    Entries are independent, so output bytes do not depend on ``jobs`` or on
    completion order.  Failures (missing/corrupt audio, too-short signals)
    are collected in the summary rather than aborting the batch.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    work = [(entry, cfg, out_dir) for entry in dataset.entries]
    if jobs > 1 and len(work) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_one, work))
    else:
        results = [_extract_one(item) for item in work]
    failures = tuple(sorted((uid, err) for uid, err in results if err is not None))
    return BatchSummary(n_ok=len(results) - len(failures), failures=failures)

"""voxfeat: speech features, pitch, voice quality, and decoding."""

from .sigio import (
    AudioBuffer,
    FrameSpec,
    TooShortError,
    WavFormatError,
    frame_signal,
    load_wav,
    resample,
    write_wav,
)
from .mfsc import MelFilterbank, build_filterbank, compute_mfsc, mel_scale, mel_to_hz
from .pitch import PitchConfig, PitchTrack, compute_nccf, extract_pitch, viterbi_lags
from .voicequality import PeriodMarks, VoiceQualityFrame, extract_vq, mark_periods
from .featpipe import (
    FeatureConfig,
    FeatureMatrix,
    batch_extract,
    extract,
    load_dataset_list,
    read_matrix,
    write_matrix,
)
from .decoder import (
    DecoderOptions,
    Lexicon,
    NGramLM,
    TokenSet,
    WerReport,
    beam_decode,
    greedy_decode,
    lm_score,
    load_arpa,
    load_lexicon,
    load_tokens,
    wer,
)
from .synthlab import GroundTruth, SynthSpec, synth

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "FrameSpec",
    "TooShortError",
    "WavFormatError",
    "frame_signal",
    "load_wav",
    "resample",
    "write_wav",
    "MelFilterbank",
    "build_filterbank",
    "compute_mfsc",
    "mel_scale",
    "mel_to_hz",
    "PitchConfig",
    "PitchTrack",
    "compute_nccf",
    "extract_pitch",
    "viterbi_lags",
    "PeriodMarks",
    "VoiceQualityFrame",
    "extract_vq",
    "mark_periods",
    "FeatureConfig",
    "FeatureMatrix",
    "batch_extract",
    "extract",
    "load_dataset_list",
    "read_matrix",
    "write_matrix",
    "DecoderOptions",
    "Lexicon",
    "NGramLM",
    "TokenSet",
    "WerReport",
    "beam_decode",
    "greedy_decode",
    "lm_score",
    "load_arpa",
    "load_lexicon",
    "load_tokens",
    "wer",
    "GroundTruth",
    "SynthSpec",
    "synth",
]

"""Command-line front end.

Subcommands: ``extract`` (features to .pft/CSV, single file or batch),
``pitch`` and ``vq`` (diagnostic CSV dumps), ``synth`` (test signals with a
ground-truth JSON sidecar), ``decode`` (greedy or beam over an emission
matrix), and ``wer`` (transcript scoring).

Every tunable knob has a flat ``key=value`` config-file representation and a
corresponding flag; flags override the file, the file overrides built-in
defaults.  Unknown config keys are rejected before any work happens.  Exit
codes: 0 success, 1 data error, 2 usage error; failures print a single
``ERROR <code>: <message>`` line to stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import featpipe
from .decoder import (
    DecoderOptions,
    beam_decode,
    cer,
    greedy_decode,
    load_arpa,
    load_lexicon,
    load_tokens,
    normalize_transcript,
    wer,
)
from .featpipe import FEATURE_SETS, FeatureConfig, load_dataset_list, read_matrix
from .pitch import PitchConfig, extract_pitch
from .sigio import FrameSpec, load_wav, write_wav
from .synthlab import KINDS, SynthSpec, synth
from .voicequality import MEASURES, extract_vq, mark_periods


class _UsageError(Exception):
    pass


def _opt_int(text: str):
    return None if text == "auto" else int(text)


def _opt_float(text: str):
    return None if text == "auto" else float(text)


# provenance labels shown in --help next to each default
_RECIPE = "recipe default"
_TRACKER = "pitch-tracker default"
_LOCAL = "toolkit convention"

# name, converter, default, provenance, help text
_KNOBS = [
    ("features", str, "mfsc", _RECIPE, "feature set, one of " + ", ".join(FEATURE_SETS)),
    ("window_ms", float, 25.0, _RECIPE, "analysis window length in ms"),
    ("stride_ms", float, 10.0, _RECIPE, "frame step in ms"),
    ("window_fn", str, "hamming", _LOCAL, "window function (hamming/hanning/rectangular)"),
    ("preemphasis", float, 0.97, _LOCAL, "per-frame preemphasis coefficient"),
    ("n_filters", int, 40, _RECIPE, "number of mel filters"),
    ("fft_size", _opt_int, None, _LOCAL, "FFT size, or 'auto' for next power of two"),
    ("low_hz", float, 0.0, _LOCAL, "filterbank lower edge in Hz"),
    ("high_hz", _opt_float, None, _LOCAL, "filterbank upper edge in Hz, 'auto' = Nyquist"),
    ("min_f0_hz", float, 50.0, _TRACKER, "pitch search floor in Hz"),
    ("max_f0_hz", float, 400.0, _TRACKER, "pitch search ceiling in Hz"),
    ("internal_sr_hz", int, 4000, _TRACKER, "internal pitch sample rate in Hz"),
    ("penalty_factor", float, 0.1, _TRACKER, "lag-transition penalty factor"),
    ("nccf_ballast", float, 7000.0, _TRACKER, "NCCF ballast constant"),
    ("soft_min_f0_hz", float, 10.0, _TRACKER, "soft minimum f0 for lag weighting"),
    ("pov_threshold", float, 0.45, _LOCAL, "voicing-evidence gate for cycle selection"),
    ("vq_window_s", float, 0.5, _RECIPE, "jitter/shimmer averaging window in seconds"),
    ("lm_weight", float, 2.5, _RECIPE, "language-model weight"),
    ("word_score", float, 1.0, _RECIPE, "per-word insertion score"),
    ("beam_size", int, 2500, _RECIPE, "maximum hypotheses kept per frame"),
    ("beam_threshold", float, 25.0, _RECIPE, "score window below the frame best"),
    ("sil_weight", float, -0.4, _RECIPE, "score added per silence frame"),
]
_KNOB_BY_NAME = {name: (conv, default) for name, conv, default, _, _ in _KNOBS}


def _parse_config_file(path) -> dict:
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise _UsageError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KNOB_BY_NAME:
            raise _UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        conv, _ = _KNOB_BY_NAME[key]
        try:
            values[key] = conv(value)
        except ValueError:
            raise _UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def _add_knob_flags(parser):
    parser.add_argument("--config", metavar="FILE|SET",
                        help="key=value config file, or a feature-set name "
                             "(shorthand for features=<name>)")
    for name, conv, default, provenance, help_text in _KNOBS:
        parser.add_argument(
            "--" + name.replace("_", "-"),
            dest=name,
            type=conv,
            default=None,
            help=f"{help_text} (default: {'auto' if default is None else default}; {provenance})",
        )


def _resolve_knobs(args) -> dict:
    values = {name: default for name, _, default, _, _ in _KNOBS}
    config = getattr(args, "config", None)
    if config is not None:
        if config in FEATURE_SETS:  # preset name beats a same-named file
            values["features"] = config
        else:
            values.update(_parse_config_file(config))
    for name in _KNOB_BY_NAME:
        override = getattr(args, name, None)
        if override is not None:
            values[name] = override
    return values


def _frame_spec(v) -> FrameSpec:
    return FrameSpec(window_ms=v["window_ms"], stride_ms=v["stride_ms"],
                     window_fn=v["window_fn"], preemphasis=v["preemphasis"])


def _pitch_config(v) -> PitchConfig:
    return PitchConfig(
        min_f0_hz=v["min_f0_hz"], max_f0_hz=v["max_f0_hz"],
        internal_sr_hz=v["internal_sr_hz"], window_ms=v["window_ms"],
        stride_ms=v["stride_ms"], penalty_factor=v["penalty_factor"],
        nccf_ballast=v["nccf_ballast"], soft_min_f0_hz=v["soft_min_f0_hz"],
        pov_threshold=v["pov_threshold"],
    )


def _feature_config(v) -> FeatureConfig:
    return FeatureConfig(
        features=v["features"], frame=_frame_spec(v), pitch=_pitch_config(v),
        n_filters=v["n_filters"], fft_size=v["fft_size"],
        low_hz=v["low_hz"], high_hz=v["high_hz"], vq_window_s=v["vq_window_s"],
    )


def _decoder_options(v) -> DecoderOptions:
    return DecoderOptions(
        lm_weight=v["lm_weight"], word_score=v["word_score"],
        beam_size=v["beam_size"], beam_threshold=v["beam_threshold"],
        sil_weight=v["sil_weight"],
    )


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", encoding="utf-8")


def _read_transcripts(path) -> dict:
    table = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'id<TAB>text'")
        utt_id, text = line.split("\t", 1)
        if utt_id in table:
            raise ValueError(f"{path}:{lineno}: duplicate utterance id {utt_id!r}")
        table[utt_id] = text
    return table


def _cmd_extract(args) -> int:
    v = _resolve_knobs(args)
    cfg = _feature_config(v)
    if args.list is not None:
        if args.input is not None:
            raise _UsageError("use either --input or --list, not both")
        if args.outdir is None:
            raise _UsageError("--list requires --outdir")
        dataset = load_dataset_list(args.list)
        jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
        summary = featpipe.batch_extract(dataset, cfg, args.outdir, jobs=jobs)
        print(f"extracted {summary.n_ok} ok, {len(summary.failures)} failed")
        for utt_id, reason in summary.failures:
            print(f"ERROR 1: {utt_id}: {reason}", file=sys.stderr)
        return 1 if summary.failures else 0
    if args.input is None:
        raise _UsageError("--input (or --list) is required")
    if args.output is None:
        raise _UsageError("--output is required with --input")
    buf = load_wav(args.input)
    matrix = featpipe.extract(buf, cfg)
    featpipe.write_matrix(matrix, args.output, fmt=args.format)
    return 0


def _cmd_pitch(args) -> int:
    v = _resolve_knobs(args)
    cfg = _pitch_config(v)
    buf = load_wav(args.input)
    track = extract_pitch(buf, cfg)
    f0 = track.f0_hz
    with _open_out(args.output) as out:
        out.write("frame,f0_hz,pov,log_pitch,delta_pitch,best_lag,best_nccf\n")
        for t in range(track.n_frames):
            out.write("%d,%.9g,%.9g,%.9g,%.9g,%d,%.9g\n" % (
                t, f0[t], track.pov[t], track.log_pitch[t],
                track.delta_pitch[t], track.best_lag[t], track.best_nccf[t]))
    return 0


def _cmd_vq(args) -> int:
    v = _resolve_knobs(args)
    cfg = _pitch_config(v)
    which = tuple(m.strip() for m in args.measures.split(",") if m.strip())
    buf = load_wav(args.input)
    track = extract_pitch(buf, cfg)
    values = extract_vq(buf, track, cfg, which=which, window_s=v["vq_window_s"])
    selected = [m for m in MEASURES if m in which]
    stride_s = cfg.stride_ms / 1000.0
    with _open_out(args.output) as out:
        out.write("frame,time_s," + ",".join(selected) + "\n")
        for t in range(values.shape[0]):
            row = ",".join("%.9g" % x for x in values[t])
            out.write("%d,%.9g,%s\n" % (t, t * stride_s, row))
    if args.dump_cycles:
        marks = mark_periods(buf, track, cfg)
        with open(args.dump_cycles, "w", encoding="utf-8") as out:
            out.write("cycle,time_s,period_s,amplitude,evidence\n")
            for i in range(len(marks)):
                out.write("%d,%.9g,%.9g,%.9g,%.9g\n" % (
                    i, marks.starts_s[i], marks.periods_s[i],
                    marks.amplitudes[i], marks.evidence[i]))
    return 0


def _parse_pattern(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        kind=args.kind, f0_start_hz=args.f0, f0_end_hz=args.f0_end,
        amplitude_pattern=args.amplitude_pattern, period_pattern=args.period_pattern,
        duration_s=args.dur, sample_rate_hz=args.sr, seed=args.seed,
    )
    buf, truth = synth(spec)
    write_wav(buf, args.output, encoding=args.encoding)
    sidecar = Path(args.output).with_suffix(".json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(truth), fh, indent=2)
        fh.write("\n")
    return 0


def _cmd_decode(args) -> int:
    v = _resolve_knobs(args)
    tokens = load_tokens(args.tokens, silence=args.silence)
    matrix = read_matrix(args.emissions)
    emissions = matrix.data.astype(np.float64)
    if args.greedy:
        text = greedy_decode(emissions, tokens)
        score = None
    else:
        if args.lexicon is None or args.lm is None:
            raise _UsageError("beam decoding requires --lexicon and --lm (or use --greedy)")
        lexicon = load_lexicon(args.lexicon, tokens)
        lm = load_arpa(args.lm)
        words, score = beam_decode(emissions, tokens, lexicon, lm, _decoder_options(v))
        text = " ".join(words)
    with _open_out(args.output) as out:
        out.write(text + "\n")
    if args.print_score and score is not None:
        print("SCORE %.6f" % score, file=sys.stderr)
    return 0


def _cmd_wer(args) -> int:
    ref = _read_transcripts(args.ref)
    hyp = _read_transcripts(args.hyp)
    missing = sorted(set(ref) - set(hyp))
    if missing:
        raise ValueError(f"hypothesis file missing utterances: {', '.join(missing)}")
    extra = sorted(set(hyp) - set(ref))
    if extra:
        raise ValueError(f"hypothesis file has unknown utterances: {', '.join(extra)}")

    lowercase = not args.keep_case
    strip_punct = not args.keep_punct
    tot_s = tot_i = tot_d = tot_n = 0
    cer_s = cer_i = cer_d = cer_n = 0
    for utt_id in ref:
        r = normalize_transcript(ref[utt_id], lowercase, strip_punct)
        h = normalize_transcript(hyp[utt_id], lowercase, strip_punct)
        report = wer(r, h)
        if args.per_utt:
            print(f"{utt_id}\t{report.wer_pct:.2f}")
        tot_s += report.substitutions
        tot_i += report.insertions
        tot_d += report.deletions
        tot_n += report.reference_words
        if args.cer:
            creport = cer(r, h)
            cer_s += creport.substitutions
            cer_i += creport.insertions
            cer_d += creport.deletions
            cer_n += creport.reference_words
    errors = tot_s + tot_i + tot_d
    pct = 100.0 * errors / tot_n if tot_n else 0.0
    print(f"WER {pct:.2f}")
    print(f"S={tot_s} I={tot_i} D={tot_d} N={tot_n}")
    if args.cer:
        cerrors = cer_s + cer_i + cer_d
        cpct = 100.0 * cerrors / cer_n if cer_n else 0.0
        print(f"CER {cpct:.2f}")
    return 0


class _Parser(argparse.ArgumentParser):
    """argparse with the toolkit's structured usage-error lines."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"ERROR 2: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="voxfeat", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="extract a feature matrix from audio")
    p.add_argument("-i", "--input", help="input WAV file")
    p.add_argument("-o", "--output", help="output matrix path")
    p.add_argument("--format", choices=("bin", "csv"), default="bin",
                   help="single-file output format (batch always writes .pft)")
    p.add_argument("--list", help="dataset list file (id<TAB>path<TAB>dur<TAB>text)")
    p.add_argument("--outdir", help="output directory for batch mode")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel workers for batch mode (default: all cores)")
    _add_knob_flags(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("pitch", help="per-frame pitch diagnostics as CSV")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", default=None, help="CSV path (default: stdout)")
    _add_knob_flags(p)
    p.set_defaults(func=_cmd_pitch)

    p = sub.add_parser("vq", help="per-frame jitter/shimmer as CSV")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", default=None, help="CSV path (default: stdout)")
    p.add_argument("--measures", default="jitter_rel,shimmer_rel",
                   help="comma-separated subset of " + ",".join(MEASURES))
    p.add_argument("--dump-cycles", metavar="PATH",
                   help="also write per-cycle (time, period, amplitude) CSV")
    _add_knob_flags(p)
    p.set_defaults(func=_cmd_vq)

    p = sub.add_parser("synth", help="generate a test signal plus ground-truth JSON")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--f0", type=float, default=200.0, help="start f0 in Hz")
    p.add_argument("--f0-end", type=float, default=None, help="end f0 for chirp")
    p.add_argument("--dur", type=float, default=1.0, help="duration in seconds")
    p.add_argument("--sr", type=int, default=16000, help="sample rate in Hz")
    p.add_argument("--amplitude-pattern", type=_parse_pattern, default=(1.0,),
                   metavar="A,B,...", help="per-cycle amplitude multipliers")
    p.add_argument("--period-pattern", type=_parse_pattern, default=(1.0,),
                   metavar="A,B,...", help="per-cycle period multipliers")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--encoding", choices=("float32", "pcm16"), default="float32")
    p.add_argument("-o", "--output", required=True, help="output WAV path")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("decode", help="decode an emission matrix to words")
    p.add_argument("--emissions", required=True, help=".pft or CSV emission matrix")
    p.add_argument("--tokens", required=True, help="token list, one per line")
    p.add_argument("--silence", default="|", help="silence/word-separator token")
    p.add_argument("--lexicon", help="word<TAB>spelling lexicon")
    p.add_argument("--lm", help="ARPA n-gram model")
    p.add_argument("--greedy", action="store_true", help="best-path decode, no lexicon/LM")
    p.add_argument("--print-score", action="store_true",
                   help="print the hypothesis score to stderr")
    p.add_argument("-o", "--output", default=None, help="write text here (default: stdout)")
    _add_knob_flags(p)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("wer", help="score hypothesis transcripts against references")
    p.add_argument("--ref", required=True, help="reference transcripts, id<TAB>text")
    p.add_argument("--hyp", required=True, help="hypothesis transcripts, id<TAB>text")
    p.add_argument("--per-utt", action="store_true", help="print per-utterance rates")
    p.add_argument("--cer", action="store_true", help="also report character error rate")
    p.add_argument("--keep-case", action="store_true", help="skip lowercasing")
    p.add_argument("--keep-punct", action="store_true", help="keep punctuation")
    p.set_defaults(func=_cmd_wer)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"ERROR 2: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"ERROR 1: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

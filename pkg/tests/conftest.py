"""Shared test helpers: slow-but-obvious reference implementations.

Anything used as an oracle here is written independently of the package
internals — direct-summation DFT, scalar loops, exhaustive enumeration — so
agreement is evidence, not tautology.
"""

import itertools
import math

import numpy as np

from voxfeat.decoder import NGramLM, TokenSet, build_lexicon, lm_score
from voxfeat.pitch import PitchConfig


def naive_dft_power(x, fft_size):
    """One-sided power spectrum by direct O(N^2) summation (no FFT).

    ``x`` is zero-padded (or truncated) to ``fft_size``; returns
    ``fft_size // 2 + 1`` values of Re^2 + Im^2.
    """
    x = np.asarray(x, dtype=np.float64)
    padded = np.zeros(fft_size)
    padded[: min(len(x), fft_size)] = x[:fft_size]
    k = np.arange(fft_size // 2 + 1)
    n = np.arange(fft_size)
    angles = 2.0 * math.pi * np.outer(k, n) / fft_size
    re = (np.cos(angles) * padded).sum(axis=1)
    im = -(np.sin(angles) * padded).sum(axis=1)
    return re * re + im * im


def dft_peak_hz(samples, sample_rate_hz):
    """Frequency of the largest DFT magnitude bin (coarse, bin-resolution)."""
    spec = np.abs(np.fft.rfft(samples))
    return np.argmax(spec) * sample_rate_hz / len(samples)


def levenshtein_distance(a, b):
    """Independent two-row unit-cost edit distance over sequences."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


# ----------------------------------------------------- Viterbi lag oracle

# max_f0 400 at 4 kHz pins the smallest lag at 10; min_f0 picks the largest
MIN_F0_FOR_LAG_COUNT = {2: 370.0, 3: 350.0, 4: 320.0, 5: 300.0,
                        6: 280.0, 7: 260.0, 8: 236.0}


def config_with_lags(n_lags, **kw):
    cfg = PitchConfig(min_f0_hz=MIN_F0_FOR_LAG_COUNT[n_lags], max_f0_hz=400.0, **kw)
    assert cfg.lags().size == n_lags
    return cfg


def reference_path_scores(table, lags, penalty_factor, paths):
    """Score lag paths with the published objective, frame by frame.

    ``paths`` is (n_paths, T) of column indices; the accumulation order
    matches a left-to-right dynamic program so agreement can be exact.
    """
    log_lags = np.log(lags.astype(np.float64))
    s = table[0, paths[:, 0]].copy()
    for t in range(1, table.shape[0]):
        pen = penalty_factor * (log_lags[paths[:, t]] - log_lags[paths[:, t - 1]]) ** 2
        s = table[t, paths[:, t]] + (s - pen)
    return s


def all_lag_paths(n_lags, n_frames):
    return np.indices((n_lags,) * n_frames).reshape(n_frames, -1).T


# ------------------------------------------------- beam-search brute force


def brute_force_decode(emissions, tokens, lexicon, lm, opts):
    """Optimum over every legal word/spelling/silence alignment.

    Enumerates word sequences, spelling choices, optional silence runs at
    each boundary, and all frame assignments (each label >= 1 frame), then
    scores each alignment frame by frame in path order.  Returns
    ``(word_id_tuple, score)``; ties prefer the lexicographically smaller
    word-id sequence.
    """
    em = np.asarray(emissions, dtype=np.float64)
    n_frames = em.shape[0]
    sil = tokens.silence_index
    hist_len = max(lm.order - 1, 0)

    def truncate(hist):
        return hist[-hist_len:] if hist_len else ()

    best = [-math.inf, None]

    def consider(score, words):
        if score > best[0] or (score == best[0] and words < best[1]):
            best[0], best[1] = score, words

    def walk(slots, words):
        """DFS over run lengths for a fixed label-slot sequence."""
        n_slots = len(slots)

        def go(i, t, score, hist):
            if i == n_slots:
                if t == n_frames:
                    consider(score + opts.lm_weight * lm_score(lm, hist, lm.eos), words)
                return
            tok, wid = slots[i]
            s = score
            tt = t
            while tt < n_frames:
                s = s + em[tt, tok]
                if tok == sil:
                    s = s + opts.sil_weight
                tt += 1
                if n_frames - tt >= n_slots - i - 1:
                    if wid is None:
                        go(i + 1, tt, s, hist)
                    else:
                        word = lexicon.words[wid]
                        s_end = s + opts.lm_weight * lm_score(lm, hist, word)
                        s_end = s_end + opts.word_score
                        go(i + 1, tt, s_end, truncate(hist + (word,)))

        go(0, 0, 0.0, truncate((lm.bos,)))

    n_words = len(lexicon.words)
    for k in range(0, n_frames + 1):
        for word_ids in itertools.product(range(n_words), repeat=k):
            spelling_sets = [lexicon.spellings[w] for w in word_ids]
            if sum(min(len(s) for s in ss) for ss in spelling_sets) > n_frames:
                continue
            for choice in itertools.product(*[range(len(ss)) for ss in spelling_sets]):
                word_slots = []
                for wid, sid in zip(word_ids, choice):
                    sp = lexicon.spellings[wid][sid]
                    for j, tok in enumerate(sp):
                        word_slots.append((tok, wid if j == len(sp) - 1 else None))
                if len(word_slots) > n_frames:
                    continue
                for sil_pattern in itertools.product((0, 1), repeat=k + 1):
                    slots = []
                    pos = 0
                    if sil_pattern[0]:
                        slots.append((sil, None))
                    for wid, sid, gap in zip(word_ids, choice, sil_pattern[1:]):
                        n_tokens = len(lexicon.spellings[wid][sid])
                        slots.extend(word_slots[pos : pos + n_tokens])
                        pos += n_tokens
                        if gap:
                            slots.append((sil, None))
                    if 0 < len(slots) <= n_frames:
                        walk(slots, tuple(word_ids))
    return best[1], best[0]


def random_decoder_instance(rng):
    """Small random emissions/tokens/lexicon/LM for equivalence trials."""
    n_real = int(rng.integers(1, 4))  # 1..3 non-silence tokens, + "|"
    tokens = TokenSet(tuple("abc"[:n_real]) + ("|",))
    n_words = int(rng.integers(1, 4))
    entries = []
    for w in range(n_words):
        for _ in range(int(rng.integers(1, 3))):
            length = int(rng.integers(1, 4))
            spelling = [tokens.tokens[rng.integers(0, n_real)] for _ in range(length)]
            entries.append((f"w{w}", spelling))
    lexicon = build_lexicon(entries, tokens)

    words = [f"w{w}" for w in range(n_words)]
    probs = {("<s>",): -99.0, ("</s>",): float(rng.uniform(-2, -0.1))}
    backoffs = {}
    dropped = words[0] if rng.random() < 0.25 and n_words > 1 else None
    for w in words:
        if w != dropped:
            probs[(w,)] = float(rng.uniform(-2, -0.1))
    if rng.random() < 0.5:
        probs[("<unk>",)] = float(rng.uniform(-3, -1))
    for h in words + ["<s>"]:
        if rng.random() < 0.7:
            backoffs[(h,)] = float(rng.uniform(-1, 0.5))
        for w in words + ["</s>"]:
            if rng.random() < 0.4:
                probs[(h, w)] = float(rng.uniform(-2, -0.1))
    lm = NGramLM(order=2, probs=probs, backoffs=backoffs)

    n_frames = int(rng.integers(1, 6))
    emissions = rng.uniform(-3.0, 0.0, (n_frames, len(tokens)))
    return emissions, tokens, lexicon, lm


# ------------------------------------------------------- ARPA corpus build


def build_backoff_bigram_arpa(sentences, discount=0.5):
    """Bigram ARPA text from a tiny corpus via absolute discounting.

    Probability mass removed from seen bigrams is spread over unseen words
    through the backoff weight, so every history sums to exactly 1 over the
    vocabulary plus the end symbol.
    """
    uni = {}
    bi = {}
    for sentence in sentences:
        tokens = sentence.split() + ["</s>"]
        prev = "<s>"
        for tok in tokens:
            uni[tok] = uni.get(tok, 0) + 1
            bi[(prev, tok)] = bi.get((prev, tok), 0) + 1
            prev = tok
    total = sum(uni.values())
    p_uni = {w: c / total for w, c in uni.items()}

    hist_count = {}
    for (h, _), c in bi.items():
        hist_count[h] = hist_count.get(h, 0) + c

    lines = ["\\data\\", f"ngram 1={len(uni) + 1}", f"ngram 2={len(bi)}", "",
             "\\1-grams:"]
    backoff = {}
    for h, ch in hist_count.items():
        seen = [(w, c) for (hh, w), c in bi.items() if hh == h]
        removed = discount * len(seen) / ch
        seen_uni = sum(p_uni[w] for w, _ in seen)
        backoff[h] = math.log10(removed / (1.0 - seen_uni))
    lines.append(f"-99\t<s>\t{backoff['<s>']:.12f}")
    for w in sorted(uni):
        logp = math.log10(p_uni[w])
        if w in backoff:
            lines.append(f"{logp:.12f}\t{w}\t{backoff[w]:.12f}")
        else:
            lines.append(f"{logp:.12f}\t{w}")
    lines += ["", "\\2-grams:"]
    for (h, w), c in sorted(bi.items()):
        logp = math.log10((c - discount) / hist_count[h])
        lines.append(f"{logp:.12f}\t{h} {w}")
    lines += ["", "\\end\\", ""]
    return "\n".join(lines)

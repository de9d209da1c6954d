"""Grapheme decoding and word-error-rate scoring.

Emissions are per-frame log scores over a token set (no blank symbol):
repeated tokens collapse and the silence token separates words.  The beam
search is lexicon-constrained and scores hypotheses as

    sum_t emission(t, tok_t)
    + lm_weight * log10 P_LM(words)
    + word_score * |words|
    + sil_weight * (#silence frames)

where P_LM is the full-sentence probability of the word sequence under the
n-gram model, conditioned on the sentence-begin symbol and closed with the
sentence-end symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

UNSEEN_LOG10 = -99.0  # used when a word is unknown and the LM has no <unk>

_SIL_STATE = (-1, -1, -1)


@dataclass(frozen=True)
class TokenSet:
    """Ordered emission tokens, exactly one of which is the silence token."""

    tokens: tuple[str, ...]
    silence: str = "|"

    def __post_init__(self):
        tokens = tuple(self.tokens)
        if len(set(tokens)) != len(tokens):
            raise ValueError("tokens must be unique")
        if self.silence not in tokens:
            raise ValueError(f"silence token {self.silence!r} missing from token set")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise ValueError(f"unknown token {token!r}") from None

    @property
    def silence_index(self) -> int:
        return self._index[self.silence]


def load_tokens(path, silence: str = "|") -> TokenSet:
    """Token set from a file with one token per line."""
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    return TokenSet(tuple(ln for ln in lines if ln), silence)


@dataclass(frozen=True)
class Lexicon:
    """Words with one or more token spellings; word id = file order."""

    words: tuple[str, ...]
    spellings: tuple[tuple[tuple[int, ...], ...], ...]

    def __len__(self) -> int:
        return len(self.words)


def build_lexicon(entries, tokens: TokenSet) -> Lexicon:
    """Build from (word, [token, ...]) pairs; repeated words add spellings."""
    words: list[str] = []
    spellings: dict[str, list[tuple[int, ...]]] = {}
    for word, spelling in entries:
        if not spelling:
            raise ValueError(f"word {word!r} has an empty spelling")
        ids = []
        for tok in spelling:
            idx = tokens.index(tok)
            if idx == tokens.silence_index:
                raise ValueError(f"word {word!r}: silence token not allowed in spellings")
            ids.append(idx)
        if word not in spellings:
            words.append(word)
            spellings[word] = []
        spellings[word].append(tuple(ids))
    return Lexicon(tuple(words), tuple(tuple(spellings[w]) for w in words))


def load_lexicon(path, tokens: TokenSet) -> Lexicon:
    """Lexicon file: one entry per line, ``word tok tok tok...``."""
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 2:
            raise ValueError(f"{path}:{lineno}: entry needs a word and a spelling")
        entries.append((parts[0], parts[1:]))
    return build_lexicon(entries, tokens)


@dataclass(frozen=True)
class NGramLM:
    """Backoff n-gram model over words, log10 probabilities."""

    order: int
    probs: dict[tuple[str, ...], float]
    backoffs: dict[tuple[str, ...], float]
    bos: str = "<s>"
    eos: str = "</s>"
    unk: str = "<unk>"

    def vocabulary(self) -> tuple[str, ...]:
        return tuple(ng[0] for ng in self.probs if len(ng) == 1)

    def has_word(self, word: str) -> bool:
        return (word,) in self.probs


def load_arpa(path) -> NGramLM:
    """Parse an ARPA file; raises ``ValueError`` with line numbers."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    counts: dict[int, int] = {}
    probs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}

    it = enumerate(lines, 1)
    for lineno, line in it:
        if line.strip() == "\\data\\":
            break
    else:
        raise ValueError(f"{path}: missing \\data\\ section")
    current_order = None
    for lineno, line in it:
        line = line.strip()
        if not line:
            continue
        if line.startswith("ngram "):
            try:
                order_s, count_s = line[len("ngram "):].split("=")
                counts[int(order_s)] = int(count_s)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed count line {line!r}") from None
        elif line.endswith("-grams:") and line.startswith("\\"):
            current_order = int(line[1:].split("-")[0])
            break
        else:
            raise ValueError(f"{path}:{lineno}: unexpected line in \\data\\: {line!r}")
    if current_order is None:
        raise ValueError(f"{path}: no n-gram sections found")

    section_seen: dict[int, int] = {}
    for lineno, line in it:
        line = line.strip()
        if not line:
            continue
        if line == "\\end\\":
            current_order = None
            break
        if line.endswith("-grams:") and line.startswith("\\"):
            current_order = int(line[1:].split("-")[0])
            continue
        fields = line.split()
        n = current_order
        if len(fields) not in (n + 1, n + 2):
            raise ValueError(
                f"{path}:{lineno}: expected {n + 1} or {n + 2} fields for a "
                f"{n}-gram, got {len(fields)}"
            )
        try:
            logp = float(fields[0])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad log probability {fields[0]!r}") from None
        if logp > 1e-6:
            raise ValueError(f"{path}:{lineno}: positive log10 probability {logp}")
        ngram = tuple(fields[1 : n + 1])
        probs[ngram] = logp
        if len(fields) == n + 2:
            backoffs[ngram] = float(fields[n + 1])
        section_seen[n] = section_seen.get(n, 0) + 1
    if current_order is not None:
        raise ValueError(f"{path}: missing \\end\\ marker")
    for order, declared in counts.items():
        if section_seen.get(order, 0) != declared:
            raise ValueError(
                f"{path}: \\data\\ declares {declared} {order}-grams, "
                f"found {section_seen.get(order, 0)}"
            )
    if not counts:
        raise ValueError(f"{path}: empty \\data\\ section")
    return NGramLM(order=max(counts), probs=probs, backoffs=backoffs)


def lm_score(lm: NGramLM, history, word: str) -> float:
    """log10 P(word | history) with standard backoff.

    Unknown words (in the query or the history) map to the unknown symbol
    when the model has one, else contribute ``UNSEEN_LOG10``.  Histories are
    truncated to the model order; backoff weights default to 0 when absent.
    """

    def known(w: str) -> str:
        return w if lm.has_word(w) else lm.unk

    w = known(word)
    if not lm.has_word(w):
        return UNSEEN_LOG10
    hist = tuple(known(h) for h in history)
    hist = hist[-(lm.order - 1):] if lm.order > 1 else ()
    total = 0.0
    while hist + (w,) not in lm.probs:
        total += lm.backoffs.get(hist, 0.0)
        hist = hist[1:]
    return total + lm.probs[hist + (w,)]


@dataclass(frozen=True)
class DecoderOptions:
    lm_weight: float = 2.5
    word_score: float = 1.0
    beam_size: int = 2500
    beam_threshold: float = 25.0
    sil_weight: float = -0.4

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if not (self.beam_threshold > 0):
            raise ValueError("beam_threshold must be positive")


def _validate_emissions(emissions, tokens: TokenSet) -> np.ndarray:
    e = np.asarray(emissions, dtype=np.float64)
    if e.ndim != 2:
        raise ValueError(f"emissions must be 2-D, got shape {e.shape}")
    if e.shape[1] != len(tokens):
        raise ValueError(
            f"emissions have {e.shape[1]} columns for {len(tokens)} tokens"
        )
    if not np.all(np.isfinite(e)):
        raise ValueError("emissions contain non-finite values")
    return e


def greedy_decode(emissions, tokens: TokenSet) -> str:
    """Best-path decode: frame argmax, collapse repeats, silence = space.

    Ties within a frame resolve to the lower token index.
    """
    e = _validate_emissions(emissions, tokens)
    if e.shape[0] == 0:
        return ""
    ids = np.argmax(e, axis=1)
    collapsed = [int(ids[0])]
    for i in ids[1:]:
        if int(i) != collapsed[-1]:
            collapsed.append(int(i))
    sil = tokens.silence_index
    words: list[str] = []
    current: list[str] = []
    for idx in collapsed:
        if idx == sil:
            if current:
                words.append("".join(current))
                current = []
        else:
            current.append(tokens.tokens[idx])
    if current:
        words.append("".join(current))
    return " ".join(words)


def _dyadic_capacities(beam_size: int) -> list[int]:
    """Powers of two up to ``beam_size``: 1, 2, 4, ... (at least [1])."""
    caps = [1]
    while caps[-1] * 2 <= beam_size:
        caps.append(caps[-1] * 2)
    return caps


def beam_decode(emissions, tokens: TokenSet, lexicon: Lexicon, lm: NGramLM,
                opts: DecoderOptions = DecoderOptions()):
    """Lexicon-constrained beam search; returns ``(words, score)``.

    Hypotheses advance one frame at a time through word spellings, holding a
    spelling position across repeated frames; words may be separated by
    silence or directly abut.  After each frame, hypotheses sharing a state
    (spelling position and truncated LM history) are merged keeping the
    best, then pruned to the beam capacity and to within ``beam_threshold``
    of the frame-best score.  Ties order lexicographically by word-id
    sequence.

    A single pruned pass is not monotone in its capacity: a wider beam can
    generate extra mid-word hypotheses that crowd out the very lane a
    narrow beam followed to the optimum.  To keep "more beam never hurts"
    true, the search runs one pass per power-of-two capacity up to
    ``beam_size`` and returns the best-scoring result.  The capacity sets
    for two budgets are nested, so the returned score is nondecreasing in
    ``beam_size`` by construction, at under twice the cost of the single
    widest pass.
    """
    e = _validate_emissions(emissions, tokens)
    if len(lexicon) == 0:
        raise ValueError("empty lexicon")
    sil = tokens.silence_index
    hist_len = max(lm.order - 1, 0)

    starts = []
    spell = {}
    for wid, word_spellings in enumerate(lexicon.spellings):
        for sid, sp in enumerate(word_spellings):
            starts.append((wid, sid, sp))
            spell[(wid, sid)] = sp

    def truncate(hist: tuple[str, ...]) -> tuple[str, ...]:
        return hist[-hist_len:] if hist_len else ()

    def push(pool, key, score, words):
        prev = pool.get(key)
        if prev is None or score > prev[0] or (score == prev[0] and words < prev[1]):
            pool[key] = (score, words)

    def run(capacity):
        hyps = {(_SIL_STATE, truncate((lm.bos,))): (0.0, ())}
        for t in range(e.shape[0]):
            new = {}
            row = e[t]
            for (pos, hist), (score, words) in hyps.items():
                if pos == _SIL_STATE:
                    push(new, (_SIL_STATE, hist), score + row[sil] + opts.sil_weight, words)
                    for wid, sid, sp in starts:
                        push(new, ((wid, sid, 0), hist), score + row[sp[0]], words)
                else:
                    wid, sid, p = pos
                    sp = spell[(wid, sid)]
                    push(new, (pos, hist), score + row[sp[p]], words)
                    if p + 1 < len(sp):
                        push(new, ((wid, sid, p + 1), hist), score + row[sp[p + 1]], words)
                    else:
                        word = lexicon.words[wid]
                        done = (
                            score
                            + opts.lm_weight * lm_score(lm, hist, word)
                            + opts.word_score
                        )
                        done_hist = truncate(hist + (word,))
                        done_words = words + (wid,)
                        push(
                            new,
                            (_SIL_STATE, done_hist),
                            done + row[sil] + opts.sil_weight,
                            done_words,
                        )
                        for wid2, sid2, sp2 in starts:
                            push(
                                new,
                                ((wid2, sid2, 0), done_hist),
                                done + row[sp2[0]],
                                done_words,
                            )
            items = sorted(new.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0]))
            cutoff = items[0][1][0] - opts.beam_threshold
            hyps = dict(
                item for item in items[:capacity] if item[1][0] >= cutoff
            )

        best = None
        for (pos, hist), (score, words) in hyps.items():
            if pos == _SIL_STATE:
                final = score + opts.lm_weight * lm_score(lm, hist, lm.eos)
                final_words = words
            else:
                wid, sid, p = pos
                sp = spell[(wid, sid)]
                if p != len(sp) - 1:
                    continue  # incomplete spelling cannot end an utterance
                word = lexicon.words[wid]
                final = (
                    score
                    + opts.lm_weight * lm_score(lm, hist, word)
                    + opts.word_score
                    + opts.lm_weight * lm_score(lm, truncate(hist + (word,)), lm.eos)
                )
                final_words = words + (wid,)
            if best is None or final > best[0] or (final == best[0] and final_words < best[1]):
                best = (final, final_words)
        return best

    best = None
    for capacity in _dyadic_capacities(opts.beam_size):
        got = run(capacity)
        if got is None:
            continue
        if best is None or got[0] > best[0] or (got[0] == best[0] and got[1] < best[1]):
            best = got
    if best is None:
        raise RuntimeError("no complete hypothesis survived the beam")
    return [lexicon.words[i] for i in best[1]], best[0]


@dataclass(frozen=True)
class WerReport:
    substitutions: int
    insertions: int
    deletions: int
    hits: int
    reference_words: int
    alignment: tuple[tuple[str, str | None, str | None], ...]

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer_pct(self) -> float:
        if self.reference_words == 0:
            return 0.0
        return 100.0 * self.errors / self.reference_words


def wer(reference, hypothesis) -> WerReport:
    """Word error rate from a unit-cost Levenshtein alignment.

    Ties during backtrace prefer substitutions over insert+delete pairs.
    An empty reference with a nonempty hypothesis has no defined rate and
    raises ``ValueError``; two empty sequences score zero errors.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    if not ref and hyp:
        raise ValueError("WER undefined: empty reference with nonempty hypothesis")
    m, n = len(ref), len(hyp)
    dp = np.zeros((m + 1, n + 1), dtype=np.int64)
    dp[:, 0] = np.arange(m + 1)
    dp[0, :] = np.arange(n + 1)
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            sub = dp[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            dp[i, j] = min(sub, dp[i - 1, j] + 1, dp[i, j - 1] + 1)

    ops: list[tuple[str, str | None, str | None]] = []
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i, j] == dp[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            op = "match" if ref[i - 1] == hyp[j - 1] else "sub"
            ops.append((op, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dp[i, j] == dp[i - 1, j] + 1:
            ops.append(("del", ref[i - 1], None))
            i -= 1
        else:
            ops.append(("ins", None, hyp[j - 1]))
            j -= 1
    ops.reverse()
    subs = sum(1 for op, _, _ in ops if op == "sub")
    ins = sum(1 for op, _, _ in ops if op == "ins")
    dels = sum(1 for op, _, _ in ops if op == "del")
    hits = sum(1 for op, _, _ in ops if op == "match")
    return WerReport(
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        hits=hits,
        reference_words=m,
        alignment=tuple(ops),
    )


def cer(reference_words, hypothesis_words) -> WerReport:
    """Character error rate: the WER alignment over characters.

    Words are joined with single spaces first, so word boundaries count as
    ordinary characters.  The empty-reference rule matches ``wer``.
    """
    return wer(list(" ".join(reference_words)), list(" ".join(hypothesis_words)))


_PUNCTUATION = set(".,;:!?\"'()[]{}¿¡«»…-–—")


def normalize_transcript(text: str, lowercase: bool = True, strip_punct: bool = True) -> list[str]:
    """Default scorer normalization: lowercase, drop punctuation, split."""
    if lowercase:
        text = text.lower()
    if strip_punct:
        text = "".join(c for c in text if c not in _PUNCTUATION)
    return text.split()

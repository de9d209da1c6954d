"""Token sets, lexicons, ARPA models, decoding, and WER scoring."""

import math

import numpy as np
import pytest

from voxfeat.decoder import (
    UNSEEN_LOG10,
    DecoderOptions,
    NGramLM,
    TokenSet,
    beam_decode,
    build_lexicon,
    cer,
    greedy_decode,
    lm_score,
    load_arpa,
    load_lexicon,
    load_tokens,
    normalize_transcript,
    wer,
)

from conftest import (
    brute_force_decode,
    build_backoff_bigram_arpa,
    levenshtein_distance,
    random_decoder_instance,
)

CORPUS = [
    "the cat sat",
    "the cat ran",
    "a dog sat",
    "the dog ran fast",
    "a cat ran",
]


def one_hot_emissions(tokens, path, margin=10.0):
    em = np.full((len(path), len(tokens)), -margin)
    for t, tok in enumerate(path):
        em[t, tokens.index(tok)] = 0.0
    return em


class TestTokenSet:
    def test_basic(self):
        ts = TokenSet(("a", "b", "|"))
        assert len(ts) == 3
        assert ts.index("b") == 1
        assert ts.silence_index == 2

    def test_validation(self):
        with pytest.raises(ValueError, match="unique"):
            TokenSet(("a", "a", "|"))
        with pytest.raises(ValueError, match="silence"):
            TokenSet(("a", "b"))
        with pytest.raises(ValueError, match="unknown token"):
            TokenSet(("a", "|")).index("z")

    def test_load_tokens(self, tmp_path):
        path = tmp_path / "tokens.txt"
        path.write_text("a\nb\nc\n|\n\n")
        ts = load_tokens(path)
        assert ts.tokens == ("a", "b", "c", "|")


class TestLexicon:
    def test_build_and_multiple_spellings(self):
        ts = TokenSet(("c", "a", "t", "|"))
        lex = build_lexicon([("cat", ["c", "a", "t"]), ("cat", ["c", "a"]),
                             ("at", ["a", "t"])], ts)
        assert lex.words == ("cat", "at")
        assert len(lex.spellings[0]) == 2
        assert lex.spellings[1] == ((1, 2),)

    def test_rejects_silence_and_empty(self):
        ts = TokenSet(("c", "a", "|"))
        with pytest.raises(ValueError, match="silence"):
            build_lexicon([("ca", ["c", "|", "a"])], ts)
        with pytest.raises(ValueError, match="empty"):
            build_lexicon([("x", [])], ts)

    def test_load_lexicon(self, tmp_path):
        ts = TokenSet(("h", "i", "|"))
        path = tmp_path / "lex.txt"
        path.write_text("hi\th i\nhi\ti\n\n")
        lex = load_lexicon(path, ts)
        assert lex.words == ("hi",)
        assert lex.spellings[0] == ((0, 1), (1,))
        bad = tmp_path / "bad.txt"
        bad.write_text("loneword\n")
        with pytest.raises(ValueError, match="bad.txt:1"):
            load_lexicon(bad, ts)


MINI_ARPA = """\
\\data\\
ngram 1=4
ngram 2=3
ngram 3=1

\\1-grams:
-0.8\t<s>\t-0.30103
-0.5\ta\t-0.2
-0.7\tb\t-0.1
-0.6\t</s>

\\2-grams:
-0.4\ta b\t-0.30103
-0.3\t<s> a\t0.0
-0.9\tb </s>

\\3-grams:
-0.2\t<s> a b

\\end\\
"""


class TestArpa:
    def test_load_minimal_unigram(self, tmp_path):
        path = tmp_path / "uni.arpa"
        path.write_text("\\data\\\nngram 1=3\n\n\\1-grams:\n"
                        "-0.3\tx\n-0.4\ty\n-0.9\t</s>\n\n\\end\\\n")
        lm = load_arpa(path)
        assert lm.order == 1
        assert lm.probs[("x",)] == -0.3
        assert lm.backoffs == {}

    def test_load_trigram(self, tmp_path):
        path = tmp_path / "tri.arpa"
        path.write_text(MINI_ARPA)
        lm = load_arpa(path)
        assert lm.order == 3
        assert lm.probs[("a", "b")] == -0.4
        assert lm.backoffs[("a", "b")] == -0.30103
        assert ("b", "</s>") in lm.probs and ("b", "</s>") not in lm.backoffs

    @pytest.mark.parametrize(
        "mangle, match",
        [
            (lambda t: t.replace("\\data\\", ""), "data"),
            (lambda t: t.replace("ngram 2=3", "ngram 2=7"), "declares 7"),
            (lambda t: t.replace("\\end\\", ""), "end"),
            (lambda t: t.replace("-0.4\ta b", "0.4\ta b"), "positive"),
            (lambda t: t.replace("-0.3\t<s> a\t0.0", "-0.3\t<s>"), "fields"),
        ],
    )
    def test_malformed_files(self, tmp_path, mangle, match):
        path = tmp_path / "bad.arpa"
        path.write_text(mangle(MINI_ARPA))
        with pytest.raises(ValueError, match=match):
            load_arpa(path)

    def test_backoff_queries_exact(self, tmp_path):
        path = tmp_path / "tri.arpa"
        path.write_text(MINI_ARPA)
        lm = load_arpa(path)
        # direct hits at every order
        assert lm_score(lm, ("<s>", "a"), "b") == -0.2
        assert lm_score(lm, ("a",), "b") == -0.4
        assert lm_score(lm, (), "a") == -0.5
        # single backoff: P(</s> | a b) = b(a b) + P(</s> | b)
        want = lm.backoffs[("a", "b")] + lm.probs[("b", "</s>")]
        assert lm_score(lm, ("a", "b"), "</s>") == want
        # chained backoff: P(a | a b) = b(a b) + b(b) + P(a)
        want = lm.backoffs[("a", "b")] + lm.backoffs[("b",)] + lm.probs[("a",)]
        assert lm_score(lm, ("a", "b"), "a") == want
        # missing backoff weight defaults to zero: P(a | b a): b(b a)=0
        want = lm.probs[("a",)] + lm.backoffs[("a",)]
        assert lm_score(lm, ("b", "a"), "a") == want
        # history longer than order-1 is truncated
        assert lm_score(lm, ("b", "<s>", "a"), "b") == -0.2

    def test_unknown_words(self, tmp_path):
        path = tmp_path / "tri.arpa"
        path.write_text(MINI_ARPA)
        lm = load_arpa(path)
        assert lm_score(lm, (), "zzz") == UNSEEN_LOG10
        # unknown history falls back to shorter contexts
        assert lm_score(lm, ("zzz",), "a") == lm.probs[("a",)]
        with_unk = NGramLM(order=1, probs={("x",): -0.5, ("<unk>",): -2.0},
                           backoffs={})
        assert lm_score(with_unk, (), "zzz") == -2.0


@pytest.fixture(scope="module")
def corpus_lm(tmp_path_factory):
    path = tmp_path_factory.mktemp("lm") / "corpus.arpa"
    path.write_text(build_backoff_bigram_arpa(CORPUS))
    return load_arpa(path)


class TestGeneratedCorpusLm:
    """Bigram LM built from a 5-sentence corpus by absolute discounting."""

    def test_every_history_sums_to_one(self, corpus_lm):
        vocab = [w for w in corpus_lm.vocabulary() if w not in ("<s>",)]
        events = [w for w in vocab if w != "</s>"] + ["</s>"]
        for hist in [(), ("<s>",), ("the",), ("cat",), ("sat",), ("ran",),
                     ("a",), ("dog",), ("fast",)]:
            total = sum(10.0 ** lm_score(corpus_lm, hist, w) for w in events)
            assert total == pytest.approx(1.0, abs=1e-3), hist

    def test_seen_bigram_matches_hand_count(self, corpus_lm):
        # c(the cat)=2, c(the)=3, discount 0.5: P = 1.5/3
        assert 10 ** corpus_lm.probs[("the", "cat")] == pytest.approx(1.5 / 3, rel=1e-9)
        # c(<s> the)=3, c(<s>)=5 -> 2.5/5
        assert 10 ** corpus_lm.probs[("<s>", "the")] == pytest.approx(0.5, rel=1e-9)

    def test_unseen_bigram_is_exact_backoff_product(self, corpus_lm):
        for h, w in [("the", "fast"), ("cat", "dog"), ("fast", "the")]:
            assert lm_score(corpus_lm, (h,), w) == corpus_lm.backoffs[(h,)] + corpus_lm.probs[(w,)]


class TestGreedy:
    def test_one_hot_word(self):
        ts = TokenSet(("c", "a", "t", "|"))
        em = one_hot_emissions(ts, ["c", "a", "t", "|", "c", "a", "t"])
        assert greedy_decode(em, ts) == "cat cat"

    def test_repeats_collapse(self):
        ts = TokenSet(("a", "b", "|"))
        em = one_hot_emissions(ts, ["a", "a", "b"])
        assert greedy_decode(em, ts) == "ab"

    def test_frame_tie_prefers_lower_index(self):
        ts = TokenSet(("a", "b", "|"))
        em = np.zeros((1, 3))
        assert greedy_decode(em, ts) == "a"

    def test_silence_runs_make_single_boundaries(self):
        ts = TokenSet(("a", "|"))
        em = one_hot_emissions(ts, ["|", "|", "a", "|", "|", "a", "|"])
        assert greedy_decode(em, ts) == "a a"

    def test_empty_and_shape_checks(self):
        ts = TokenSet(("a", "|"))
        assert greedy_decode(np.zeros((0, 2)), ts) == ""
        with pytest.raises(ValueError, match="columns"):
            greedy_decode(np.zeros((3, 5)), ts)
        with pytest.raises(ValueError, match="finite"):
            greedy_decode(np.array([[np.nan, 0.0]]), ts)

    def test_length_stability(self):
        rng = np.random.default_rng(20)
        ts = TokenSet(("a", "b", "c", "|"))
        for _ in range(100):
            em = rng.standard_normal((int(rng.integers(1, 30)), 4))
            out = greedy_decode(em, ts)
            assert len(out.replace(" ", "")) <= em.shape[0]


def make_hi_setup():
    ts = TokenSet(("h", "i", "|"))
    lex = build_lexicon([("hi", ["h", "i"])], ts)
    lm = NGramLM(order=1, probs={("hi",): -0.5, ("</s>",): -0.2, ("<s>",): -99.0},
                 backoffs={})
    return ts, lex, lm


class TestBeam:
    def test_hand_computed_four_frame_score(self):
        """One word, one spelling: the score is a sum you can do on paper."""
        ts, lex, lm = make_hi_setup()
        em = one_hot_emissions(ts, ["h", "h", "i", "|"], margin=5.0)
        opts = DecoderOptions(lm_weight=2.0, word_score=0.5, beam_size=64,
                              beam_threshold=1e9, sil_weight=-0.1)
        words, score = beam_decode(em, ts, lex, lm, opts)
        assert words == ["hi"]
        want = em[0, 0] + em[1, 0] + em[2, 1]        # h h i
        want = want + 2.0 * -0.5                     # LM weight * log10 P(hi)
        want = want + 0.5                            # word score
        want = want + em[3, 2] + -0.1                # trailing silence frame
        want = want + 2.0 * -0.2                     # sentence end
        assert score == want

    def test_word_final_utterance_needs_complete_spelling(self):
        ts, lex, lm = make_hi_setup()
        em = one_hot_emissions(ts, ["h", "i"], margin=5.0)
        words, _ = beam_decode(em, ts, lex, lm)
        assert words == ["hi"]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(21)
        opts_pool = [
            DecoderOptions(lm_weight=2.5, word_score=1.0, beam_size=10 ** 6,
                           beam_threshold=math.inf, sil_weight=-0.4),
            DecoderOptions(lm_weight=0.7, word_score=-0.3, beam_size=10 ** 6,
                           beam_threshold=math.inf, sil_weight=0.2),
            DecoderOptions(lm_weight=0.0, word_score=0.0, beam_size=10 ** 6,
                           beam_threshold=math.inf, sil_weight=0.0),
        ]
        for trial in range(40):
            em, ts, lex, lm = random_decoder_instance(rng)
            opts = opts_pool[trial % len(opts_pool)]
            want_ids, want_score = brute_force_decode(em, ts, lex, lm, opts)
            got_words, got_score = beam_decode(em, ts, lex, lm, opts)
            got_ids = tuple(lex.words.index(w) for w in got_words)
            assert got_score == want_score
            assert got_ids == want_ids

    def test_score_monotone_in_beam_size(self):
        rng = np.random.default_rng(22)
        for _ in range(20):
            em, ts, lex, lm = random_decoder_instance(rng)
            prev = -math.inf
            for size in (1, 2, 4, 16, 256):
                opts = DecoderOptions(beam_size=size, beam_threshold=math.inf)
                try:
                    _, score = beam_decode(em, ts, lex, lm, opts)
                except RuntimeError:
                    score = -math.inf  # tiny beams may strand mid-word
                assert score >= prev
                prev = score

    def test_zero_weights_reduce_to_greedy_when_path_is_legal(self):
        ts = TokenSet(("c", "a", "t", "|"))
        lex = build_lexicon([("cat", ["c", "a", "t"]), ("at", ["a", "t"])], ts)
        lm = NGramLM(order=1, probs={("cat",): -0.4, ("at",): -0.6,
                                     ("</s>",): -0.3, ("<s>",): -99.0}, backoffs={})
        opts = DecoderOptions(lm_weight=0.0, word_score=0.0, sil_weight=0.0,
                              beam_size=10 ** 5, beam_threshold=math.inf)
        rng = np.random.default_rng(23)
        for _ in range(20):
            words = [("cat", "at")[rng.integers(0, 2)]
                     for _ in range(rng.integers(1, 4))]
            path = []
            for w in words:
                path.extend(list(w))
                path.append("|")
            em = one_hot_emissions(ts, path, margin=8.0)
            assert greedy_decode(em, ts) == " ".join(words)
            got, _ = beam_decode(em, ts, lex, lm, opts)
            assert got == words

    def test_deterministic(self):
        rng = np.random.default_rng(24)
        em, ts, lex, lm = random_decoder_instance(rng)
        a = beam_decode(em, ts, lex, lm)
        b = beam_decode(em, ts, lex, lm)
        assert a == b

    def test_empty_lexicon_rejected(self):
        ts = TokenSet(("a", "|"))
        lm = NGramLM(order=1, probs={("</s>",): -0.1}, backoffs={})
        from voxfeat.decoder import Lexicon
        with pytest.raises(ValueError, match="empty lexicon"):
            beam_decode(np.zeros((2, 2)), ts, Lexicon((), ()), lm)


class TestWer:
    def test_identity(self):
        rep = wer("a b c".split(), "a b c".split())
        assert rep.errors == 0
        assert rep.wer_pct == 0.0

    def test_single_substitution(self):
        rep = wer("a b c".split(), "a x c".split())
        assert (rep.substitutions, rep.insertions, rep.deletions) == (1, 0, 0)
        assert rep.wer_pct == pytest.approx(33.333333, abs=1e-4)

    def test_single_deletion(self):
        rep = wer("a b".split(), ["b"])
        assert (rep.substitutions, rep.insertions, rep.deletions) == (0, 0, 1)
        assert rep.wer_pct == 50.0

    def test_substitution_preferred_over_insert_delete(self):
        rep = wer(["a"], ["b"])
        assert rep.alignment == (("sub", "a", "b"),)

    def test_empty_cases(self):
        assert wer([], []).errors == 0
        assert wer([], []).wer_pct == 0.0
        with pytest.raises(ValueError, match="empty reference"):
            wer([], ["x"])

    def test_wer_above_100_percent(self):
        rep = wer(["a"], "x y z".split())
        assert rep.errors == 3
        assert rep.wer_pct == 300.0

    def test_matches_independent_levenshtein(self):
        rng = np.random.default_rng(25)
        alphabet = ["alpha", "beta", "gamma"]
        for _ in range(150):
            ref = [alphabet[i] for i in rng.integers(0, 3, rng.integers(1, 12))]
            hyp = [alphabet[i] for i in rng.integers(0, 3, rng.integers(0, 12))]
            rep = wer(ref, hyp)
            assert rep.errors == levenshtein_distance(ref, hyp)
            # alignment bookkeeping stays consistent with the edit counts
            assert rep.hits + rep.substitutions + rep.deletions == len(ref)
            assert rep.hits + rep.substitutions + rep.insertions == len(hyp)


def test_cer_counts_characters():
    rep = cer(["cat"], ["cap"])
    assert rep.errors == 1
    assert rep.reference_words == 3
    spaced = cer(["a", "b"], ["a", "b"])
    assert spaced.errors == 0
    assert spaced.reference_words == 3  # "a b"


def test_normalize_transcript():
    assert normalize_transcript("Hello, World!") == ["hello", "world"]
    assert normalize_transcript("Hello, World!", lowercase=False) == ["Hello", "World"]
    assert normalize_transcript("don't stop") == ["dont", "stop"]
    assert normalize_transcript("a  b\tc") == ["a", "b", "c"]
    assert normalize_transcript("Hi!", strip_punct=False) == ["hi!"]

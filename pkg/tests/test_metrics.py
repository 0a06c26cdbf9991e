import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltseq.errors import AlignmentError, ConfigError, DataError
from ltseq.metrics import (
    BleuStats,
    corpus_bleu,
    length_bucket_report,
    perplexity,
    sentence_bleu_smoothed,
)

HYP = "the cat sat on the mat".split()
REF = "the cat is on the mat".split()

# hand n-gram counts for HYP vs REF:
#   p1 = 5/6, p2 = 3/5, p3 = 1/4, p4 = 0/3
CAT_PRECISIONS = (5 / 6, 3 / 5, 1 / 4, 0 / 3)


class TestCorpusBleu:
    def test_identical_corpus_is_100(self):
        sents = [["a", "b", "c", "d", "e"], ["x", "y", "z", "w", "v", "u"]]
        assert corpus_bleu(sents, sents) == pytest.approx(100.0)

    def test_disjoint_unigrams_zero(self):
        assert corpus_bleu([["a", "b", "c", "d"]], [["x", "y", "z", "w"]]) == 0.0

    def test_cat_pair_zero_unsmoothed(self):
        # p4 numerator is 0, so the unsmoothed score collapses to 0
        assert corpus_bleu([HYP], [REF]) == 0.0

    def test_cat_pair_counts(self):
        stats = BleuStats()
        stats.add_pair(HYP, REF)
        assert stats.matches == [5, 3, 1, 0]
        assert stats.totals == [6, 5, 4, 3]

    def test_hand_score_with_padding_sentence(self):
        # second pair contributes perfect counts so no precision is zero;
        # expected value computed from summed clipped counts by hand
        extra = ["a", "b", "c", "d", "e"]
        stats = BleuStats()
        stats.add_pair(HYP, REF)
        stats.add_pair(extra, extra)
        precisions = [(5 + 5) / (6 + 5), (3 + 4) / (5 + 4),
                      (1 + 3) / (4 + 3), (0 + 2) / (3 + 2)]
        expected = 100.0 * math.exp(sum(math.log(p) for p in precisions) / 4)
        assert corpus_bleu([HYP, extra], [REF, extra]) == pytest.approx(
            expected, abs=1e-9)

    def test_brevity_penalty(self):
        hyp = [["a", "b", "c"]]
        ref = [["a", "b", "c", "d", "e", "f"]]
        stats = BleuStats()
        stats.add_pair(hyp[0], ref[0])
        assert stats.brevity_penalty() == pytest.approx(math.exp(1 - 6 / 3))

    def test_permutation_invariance(self):
        hyps = [HYP, ["a", "b", "c", "d", "e"], ["u", "v", "w", "x"]]
        refs = [REF, ["a", "b", "c", "d", "f"], ["u", "v", "x", "w"]]
        order = [2, 0, 1]
        assert corpus_bleu(hyps, refs) == pytest.approx(
            corpus_bleu([hyps[i] for i in order], [refs[i] for i in order]))

    def test_alignment_error(self):
        with pytest.raises(AlignmentError):
            corpus_bleu([HYP], [])
        with pytest.raises(DataError):
            corpus_bleu([], [])

    def test_refuses_marker_input(self):
        with pytest.raises(DataError):
            corpus_bleu([["gre@@", "en"]], [["green"]])


class TestSentenceBleuSmoothed:
    def test_identical_is_100(self):
        assert sentence_bleu_smoothed(HYP, HYP) == pytest.approx(100.0)

    def test_cat_pair_hand_value(self):
        p1 = 5 / 6
        p2 = (3 + 1) / (5 + 1)
        p3 = (1 + 1) / (4 + 1)
        p4 = (0 + 1) / (3 + 1)
        expected = 100.0 * (p1 * p2 * p3 * p4) ** 0.25  # BP = 1, equal lengths
        got = sentence_bleu_smoothed(HYP, REF)
        assert got == pytest.approx(expected, abs=1e-9)
        assert got > 0

    def test_renaming_invariance(self):
        mapping = {"the": "t1", "cat": "t2", "sat": "t3",
                   "is": "t4", "on": "t5", "mat": "t6"}
        hyp2 = [mapping[w] for w in HYP]
        ref2 = [mapping[w] for w in REF]
        assert sentence_bleu_smoothed(hyp2, ref2) == pytest.approx(
            sentence_bleu_smoothed(HYP, REF))

    def test_empty_hyp_warns_and_zero(self):
        with pytest.warns(UserWarning):
            assert sentence_bleu_smoothed([], ["a"]) == 0.0

    def test_smoothing_never_zeroes_nonzero(self):
        # smoothing touches only n>=2 precisions: a pair with a positive
        # unsmoothed score keeps a positive smoothed score
        sent = ["a", "b", "c", "d", "e"]
        stats = BleuStats()
        stats.add_pair(sent, sent)
        assert stats.score(smooth=False) > 0
        assert stats.score(smooth=True) > 0

    @given(st.lists(st.sampled_from("abcd"), min_size=1, max_size=12),
           st.lists(st.sampled_from("abcd"), min_size=1, max_size=12))
    def test_range(self, hyp, ref):
        s = sentence_bleu_smoothed(hyp, ref)
        assert 0.0 <= s <= 100.0


class TestLengthBuckets:
    def test_single_bucket_equals_mean(self):
        pairs = [(HYP, REF), (["a", "b"], ["a", "b"]), (["x"], ["x"])]
        report = length_bucket_report(pairs, [])
        assert len(report) == 1
        mean = sum(sentence_bleu_smoothed(h, r) for h, r in pairs) / 3
        assert report[0]["mean"] == pytest.approx(mean)
        assert report[0]["count"] == 3

    def test_same_length_one_bucket_populated(self):
        pairs = [(["a", "b", "c"], ["a", "b", "c"])] * 4
        report = length_bucket_report(pairs, [3, 10])
        counts = [b["count"] for b in report]
        assert counts == [0, 4, 0]
        assert report[0]["mean"] is None

    def test_two_buckets_hand_average(self):
        short = (["a", "b"], ["a", "b"])  # 100
        long_hit = (["p", "q", "r", "s", "t"], ["p", "q", "r", "s", "t"])  # 100
        long_miss = (["p", "q", "r", "s", "t"], ["p", "q", "r", "s", "u"])
        report = length_bucket_report([short, long_hit, long_miss], [4])
        assert report[0]["mean"] == pytest.approx(100.0)
        miss_score = sentence_bleu_smoothed(long_miss[0], long_miss[1])
        assert report[1]["mean"] == pytest.approx((100.0 + miss_score) / 2)

    def test_unsorted_edges(self):
        with pytest.raises(ConfigError):
            length_bucket_report([], [5, 5])
        with pytest.raises(ConfigError):
            length_bucket_report([], [9, 3])


class TestPerplexity:
    def test_uniform_model(self):
        vocab = 50
        tokens = 30
        assert perplexity(tokens * math.log(vocab), tokens) == pytest.approx(vocab)

    def test_perfect_model(self):
        assert perplexity(0.0, 10) == 1.0

    def test_ln8_per_token(self):
        assert perplexity(5 * math.log(8.0), 5) == pytest.approx(8.0)

    def test_zero_tokens(self):
        with pytest.raises(DataError):
            perplexity(1.0, 0)

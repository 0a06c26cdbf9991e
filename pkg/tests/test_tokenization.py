import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltseq.bpe import (
    BPEModel,
    DanglingMarkerWarning,
    apply_bpe,
    learn_bpe,
    remove_bpe,
    word_segment_counts,
)
from ltseq.errors import ConfigError, DataError
from ltseq.vocab import BOS, EOS, PAD, UNK, Vocab, build_vocab

words = st.lists(st.text(alphabet="abcde", min_size=1, max_size=8),
                 min_size=1, max_size=8)


class TestLearnBpe:
    def test_zero_merges_char_level(self):
        model = learn_bpe([["abc", "de"]], 0)
        assert len(model) == 0
        assert apply_bpe(model, ["abc"]) == ["a@@", "b@@", "c"]

    def test_first_merge_by_count(self):
        # "aaab" x3: pair (a,a) occurs 2x per word = 6, (a,b) 3 -> merge aa
        model = learn_bpe([["aaab"]] * 3, 1)
        assert model.merges == [("a", "a")]

    def test_lexicographic_tie_break(self):
        # "ba" and "ab" each once: counts tie, ("a","b") < ("b","a")
        model = learn_bpe([["ba", "ab"]], 1)
        assert model.merges == [("a", "b")]

    def test_deterministic(self):
        corpus = [["banana", "bandana"], ["cabana", "banana"]]
        m1 = learn_bpe(corpus, 10)
        m2 = learn_bpe(corpus, 10)
        assert m1.merges == m2.merges

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError):
            learn_bpe([], 5)

    def test_merges_never_cross_words(self):
        model = learn_bpe([["ab", "ba"]] * 10, 5)
        for left, right in model.merges:
            assert " " not in left + right


class TestApplyRemove:
    def test_whole_word_symbol_unchanged(self):
        model = learn_bpe([["dog"]] * 5, 10)  # enough merges to fuse "dog"
        assert apply_bpe(model, ["dog"]) == ["dog"]

    def test_three_unit_split_marker_format(self):
        model = BPEModel([("g", "r"), ("gr", "e"), ("e", "n"), ("en", "-"),
                          ("l", "i"), ("li", "g"), ("lig", "h"), ("ligh", "t")])
        assert model.segment_word("green-light") == ["gre", "en-", "light"]
        assert apply_bpe(model, ["green-light"]) == ["gre@@", "en-@@", "light"]

    def test_remove_bpe_joins(self):
        assert remove_bpe(["gre@@", "en-@@", "light"]) == ["green-light"]

    def test_remove_bpe_identity_without_markers(self):
        assert remove_bpe(["plain", "words"]) == ["plain", "words"]

    def test_dangling_marker_warns(self):
        with pytest.warns(DanglingMarkerWarning):
            assert remove_bpe(["a@@"]) == ["a"]

    def test_unknown_chars_pass_through(self):
        model = learn_bpe([["abc"]], 2)
        out = apply_bpe(model, ["xyz"])
        assert remove_bpe(out) == ["xyz"]

    @given(words, st.integers(0, 30))
    def test_roundtrip_property(self, sentence, merges):
        model = learn_bpe([sentence], merges)
        assert remove_bpe(apply_bpe(model, sentence)) == sentence

    @given(words)
    def test_groups_contiguous_and_counts_match(self, sentence):
        model = learn_bpe([sentence], 8)
        toks = apply_bpe(model, sentence)
        counts = word_segment_counts(model, sentence)
        assert sum(counts) == len(toks)
        # marker-stripped concatenation restores each word in order
        i = 0
        for word, k in zip(sentence, counts):
            group = toks[i:i + k]
            assert all(t.endswith("@@") for t in group[:-1])
            assert not group[-1].endswith("@@")
            assert "".join(t.removesuffix("@@") for t in group) == word
            i += k


class TestBpeFileFormat:
    def test_roundtrip(self, tmp_path):
        model = learn_bpe([["banana", "cabana"]] * 3, 6)
        path = tmp_path / "merges.txt"
        model.save(path)
        loaded = BPEModel.load(path)
        assert loaded.merges == model.merges

    def test_bad_line(self, tmp_path):
        path = tmp_path / "merges.txt"
        path.write_text("a b c\n")
        with pytest.raises(DataError):
            BPEModel.load(path)


class TestVocab:
    def test_reserved_ids(self):
        v = build_vocab([["hello", "world"]], 10)
        assert (PAD, UNK, BOS, EOS) == (0, 1, 2, 3)
        assert v.decode([PAD, UNK, BOS, EOS]) == ["<pad>", "<unk>", "<s>", "</s>"]

    def test_encode_decode_roundtrip(self):
        v = build_vocab([["a", "b", "c", "a"]], 10)
        sent = ["a", "c", "b"]
        assert v.decode(v.encode(sent)) == sent

    def test_oov_maps_to_unk(self):
        v = build_vocab([["a", "b"]], 10)
        assert v.encode(["zzz"]) == [UNK]

    def test_frequency_then_lexicographic(self):
        corpus = [["b", "b", "a", "a", "c"]]
        v = build_vocab(corpus, 6)  # room for 2 real tokens
        assert v.id_to_token[4:] == ["a", "b"]  # a and b tie at 2, c dropped

    def test_max_size_too_small(self):
        with pytest.raises(ConfigError):
            build_vocab([["a"]], 3)

    def test_save_load(self, tmp_path):
        v = build_vocab([["x", "y", "x"]], 10)
        path = tmp_path / "vocab.txt"
        v.save(path)
        loaded = Vocab.load(path)
        assert loaded.id_to_token == v.id_to_token
        assert loaded.counts["x"] == 2

    def test_file_has_tab_counts(self, tmp_path):
        v = build_vocab([["x", "y", "x"]], 10)
        path = tmp_path / "vocab.txt"
        v.save(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x\t2"


class TestCorpusScale:
    def test_1k_sentence_roundtrip_and_determinism(self):
        rng = np.random.default_rng(42)
        alphabet = list("abcdefgh")
        corpus = [
            ["".join(rng.choice(alphabet, size=rng.integers(1, 9)))
             for _ in range(rng.integers(2, 9))]
            for _ in range(1000)
        ]
        m1 = learn_bpe(corpus, 200)
        m2 = learn_bpe(corpus, 200)
        assert m1.merges == m2.merges
        for sent in corpus[::37]:
            assert remove_bpe(apply_bpe(m1, sent)) == sent

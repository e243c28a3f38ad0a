import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cwseg.dictgen import (
    EXTERNAL,
    INTERNAL,
    Dictionary,
    DictionaryEncodingError,
    GenerationError,
    build_internal_dictionary,
    gen_classification_set,
    gen_negative_word,
    gen_pseudo_corpus,
    gen_pseudo_sentence,
    gen_random_dictionary,
    load_dictionary,
    propose_replacement,
    read_segmented_corpus,
    write_segmented_corpus,
)
from cwseg.tagcodec import Tag, is_valid_sequence, tags_to_words


class TestDictionary:
    def test_dedup_and_membership(self):
        d = Dictionary(["人工智能", "最近", "最近"])
        assert len(d) == 2
        assert "最近" in d and "很火" not in d

    def test_rejects_empty_word(self):
        with pytest.raises(ValueError):
            Dictionary([""])

    def test_union_and_origins(self):
        ext = Dictionary(["a", "b"], origin=EXTERNAL)
        internal = Dictionary(["b", "c"], origin=INTERNAL)
        merged = ext.union(internal)
        assert set(merged.words) == {"a", "b", "c"}
        assert merged.origin("a") == EXTERNAL
        assert merged.origin("b") == EXTERNAL  # first registration wins
        assert merged.origin("c") == INTERNAL

    def test_charset_sorted_unique(self):
        d = Dictionary(["ba", "ac"])
        assert d.charset() == ("a", "b", "c")


class TestLoadDictionary:
    def test_dedup_from_file(self, tmp_path):
        path = tmp_path / "dict.txt"
        path.write_text("人工智能\n最近\n最近\n", encoding="utf-8")
        d = load_dictionary(path)
        assert len(d) == 2
        assert d.origin("最近") == EXTERNAL

    def test_empty_file(self, tmp_path):
        path = tmp_path / "dict.txt"
        path.write_text("", encoding="utf-8")
        assert len(load_dictionary(path)) == 0

    def test_round_trip_ten_words(self, tmp_path):
        words = [f"w{i}x" for i in range(10)]
        path = tmp_path / "dict.txt"
        path.write_text("\n".join(words) + "\n", encoding="utf-8")
        d = load_dictionary(path)
        assert len(d) == 10
        assert all(w in d for w in words)

    def test_crlf_and_blank_lines(self, tmp_path):
        path = tmp_path / "dict.txt"
        path.write_bytes("alpha\r\n\r\nbeta\r\n".encode("utf-8"))
        d = load_dictionary(path)
        assert set(d.words) == {"alpha", "beta"}

    def test_invalid_utf8_reports_line(self, tmp_path):
        path = tmp_path / "dict.txt"
        path.write_bytes(b"ok\n\xff\xfe bad\n")
        with pytest.raises(DictionaryEncodingError) as err:
            load_dictionary(path)
        assert err.value.line == 2

    def test_missing_file_is_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_dictionary(tmp_path / "absent.txt")


class TestInternalDictionary:
    def test_set_union_of_corpus(self):
        corpus = [["很火", "最近"], ["最近", "人工智能"]]
        d = build_internal_dictionary(corpus)
        assert set(d.words) == {"很火", "最近", "人工智能"}
        assert d.origin("很火") == INTERNAL

    def test_empty_corpus(self):
        assert len(build_internal_dictionary([])) == 0

    def test_union_size(self):
        internal = build_internal_dictionary([["a", "b"]])
        external = Dictionary(["b", "c"])
        assert len(internal.union(external)) == 3


class TestPseudoGeneration:
    def test_paper_style_assembly(self):
        # sampling exactly the three known words must build this sentence
        d = Dictionary(["人工智能"])
        sent = gen_pseudo_sentence(d, 1, np.random.default_rng(0))
        assert sent.chars == "人工智能"
        assert [t.name for t in sent.tags] == ["B", "M", "M", "E"]

    def test_single_word_dictionary(self):
        d = Dictionary(["人"])
        sent = gen_pseudo_sentence(d, 1, np.random.default_rng(0))
        assert sent.chars == "人" and list(sent.tags) == [Tag.S]

    def test_empty_dictionary_rejected(self):
        with pytest.raises(ValueError):
            gen_pseudo_sentence(Dictionary(), 3, np.random.default_rng(0))

    def test_round_trip_recovers_sampled_words(self):
        d = Dictionary(["很火", "最近", "人工智能", "人"])
        rng = np.random.default_rng(1)
        for _ in range(200):
            sent = gen_pseudo_sentence(d, int(rng.integers(1, 7)), rng)
            assert is_valid_sequence(sent.tags)
            for word in tags_to_words(sent.chars, sent.tags):
                assert word in d

    def test_corpus_count_and_determinism(self):
        d = Dictionary(["很火", "最近", "人工智能"])
        a = gen_pseudo_corpus(d, 50, np.random.default_rng(9))
        b = gen_pseudo_corpus(d, 50, np.random.default_rng(9))
        assert len(a) == 50
        assert a == b

    def test_empty_corpus_request(self):
        d = Dictionary(["a"])
        assert gen_pseudo_corpus(d, 0, np.random.default_rng(0)) == []

    def test_fixed_word_count(self):
        d = Dictionary(["ab", "c", "def"])
        corpus = gen_pseudo_corpus(d, 30, np.random.default_rng(4), u_min=5, u_max=5)
        for sent in corpus:
            assert len(sent.words) == 5

    def test_length_is_sum_of_word_lengths(self):
        d = Dictionary(["ab", "c", "def"])
        corpus = gen_pseudo_corpus(d, 30, np.random.default_rng(5))
        for sent in corpus:
            assert len(sent.chars) == sum(len(w) for w in sent.words)


class TestNegativeGeneration:
    def test_full_replacement_with_disjoint_charset(self):
        d = Dictionary(["人工智能", "最近"])
        rng = np.random.default_rng(0)
        for _ in range(50):
            neg = gen_negative_word(d, rng, p=1.0, charset="xyz")
            assert neg not in d
            assert not set(neg) & set("人工智能最近")

    def test_known_corruption_is_a_valid_negative(self):
        d = Dictionary(["人工智能", "最近", "很火"])
        assert "人重智新" not in d  # the corrupted form is classified -1

    def test_negatives_never_in_dictionary(self):
        rng = np.random.default_rng(1)
        d = gen_random_dictionary(rng, n_multi=50, n_single=10, alphabet_size=20)
        for _ in range(500):
            assert gen_negative_word(d, rng) not in d

    def test_replacement_rate_statistics(self):
        # per-position replacement decisions on raw proposals track p
        rng = np.random.default_rng(2)
        flags = []
        for _ in range(10_000):
            _, mask = propose_replacement("abcd", 0.5, "efgh", rng)
            flags.append(mask)
        rate = np.mean(np.stack(flags), axis=0)
        assert np.all(np.abs(rate - 0.5) < 0.02)

    def test_retry_budget_exhaustion(self):
        # one single-char word and a charset equal to that char: every
        # proposal is either unchanged or the word itself
        d = Dictionary(["a"])
        with pytest.raises(GenerationError):
            gen_negative_word(d, np.random.default_rng(0), p=1.0, charset="a")

    def test_bad_probability(self):
        with pytest.raises(ValueError):
            propose_replacement("ab", 0.0, "xy", np.random.default_rng(0))
        with pytest.raises(ValueError):
            propose_replacement("ab", 1.5, "xy", np.random.default_rng(0))


class TestClassificationSet:
    def test_positives_only(self):
        d = Dictionary(["ab", "cd", "ef"])
        samples = gen_classification_set(d, np.random.default_rng(0), n_neg=0)
        assert len(samples) == 3
        assert all(s.label == 1 and s.chars in d for s in samples)

    def test_balanced_counts(self):
        rng = np.random.default_rng(1)
        d = gen_random_dictionary(rng, n_multi=80, n_single=20, alphabet_size=30)
        samples = gen_classification_set(d, rng, n_neg=100)
        assert len(samples) == 200
        assert sum(s.label == 1 for s in samples) == 100
        assert sum(s.label == -1 for s in samples) == 100

    def test_default_negative_count_matches_dictionary(self):
        rng = np.random.default_rng(2)
        d = gen_random_dictionary(rng, n_multi=30, n_single=5, alphabet_size=20)
        samples = gen_classification_set(d, rng)
        assert len(samples) == 2 * len(d)

    def test_label_membership_consistency(self):
        rng = np.random.default_rng(3)
        d = gen_random_dictionary(rng, n_multi=40, n_single=10, alphabet_size=25)
        for s in gen_classification_set(d, rng, n_neg=80):
            assert (s.chars in d) == (s.label == 1)

    def test_deterministic(self):
        d = Dictionary(["ab", "cd", "ef", "gh"])
        a = gen_classification_set(d, np.random.default_rng(7), n_neg=4)
        b = gen_classification_set(d, np.random.default_rng(7), n_neg=4)
        assert a == b


class TestCorpusIO:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "corpus.txt"
        sentences = [["很火", "最近"], ["人工智能"]]
        write_segmented_corpus(sentences, path)
        assert read_segmented_corpus(path) == sentences

    def test_repeated_spaces_tolerated(self, tmp_path):
        path = tmp_path / "corpus.txt"
        path.write_text("a  b\n", encoding="utf-8")
        assert read_segmented_corpus(path) == [["a", "b"]]

    def test_blank_line_is_empty_sentence(self, tmp_path):
        path = tmp_path / "corpus.txt"
        path.write_text("a b\n\nc\n", encoding="utf-8")
        assert read_segmented_corpus(path) == [["a", "b"], [], ["c"]]

    def test_crlf(self, tmp_path):
        path = tmp_path / "corpus.txt"
        path.write_bytes("a b\r\nc\r\n".encode("utf-8"))
        assert read_segmented_corpus(path) == [["a", "b"], ["c"]]


class TestRandomDictionary:
    def test_structure(self):
        d = gen_random_dictionary(
            np.random.default_rng(0), n_multi=200, n_single=40, alphabet_size=60
        )
        words = d.words
        multi = [w for w in words if len(w) > 1]
        single = [w for w in words if len(w) == 1]
        assert len(multi) == 200 and len(single) == 40
        alphabet = {c for w in multi for c in w}
        assert len(alphabet) <= 60
        assert not alphabet & set(single)


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1))
def test_pseudo_sentences_always_valid(seed):
    d = Dictionary(["很火", "最近", "人工智能", "人", "学习"])
    rng = np.random.default_rng(seed)
    sent = gen_pseudo_sentence(d, int(rng.integers(1, 9)), rng)
    assert is_valid_sequence(sent.tags)
    assert all(w in d for w in sent.words)

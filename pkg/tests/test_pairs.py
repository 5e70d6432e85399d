import numpy as np
import pytest

from awekws.errors import DataError
from awekws.pairs import WordPair, load_pairs, mine_pairs, resolve_pair_frames, save_pairs
from awekws.segmentation import Segment

from tests.conftest import add_word_instances, make_corpus


def corpus_with_words(rng, split, spans_by_utt):
    names = sorted(spans_by_utt)
    corpus = make_corpus(rng, len(names), dim=3, min_frames=30, max_frames=30, split=split)
    remap = {old: new for old, new in zip(sorted(corpus.features), names)}
    # make_corpus names utts "<split>-NNN"; rebuild with caller's ids
    rebuilt = type(corpus)(split=split)
    for old, new in remap.items():
        fs = corpus.features[old]
        fs.utterance_id = new
        rebuilt.features[new] = fs
    add_word_instances(rebuilt, spans_by_utt)
    return rebuilt


class TestMinePairs:
    def test_three_instances_give_six_ordered_pairs(self, rng):
        corpus = corpus_with_words(
            rng,
            "train",
            {
                "u1": [("vita", 0, 5), ("vita", 10, 15)],
                "u2": [("vita", 2, 8)],
            },
        )
        pairs = mine_pairs([corpus], max_pairs=100, seed=0)
        assert len(pairs) == 6
        combos = {
            (
                p.input_segment.utterance_id,
                p.input_segment.start_frame,
                p.target_segment.utterance_id,
                p.target_segment.start_frame,
            )
            for p in pairs
        }
        assert len(combos) == 6
        for p in pairs:
            assert p.word_type == "vita"
            assert (p.input_corpus, p.input_segment) != (p.target_corpus, p.target_segment)

    def test_single_instance_vocabulary_errors(self, rng):
        corpus = corpus_with_words(rng, "train", {"u1": [("vita", 0, 5), ("kabila", 6, 12)]})
        with pytest.raises(DataError, match="no pairs available"):
            mine_pairs([corpus], max_pairs=10, seed=0)

    def test_capped_sampling_is_distinct_and_seeded(self, rng):
        # corpus A: word "aa" with 10 ordered pairs; corpus B: "bb" with 14... use
        # instance counts: n*(n-1): 10 -> none; use 5 instances (20) trimmed via spans
        c1 = corpus_with_words(
            rng, "a", {"u1": [("aa", 0, 4), ("aa", 4, 8), ("aa", 8, 12)], "u2": [("aa", 0, 6)]}
        )  # 4 instances -> 12 ordered pairs
        c2 = corpus_with_words(
            rng, "b", {"v1": [("bb", 0, 4), ("bb", 4, 8)], "v2": [("bb", 0, 5), ("bb", 5, 9)]}
        )  # 4 instances -> 12 ordered pairs
        first = mine_pairs([c1, c2], max_pairs=8, seed=42)
        second = mine_pairs([c1, c2], max_pairs=8, seed=42)
        other = mine_pairs([c1, c2], max_pairs=8, seed=43)
        assert len(first) == 8
        assert first == second
        assert first != other
        keys = {(p.word_type, p.input_corpus, p.input_segment, p.target_corpus, p.target_segment) for p in first}
        assert len(keys) == 8

    def test_pooling_across_corpora(self, rng):
        c1 = corpus_with_words(rng, "a", {"u1": [("vita", 0, 5)]})
        c2 = corpus_with_words(rng, "b", {"v1": [("vita", 3, 9)]})
        pairs = mine_pairs([c1, c2], max_pairs=10, seed=0)
        assert len(pairs) == 2  # the two cross-corpus ordered combinations
        assert {p.input_corpus for p in pairs} == {0, 1}

    def test_resolve_pair_frames_slices_correctly(self, rng):
        corpus = corpus_with_words(rng, "train", {"u1": [("vita", 0, 5), ("vita", 10, 15)]})
        pair = WordPair("vita", 0, Segment("u1", 0, 5), 0, Segment("u1", 10, 15))
        inp, tgt = resolve_pair_frames(pair, [corpus])
        np.testing.assert_array_equal(inp, corpus.features["u1"].frames[0:5])
        np.testing.assert_array_equal(tgt, corpus.features["u1"].frames[10:15])

    def test_pair_file_round_trip(self, tmp_path, rng):
        corpus = corpus_with_words(
            rng, "train", {"u1": [("vita", 0, 5), ("vita", 10, 15)], "u2": [("vita", 2, 8)]}
        )
        pairs = mine_pairs([corpus], max_pairs=6, seed=1)
        path = tmp_path / "pairs.tsv"
        save_pairs(path, pairs)
        assert load_pairs(path) == pairs

    def test_same_instance_pair_rejected(self):
        with pytest.raises(DataError, match="same instance"):
            WordPair("w", 0, Segment("u", 0, 5), 0, Segment("u", 0, 5))

"""Search tests, anchored to a naive double-loop oracle.

The oracle enumerates utterances and segments in plain Python, scoring each
segment with the public scalar distance op, and re-implements min/argmin,
tie-breaking, and top-k selection independently of the index kernels.
"""

import logging

import numpy as np
import pytest

from awekws.errors import DataError
from awekws.model import AweModel, ModelConfig
from awekws.search import (
    KeywordQuery,
    RankedHit,
    SegmentIndex,
    build_index,
    build_queries,
    classify,
    cosine_distance,
    load_hits,
    load_index,
    save_hits,
    save_index,
    score_utterances,
    top_k_any_keyword,
)
from awekws.segmentation import Segment, SegmentationConfig

from tests.conftest import add_word_instances, make_corpus


class TestCosineDistance:
    def test_identity_orthogonal_antipodal(self):
        a = np.array([1.0, 0.0])
        assert cosine_distance(a, np.array([1.0, 0.0])) == 0.0
        assert cosine_distance(a, np.array([0.0, 1.0])) == 1.0
        assert cosine_distance(a, np.array([-1.0, 0.0])) == 2.0

    def test_self_distance_is_exactly_zero(self, rng):
        for _ in range(20):
            v = rng.standard_normal(17)
            assert cosine_distance(v, v) == 0.0

    def test_symmetry_and_range(self, rng):
        for _ in range(50):
            a = rng.standard_normal(9)
            b = rng.standard_normal(9)
            d = cosine_distance(a, b)
            assert d == cosine_distance(b, a)
            assert 0.0 <= d <= 2.0 + 1e-15

    def test_zero_norm_convention_logged(self, caplog):
        with caplog.at_level(logging.WARNING, logger="awekws.search"):
            d = cosine_distance(np.zeros(3), np.ones(3))
        assert d == 1.0
        assert "zero-norm" in caplog.text


def random_index(rng, n_utts, max_segments_per_utt, dim):
    segments = []
    rows = []
    for i in range(n_utts):
        utt = f"utt-{i:04d}"
        n_seg = int(rng.integers(1, max_segments_per_utt + 1))
        for j in range(n_seg):
            segments.append(Segment(utt, j, j + 5))
            rows.append(rng.standard_normal(dim))
    return SegmentIndex.from_embeddings(segments, np.array(rows))


def oracle_score_utterances(index, query):
    """Naive double loop: every utterance, every segment, scalar distances."""
    per_utt = {}
    for utt in index.utterance_ids:
        best = None
        best_seg = None
        for seg, row in zip(index.segments, index.embeddings):
            if seg.utterance_id != utt:
                continue
            d = cosine_distance(row, query.query_embedding)
            if best is None or d < best:
                best = d
                best_seg = seg
        per_utt[utt] = (best, best_seg)
    hits = [RankedHit(u, query.keyword, s, seg) for u, (s, seg) in per_utt.items()]
    hits.sort(key=lambda h: (h.score, h.utterance_id))
    return hits


def oracle_top_k(index, queries, k):
    best = {}
    for utt in index.utterance_ids:
        entries = []
        for q_idx, q in enumerate(queries):
            oracle_hits = oracle_score_utterances(index, q)
            for h in oracle_hits:
                if h.utterance_id == utt:
                    entries.append((h.score, q_idx, h.best_segment))
        score, q_idx, seg = min(entries, key=lambda e: (e[0], e[1]))
        best[utt] = (score, q_idx, seg)
    order = sorted(best, key=lambda u: (best[u][0], u))
    return [
        RankedHit(u, queries[best[u][1]].keyword, best[u][0], best[u][2]) for u in order[:k]
    ]


class TestScoreUtterances:
    def test_identical_segment_ranks_first_with_zero_score(self, rng):
        emb = rng.standard_normal((5, 8))
        segments = [
            Segment("a", 0, 5),
            Segment("a", 5, 10),
            Segment("b", 0, 5),
            Segment("b", 5, 10),
            Segment("b", 10, 15),
        ]
        index = SegmentIndex.from_embeddings(segments, emb)
        query = KeywordQuery("kw", [emb[3]], emb[3].copy())
        hits = score_utterances(index, query)
        assert hits[0].utterance_id == "b"
        assert hits[0].score == 0.0
        assert hits[0].best_segment == Segment("b", 5, 10)

    def test_matches_oracle_small(self, rng):
        index = random_index(rng, 7, 6, 10)
        query = KeywordQuery("kw", [rng.standard_normal(10)], rng.standard_normal(10))
        fast = score_utterances(index, query)
        assert fast == oracle_score_utterances(index, query)

    def test_single_utterance_corpus(self, rng):
        index = random_index(rng, 1, 8, 6)
        query = KeywordQuery("kw", [rng.standard_normal(6)], rng.standard_normal(6))
        hits = score_utterances(index, query)
        assert len(hits) == 1

    def test_tie_break_is_lexicographic(self):
        emb = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        segments = [Segment("zz", 0, 5), Segment("aa", 0, 5), Segment("aa", 5, 10)]
        # segments must be grouped; order: zz then aa is fine (contiguous runs)
        index = SegmentIndex.from_embeddings(segments, emb)
        query = KeywordQuery("kw", [np.array([1.0, 0.0])], np.array([1.0, 0.0]))
        hits = score_utterances(index, query)
        assert [h.utterance_id for h in hits] == ["aa", "zz"]
        assert hits[0].score == hits[1].score == 0.0


class TestClassify:
    def test_threshold_above_range_predicts_all(self, rng):
        index = random_index(rng, 4, 3, 5)
        query = KeywordQuery("kw", [rng.standard_normal(5)], rng.standard_normal(5))
        hits = score_utterances(index, query)
        assert all(classify(hits, 3.0).values())

    def test_threshold_zero_predicts_none(self, rng):
        index = random_index(rng, 4, 3, 5)
        query = KeywordQuery("kw", [rng.standard_normal(5)], rng.standard_normal(5))
        hits = score_utterances(index, query)
        assert not any(classify(hits, 0.0).values())

    def test_hand_set_scores(self):
        hits = [
            RankedHit("a", "kw", 0.1, Segment("a", 0, 2)),
            RankedHit("b", "kw", 0.5, Segment("b", 0, 2)),
            RankedHit("c", "kw", 0.9, Segment("c", 0, 2)),
        ]
        assert classify(hits, 0.5) == {"a": 1, "b": 0, "c": 0}

    def test_monotone_in_threshold(self, rng):
        index = random_index(rng, 10, 4, 6)
        query = KeywordQuery("kw", [rng.standard_normal(6)], rng.standard_normal(6))
        hits = score_utterances(index, query)
        previous = set()
        for t in np.linspace(0.0, 2.1, 12):
            positives = {u for u, p in classify(hits, float(t)).items() if p}
            assert previous <= positives
            previous = positives


class TestTopKAnyKeyword:
    def test_min_over_keywords_annotation(self):
        emb = np.array([[1.0, 0.0], [0.0, 1.0]])
        segments = [Segment("a", 0, 5), Segment("b", 0, 5)]
        index = SegmentIndex.from_embeddings(segments, emb)
        q1 = KeywordQuery("kw1", [np.array([1.0, 0.1])], np.array([1.0, 0.1]))
        q2 = KeywordQuery("kw2", [np.array([1.0, 0.9])], np.array([1.0, 0.9]))
        hits = top_k_any_keyword(index, [q1, q2], k=2)
        a_hit = next(h for h in hits if h.utterance_id == "a")
        assert a_hit.keyword == "kw1"
        per_kw_a = {
            q.keyword: next(h for h in score_utterances(index, q) if h.utterance_id == "a").score
            for q in (q1, q2)
        }
        assert a_hit.score == min(per_kw_a.values())

    def test_k_larger_than_corpus_ranks_everything(self, rng):
        index = random_index(rng, 5, 3, 6)
        queries = [
            KeywordQuery(f"kw{i}", [rng.standard_normal(6)], rng.standard_normal(6))
            for i in range(3)
        ]
        hits = top_k_any_keyword(index, queries, k=50)
        assert len(hits) == 5

    def test_k1_is_global_minimum(self, rng):
        index = random_index(rng, 6, 4, 6)
        queries = [
            KeywordQuery(f"kw{i}", [rng.standard_normal(6)], rng.standard_normal(6))
            for i in range(2)
        ]
        top = top_k_any_keyword(index, queries, k=1)
        assert top == oracle_top_k(index, queries, 1)

    def test_matches_oracle(self, rng):
        index = random_index(rng, 6, 4, 8)
        queries = [
            KeywordQuery(f"kw{i}", [rng.standard_normal(8)], rng.standard_normal(8))
            for i in range(3)
        ]
        assert top_k_any_keyword(index, queries, 4) == oracle_top_k(index, queries, 4)

    def test_min_over_keywords_bounded_by_each(self, rng):
        index = random_index(rng, 5, 4, 6)
        queries = [
            KeywordQuery(f"kw{i}", [rng.standard_normal(6)], rng.standard_normal(6))
            for i in range(3)
        ]
        combined = {h.utterance_id: h.score for h in top_k_any_keyword(index, queries, 5)}
        for q in queries:
            for h in score_utterances(index, q):
                assert combined[h.utterance_id] <= h.score


class TestScaleInvariance:
    def test_power_of_two_scaling_is_bit_exact(self, rng):
        index = random_index(rng, 8, 5, 16)
        query_vec = rng.standard_normal(16)
        query = KeywordQuery("kw", [query_vec], query_vec.copy())
        base = score_utterances(index, query)
        for exponent in (-3, 2, 7):
            scale = 2.0**exponent
            scaled_index = SegmentIndex.from_embeddings(index.segments, index.embeddings * scale)
            scaled_query = KeywordQuery("kw", [query_vec * scale], query_vec * scale)
            scaled = score_utterances(scaled_index, scaled_query)
            assert [h.score for h in scaled] == [h.score for h in base]
            assert [h.utterance_id for h in scaled] == [h.utterance_id for h in base]


class TestQueryAveraging:
    def test_query_embedding_is_exact_mean(self, rng):
        templates = [rng.standard_normal(6) for _ in range(10)]
        q = KeywordQuery.from_templates("kw", templates)
        np.testing.assert_array_equal(q.query_embedding, np.stack(templates).mean(axis=0))
        assert len(q.template_embeddings) == 10

    def test_build_queries_samples_templates(self, rng):
        corpus = make_corpus(rng, 4, dim=3, min_frames=30, max_frames=30, split="dev")
        spans = {utt: [("vita", 0, 8), ("vita", 10, 18), ("amani", 20, 28)] for utt in corpus.utterance_ids()}
        add_word_instances(corpus, spans)
        model = AweModel.init(ModelConfig(3, hidden_dim=6, embed_dim=4, num_layers=2), seed=0)
        queries = build_queries(model, corpus, ["vita", "amani"], templates_per_keyword=3, seed=1)
        assert [q.keyword for q in queries] == ["vita", "amani"]
        assert all(len(q.template_embeddings) == 3 for q in queries)
        again = build_queries(model, corpus, ["vita", "amani"], templates_per_keyword=3, seed=1)
        for a, b in zip(queries, again):
            assert a.query_embedding.tobytes() == b.query_embedding.tobytes()

    def test_missing_keyword_instance_errors(self, rng):
        corpus = make_corpus(rng, 1, dim=3, min_frames=30, max_frames=30, split="dev")
        add_word_instances(corpus, {corpus.utterance_ids()[0]: [("vita", 0, 8)]})
        model = AweModel.init(ModelConfig(3, hidden_dim=6, embed_dim=4, num_layers=2), seed=0)
        with pytest.raises(DataError, match="no aligned instance"):
            build_queries(model, corpus, ["ghost"], templates_per_keyword=2, seed=0)


class TestIndexBuildAndFiles:
    def test_build_index_shapes_and_ranges(self, rng):
        corpus = make_corpus(rng, 3, dim=3, min_frames=12, max_frames=20)
        model = AweModel.init(ModelConfig(3, hidden_dim=6, embed_dim=4, num_layers=2), seed=0)
        cfg = SegmentationConfig([8, 10], 4)
        index = build_index(model, corpus, cfg)
        assert index.embeddings.shape == (index.num_segments, 4)
        # ranges partition [0, n)
        assert index.range_starts[0] == 0
        assert index.range_ends[-1] == index.num_segments
        for s, e in zip(index.range_starts[1:], index.range_ends[:-1]):
            assert s == e

    def test_build_index_deterministic(self, rng):
        corpus = make_corpus(rng, 2, dim=3, min_frames=12, max_frames=16)
        model = AweModel.init(ModelConfig(3, hidden_dim=6, embed_dim=4, num_layers=2), seed=0)
        cfg = SegmentationConfig([8], 4)
        a = build_index(model, corpus, cfg)
        b = build_index(model, corpus, cfg)
        assert a.embeddings.tobytes() == b.embeddings.tobytes()

    def test_index_save_load_round_trip(self, tmp_path, rng):
        corpus = make_corpus(rng, 2, dim=3, min_frames=12, max_frames=16)
        model = AweModel.init(ModelConfig(3, hidden_dim=6, embed_dim=4, num_layers=2), seed=0)
        index = build_index(model, corpus, SegmentationConfig([8], 4))
        prefix = tmp_path / "idx"
        save_index(prefix, index)
        loaded = load_index(prefix)
        assert loaded.segments == index.segments
        # float32 model embeddings survive the float32 container exactly
        assert loaded.embeddings.tobytes() == index.embeddings.tobytes()

    def test_hits_file_round_trip(self, tmp_path):
        hits = [
            RankedHit("b", "kw", 0.25, Segment("b", 5, 10)),
            RankedHit("a", "kw", 0.75, Segment("a", 0, 20)),
        ]
        path = tmp_path / "hits.tsv"
        save_hits(path, hits)
        assert load_hits(path) == hits

    def test_non_contiguous_utterance_segments_rejected(self, rng):
        segments = [Segment("a", 0, 5), Segment("b", 0, 5), Segment("a", 5, 10)]
        with pytest.raises(DataError, match="not contiguous"):
            SegmentIndex.from_embeddings(segments, rng.standard_normal((3, 4)))

"""Exact query-by-example search over embedded segments.

The search collection is held as one contiguous embedding matrix with
per-utterance row ranges.  A keyword query is the component-wise mean of its
template embeddings; an utterance's score for a query is the minimum cosine
distance over its segments, and lower is better.  Search is exhaustive: the
test suite checks exact equality (scores, order and tie-breaks) against a
naive double-loop oracle.

Cosine distance is 1 - a.b / sqrt((a.a)(b.b)), which is exactly 0 for a
vector against itself and exactly scale-invariant for power-of-two scalings.
Zero-norm vectors get distance 1 by convention and are logged as a model
health warning.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from . import model as model_ops
from .corpus import Corpus, load_checkpoint, save_checkpoint
from .errors import DataError, FormatError
from .model import AweModel
from .segmentation import Segment, SegmentationConfig, load_segments, save_segments, segment_corpus

logger = logging.getLogger("awekws.search")


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine distance in [0, 2]; zero-norm inputs map to 1 by convention."""
    a64 = np.ascontiguousarray(a, dtype=np.float64)
    b64 = np.ascontiguousarray(b, dtype=np.float64)
    if a64.shape != b64.shape or a64.ndim != 1:
        raise DataError(f"cosine_distance needs equal-length vectors, got {a64.shape} vs {b64.shape}")
    sq_a = kernels.dot_f64(a64, a64)
    sq_b = kernels.dot_f64(b64, b64)
    if sq_a == 0.0 or sq_b == 0.0:
        logger.warning("cosine_distance on zero-norm vector; returning 1.0 by convention")
        return 1.0
    d = 1.0 - kernels.dot_f64(a64, b64) / math.sqrt(sq_a * sq_b)
    # rounding can land a hair outside [0, 2]; clamp to keep the range contract
    return min(2.0, max(0.0, d))


@dataclass
class KeywordQuery:
    keyword: str
    template_embeddings: list[np.ndarray]
    query_embedding: np.ndarray

    @classmethod
    def from_templates(cls, keyword: str, templates: list[np.ndarray]) -> "KeywordQuery":
        if not templates:
            raise DataError(f"keyword {keyword!r}: need at least one template")
        stack = np.stack([np.asarray(t, dtype=np.float64) for t in templates])
        return cls(keyword, [t for t in stack], stack.mean(axis=0))


@dataclass
class RankedHit:
    utterance_id: str
    keyword: str
    score: float
    best_segment: Segment


@dataclass
class SegmentIndex:
    """Contiguous embedding matrix over segments, grouped by utterance."""

    segments: list[Segment]
    embeddings: np.ndarray  # (n_segments, E) float64
    utterance_ids: list[str]
    range_starts: np.ndarray  # (n_utterances,) int64
    range_ends: np.ndarray
    sqnorms: np.ndarray  # cached squared row norms, float64

    @classmethod
    def from_embeddings(cls, segments: list[Segment], embeddings: np.ndarray) -> "SegmentIndex":
        if len(segments) != embeddings.shape[0]:
            raise DataError(
                f"segment count {len(segments)} != embedding rows {embeddings.shape[0]}"
            )
        if len(segments) == 0:
            raise DataError("cannot build an empty index")
        emb = np.ascontiguousarray(embeddings, dtype=np.float64)
        if not np.isfinite(emb).all():
            raise DataError("non-finite embedding values in index")
        utterance_ids: list[str] = []
        starts: list[int] = []
        ends: list[int] = []
        for i, seg in enumerate(segments):
            if not utterance_ids or seg.utterance_id != utterance_ids[-1]:
                if seg.utterance_id in utterance_ids:
                    raise DataError(
                        f"segments for utterance {seg.utterance_id!r} are not contiguous"
                    )
                if utterance_ids:
                    ends.append(i)
                utterance_ids.append(seg.utterance_id)
                starts.append(i)
        ends.append(len(segments))
        sqnorms = kernels.row_sqnorms_f64(emb)
        zero_rows = int(np.count_nonzero(sqnorms == 0.0))
        if zero_rows:
            logger.warning("index contains %d zero-norm embedding rows", zero_rows)
        return cls(
            segments,
            emb,
            utterance_ids,
            np.asarray(starts, dtype=np.int64),
            np.asarray(ends, dtype=np.int64),
            sqnorms,
        )

    @property
    def num_segments(self) -> int:
        return len(self.segments)

    @property
    def embed_dim(self) -> int:
        return self.embeddings.shape[1]


def build_index(
    model: AweModel,
    corpus: Corpus,
    cfg: SegmentationConfig,
    segments: list[Segment] | None = None,
) -> SegmentIndex:
    """Embed every segment of the corpus (sliding windows unless given)."""
    if segments is None:
        segments = segment_corpus(corpus, cfg)
    else:
        segments = sorted(segments, key=lambda s: (s.utterance_id, s.start_frame, s.length))
    if not segments:
        raise DataError(f"corpus {corpus.split!r} produced no segments")
    emb = np.empty((len(segments), model.config.embed_dim), dtype=np.float64)
    for i, seg in enumerate(segments):
        fs = corpus.features.get(seg.utterance_id)
        if fs is None:
            raise DataError(f"segment references unknown utterance {seg.utterance_id!r}")
        if seg.end_frame > fs.num_frames:
            raise DataError(f"segment {seg} exceeds utterance length {fs.num_frames}")
        emb[i] = model_ops.encode(model, fs.frames[seg.start_frame : seg.end_frame])
    return SegmentIndex.from_embeddings(segments, emb)


def _query_scores(index: SegmentIndex, query: KeywordQuery) -> tuple[np.ndarray, np.ndarray]:
    """Per-utterance (min distance, argmin segment row) for one query."""
    q = np.ascontiguousarray(query.query_embedding, dtype=np.float64)
    if q.shape != (index.embed_dim,):
        raise DataError(f"query dim {q.shape} does not match index dim {index.embed_dim}")
    q_sqnorm = kernels.dot_f64(q, q)
    if q_sqnorm == 0.0:
        logger.warning("query %r has a zero-norm embedding", query.keyword)
    scores = kernels.segment_scores(index.embeddings, index.sqnorms, q, q_sqnorm)
    return kernels.range_min_argmin(scores, index.range_starts, index.range_ends)


def score_utterances(index: SegmentIndex, query: KeywordQuery) -> list[RankedHit]:
    """One hit per utterance, ascending by score; ties break by utterance id."""
    mins, argmins = _query_scores(index, query)
    hits = [
        RankedHit(utt, query.keyword, float(mins[i]), index.segments[int(argmins[i])])
        for i, utt in enumerate(index.utterance_ids)
    ]
    hits.sort(key=lambda h: (h.score, h.utterance_id))
    return hits


def classify(hits: list[RankedHit], threshold: float) -> dict[str, int]:
    """Strictly-below-threshold rule: predicted positive iff score < threshold."""
    if not np.isfinite(threshold):
        raise DataError("threshold must be finite")
    return {h.utterance_id: int(h.score < threshold) for h in hits}


def top_k_any_keyword(index: SegmentIndex, queries: list[KeywordQuery], k: int) -> list[RankedHit]:
    """Rank utterances by their best score over all queries; return the k best.

    Each returned hit is annotated with the keyword achieving the minimum
    (first keyword in query order on ties) and that keyword's best segment.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    if not queries:
        raise DataError("need at least one query")
    n_utt = len(index.utterance_ids)
    best_score = np.full(n_utt, np.inf)
    best_kw = np.zeros(n_utt, dtype=np.int64)
    best_row = np.zeros(n_utt, dtype=np.int64)
    for kw_idx, query in enumerate(queries):
        mins, argmins = _query_scores(index, query)
        better = mins < best_score
        best_score[better] = mins[better]
        best_kw[better] = kw_idx
        best_row[better] = argmins[better]
    order = sorted(range(n_utt), key=lambda i: (best_score[i], index.utterance_ids[i]))
    hits = []
    for i in order[:k]:
        hits.append(
            RankedHit(
                index.utterance_ids[i],
                queries[int(best_kw[i])].keyword,
                float(best_score[i]),
                index.segments[int(best_row[i])],
            )
        )
    return hits


# ---------------------------------------------------------------------------
# Query construction from a template corpus


def build_queries(
    model: AweModel,
    template_corpus: Corpus,
    keywords: list[str],
    templates_per_keyword: int = 10,
    seed: int = 0,
) -> list[KeywordQuery]:
    """Embed and average aligned keyword instances drawn from a corpus.

    Up to ``templates_per_keyword`` instances are sampled per keyword
    (seeded, without replacement); a keyword with no aligned instance is an
    error.
    """
    instances: dict[str, list[tuple[str, int, int]]] = {kw: [] for kw in keywords}
    for utt in sorted(template_corpus.alignments):
        for e in template_corpus.alignments[utt].entries:
            word = e.word.lower()
            if word in instances:
                instances[word].append((utt, e.start_frame, e.end_frame))
    rng = np.random.default_rng(seed)
    queries = []
    for kw in keywords:
        pool = instances[kw]
        if not pool:
            raise DataError(
                f"keyword {kw!r} has no aligned instance in corpus {template_corpus.split!r}"
            )
        if len(pool) > templates_per_keyword:
            chosen = sorted(rng.choice(len(pool), size=templates_per_keyword, replace=False))
        else:
            chosen = range(len(pool))
        templates = []
        for idx in chosen:
            utt, start, end = pool[int(idx)]
            frames = template_corpus.features[utt].frames[start:end]
            templates.append(model_ops.encode(model, frames))
        queries.append(KeywordQuery.from_templates(kw, templates))
    return queries


# ---------------------------------------------------------------------------
# Index and retrieval-list files


def index_paths(prefix: str | Path) -> tuple[Path, Path]:
    return Path(f"{prefix}.emb.awec"), Path(f"{prefix}.segments.tsv")


def save_index(prefix: str | Path, index: SegmentIndex) -> None:
    """Write ``{prefix}.emb.awec`` (float32) and ``{prefix}.segments.tsv``."""
    emb_path, seg_path = index_paths(prefix)
    save_checkpoint(emb_path, {"embeddings": index.embeddings})
    save_segments(seg_path, index.segments)


def load_index(prefix: str | Path) -> SegmentIndex:
    emb_path, seg_path = index_paths(prefix)
    tensors = load_checkpoint(emb_path)
    if "embeddings" not in tensors:
        raise DataError(f"{prefix}: index checkpoint lacks an 'embeddings' tensor")
    segments = load_segments(seg_path)
    return SegmentIndex.from_embeddings(segments, tensors["embeddings"].astype(np.float64))


def save_hits(path, hits: list[RankedHit]) -> None:
    """Retrieval list: ``rank TAB utt TAB keyword TAB score TAB start TAB end``."""
    with open(path, "w", encoding="utf-8") as fh:
        for rank, h in enumerate(hits, start=1):
            fh.write(
                f"{rank}\t{h.utterance_id}\t{h.keyword}\t{h.score!r}\t"
                f"{h.best_segment.start_frame}\t{h.best_segment.end_frame}\n"
            )


def load_hits(path) -> list[RankedHit]:
    hits = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise FormatError(f"{path}:{lineno}: expected 6 TAB-separated fields")
        _, utt, keyword, score, start, end = parts
        hits.append(RankedHit(utt, keyword, float(score), Segment(utt, int(start), int(end))))
    return hits

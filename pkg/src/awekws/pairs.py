"""Positive word-pair mining from aligned corpora.

A pair is an ordered (input, target) combination of two different instances
of the same word type.  Instances are pooled across all given corpora, the
full set of ordered pairs is enumerated combinatorially, and ``max_pairs``
of them are drawn uniformly at random without replacement.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .errors import DataError, FormatError
from .segmentation import Segment


@dataclass(frozen=True)
class WordPair:
    word_type: str
    input_corpus: int
    input_segment: Segment
    target_corpus: int
    target_segment: Segment

    def __post_init__(self):
        if (
            self.input_corpus == self.target_corpus
            and self.input_segment == self.target_segment
        ):
            raise DataError(f"pair for {self.word_type!r} uses the same instance twice")


def _instances_by_word(corpora: list[Corpus]) -> dict[str, list[tuple[int, Segment]]]:
    by_word: dict[str, list[tuple[int, Segment]]] = {}
    for corpus_idx, corpus in enumerate(corpora):
        for utt in sorted(corpus.alignments):
            for e in corpus.alignments[utt].entries:
                seg = Segment(utt, e.start_frame, e.end_frame)
                by_word.setdefault(e.word.lower(), []).append((corpus_idx, seg))
    return by_word


def _sample_without_replacement(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if k >= n:
        return rng.permutation(n)
    if n <= 4 * k or n <= 1_000_000:
        return rng.permutation(n)[:k]
    # Sparse regime: rejection sampling avoids materializing arange(n).
    chosen: set[int] = set()
    out = np.empty(k, dtype=np.int64)
    filled = 0
    while filled < k:
        for idx in rng.integers(0, n, size=k - filled):
            idx = int(idx)
            if idx not in chosen:
                chosen.add(idx)
                out[filled] = idx
                filled += 1
    return out


def mine_pairs(corpora: list[Corpus], max_pairs: int, seed: int = 0) -> list[WordPair]:
    """Sample up to max_pairs ordered same-word pairs, pooled across corpora."""
    if max_pairs < 1:
        raise DataError("max_pairs must be >= 1")
    by_word = _instances_by_word(corpora)
    words = sorted(w for w, inst in by_word.items() if len(inst) >= 2)
    if not words:
        raise DataError("no pairs available: no word type has at least two aligned instances")

    counts = np.array([len(by_word[w]) for w in words], dtype=np.int64)
    pair_counts = counts * (counts - 1)
    offsets = np.concatenate([[0], np.cumsum(pair_counts)])
    total = int(offsets[-1])

    rng = np.random.default_rng(seed)
    picked = _sample_without_replacement(total, min(max_pairs, total), rng)

    pairs = []
    for global_idx in picked:
        word_idx = int(np.searchsorted(offsets, global_idx, side="right")) - 1
        local = int(global_idx - offsets[word_idx])
        n = int(counts[word_idx])
        i = local // (n - 1)
        j = local % (n - 1)
        if j >= i:
            j += 1
        word = words[word_idx]
        in_corpus, in_seg = by_word[word][i]
        tgt_corpus, tgt_seg = by_word[word][j]
        pairs.append(WordPair(word, in_corpus, in_seg, tgt_corpus, tgt_seg))
    return pairs


def resolve_pair_frames(pair: WordPair, corpora: list[Corpus]) -> tuple[np.ndarray, np.ndarray]:
    """Look up the (input, target) frame matrices for one pair."""

    def frames_of(corpus_idx: int, seg: Segment) -> np.ndarray:
        if not (0 <= corpus_idx < len(corpora)):
            raise DataError(f"pair references corpus {corpus_idx}, only {len(corpora)} given")
        fs = corpora[corpus_idx].features.get(seg.utterance_id)
        if fs is None:
            raise DataError(f"pair references unknown utterance {seg.utterance_id!r}")
        if seg.end_frame > fs.num_frames:
            raise DataError(f"pair segment exceeds utterance {seg.utterance_id!r}")
        return fs.frames[seg.start_frame : seg.end_frame]

    return frames_of(pair.input_corpus, pair.input_segment), frames_of(
        pair.target_corpus, pair.target_segment
    )


def save_pairs(path, pairs: list[WordPair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(
                "\t".join(
                    [
                        p.word_type,
                        str(p.input_corpus),
                        p.input_segment.utterance_id,
                        str(p.input_segment.start_frame),
                        str(p.input_segment.end_frame),
                        str(p.target_corpus),
                        p.target_segment.utterance_id,
                        str(p.target_segment.start_frame),
                        str(p.target_segment.end_frame),
                    ]
                )
                + "\n"
            )


def load_pairs(path) -> list[WordPair]:
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 9:
            raise FormatError(f"{path}:{lineno}: expected 9 TAB-separated fields")
        try:
            pairs.append(
                WordPair(
                    parts[0],
                    int(parts[1]),
                    Segment(parts[2], int(parts[3]), int(parts[4])),
                    int(parts[5]),
                    Segment(parts[6], int(parts[7]), int(parts[8])),
                )
            )
        except ValueError:
            raise FormatError(f"{path}:{lineno}: malformed pair record") from None
    return pairs

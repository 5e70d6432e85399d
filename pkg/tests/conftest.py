import numpy as np
import pytest

from awekws.corpus import AlignmentEntry, Corpus, FrameSequence, TranscriptHypothesis, WordAlignment


def make_corpus(
    rng: np.random.Generator,
    n_utts: int,
    dim: int = 4,
    min_frames: int = 8,
    max_frames: int = 40,
    split: str = "test",
) -> Corpus:
    corpus = Corpus(split=split)
    for i in range(n_utts):
        utt = f"{split}-{i:03d}"
        n_frames = int(rng.integers(min_frames, max_frames + 1))
        frames = rng.standard_normal((n_frames, dim)).astype(np.float32)
        corpus.features[utt] = FrameSequence(utt, frames)
    return corpus


def add_word_instances(corpus: Corpus, words_per_utt: dict[str, list[tuple[str, int, int]]]):
    """Attach alignments/transcripts: utt -> [(word, start, end), ...]."""
    for utt, spans in words_per_utt.items():
        corpus.alignments[utt] = WordAlignment(
            utt, [AlignmentEntry(w, s, e) for w, s, e in spans]
        )
        corpus.transcripts[utt] = TranscriptHypothesis(utt, " ".join(w for w, _, _ in spans))
    corpus.validate()
    return corpus


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

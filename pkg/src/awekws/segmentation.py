"""Exhaustive sliding-window segmentation of search utterances.

Each utterance is split into overlapping windows: for every configured
window length L and every start p in {0, stride, 2*stride, ...} with
p + L <= T, the segment (p, p + L) is emitted.  An utterance shorter than
the smallest window still contributes one full-utterance segment, so nothing
silently drops out of the search collection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, FrameSequence
from .errors import DataError, FormatError

DEFAULT_MIN_LEN = 20
DEFAULT_MAX_LEN = 35
DEFAULT_LEN_STEP = 5
DEFAULT_STRIDE = 5


@dataclass(frozen=True, order=True)
class Segment:
    """Half-open frame window (start inclusive, end exclusive)."""

    utterance_id: str
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if not (0 <= self.start_frame < self.end_frame):
            raise DataError(
                f"segment {self.utterance_id!r}: bad span {self.start_frame}..{self.end_frame}"
            )

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame


@dataclass
class SegmentationConfig:
    window_lengths: list[int] = field(
        default_factory=lambda: list(
            range(DEFAULT_MIN_LEN, DEFAULT_MAX_LEN + 1, DEFAULT_LEN_STEP)
        )
    )
    start_stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        if not self.window_lengths:
            raise DataError("window_lengths must be non-empty")
        if any(length < 1 for length in self.window_lengths):
            raise DataError("window lengths must be >= 1")
        if self.start_stride < 1:
            raise DataError("start stride must be >= 1")
        self.window_lengths = sorted(set(self.window_lengths))

    @classmethod
    def from_range(cls, min_len: int, max_len: int, len_step: int, stride: int):
        if min_len > max_len:
            raise DataError(f"min_len {min_len} exceeds max_len {max_len}")
        if len_step < 1:
            raise DataError("len_step must be >= 1")
        return cls(list(range(min_len, max_len + 1, len_step)), stride)


def expected_segment_count(num_frames: int, cfg: SegmentationConfig) -> int:
    """Closed-form count: sum over L of max(0, floor((T-L)/stride) + 1)."""
    if num_frames < min(cfg.window_lengths):
        return 1
    total = 0
    for length in cfg.window_lengths:
        total += max(0, (num_frames - length) // cfg.start_stride + 1)
    return total


def segment_utterance(frames: FrameSequence, cfg: SegmentationConfig) -> list[Segment]:
    """Enumerate windows for one utterance, sorted by (start, length)."""
    num_frames = frames.num_frames
    utt = frames.utterance_id
    if num_frames < min(cfg.window_lengths):
        return [Segment(utt, 0, num_frames)]
    segments = []
    for length in cfg.window_lengths:
        for start in range(0, num_frames - length + 1, cfg.start_stride):
            segments.append(Segment(utt, start, start + length))
    segments.sort(key=lambda s: (s.start_frame, s.length))
    return segments


def segment_corpus(corpus: Corpus, cfg: SegmentationConfig) -> list[Segment]:
    """Concatenate per-utterance segment lists in lexicographic id order."""
    segments: list[Segment] = []
    for utt in corpus.utterance_ids():
        segments.extend(segment_utterance(corpus.features[utt], cfg))
    return segments


def segments_from_alignments(corpus: Corpus, words: set[str] | None = None) -> list[Segment]:
    """One segment per aligned word occurrence (true-boundary segmentation).

    ``words`` restricts output to the given lowercased word types.
    """
    segments = []
    for utt in corpus.utterance_ids():
        al = corpus.alignments.get(utt)
        if al is None:
            continue
        for e in al.entries:
            if words is not None and e.word.lower() not in words:
                continue
            segments.append(Segment(utt, e.start_frame, e.end_frame))
    return segments


def save_segments(path, segments: list[Segment]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in segments:
            fh.write(f"{s.utterance_id}\t{s.start_frame}\t{s.end_frame}\n")


def load_segments(path) -> list[Segment]:
    segments = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected `utt TAB start TAB end`")
        try:
            segments.append(Segment(parts[0], int(parts[1]), int(parts[2])))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: frame bounds must be integers") from None
    return segments

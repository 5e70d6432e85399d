"""Corpus data model and bit-exact file formats.

Binary feature file (extension ``.awef``), little-endian throughout:

    bytes 0..3    magic ``AWEF``
    bytes 4..7    format version, uint32 (currently 1)
    bytes 8..11   D, uint32 (feature dimension)
    bytes 12..15  T, uint32 (frame count)
    bytes 16..    T*D float32 values, row-major

Checkpoint file (extension ``.awec``), a flat container of named tensors:

    bytes 0..3    magic ``AWEC``
    bytes 4..7    format version, uint32 (currently 1)
    bytes 8..11   tensor count, uint32
    per tensor:   name length uint32, UTF-8 name, rank uint32,
                  one uint32 per dim, then float32 payload row-major

Text sidecar files are UTF-8, one record per line, single-TAB-separated:

    alignments:   ``utt_id TAB word TAB start_frame TAB end_frame``
    transcripts:  ``utt_id TAB text`` (text is space-separated tokens)
    keywords:     one keyword per line (``#`` starts a comment)

Save followed by load is bitwise idempotent for every format; non-finite
values are rejected at load time with the offending byte offset.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError

FEATURE_MAGIC = b"AWEF"
CHECKPOINT_MAGIC = b"AWEC"
FORMAT_VERSION = 1

# XLS-R-style frame rate; opaque metadata except for audio slicing in the
# moderation service.
DEFAULT_FRAME_SHIFT_MS = 20.0


@dataclass
class FrameSequence:
    """Per-utterance acoustic feature matrix, T frames by D dimensions."""

    utterance_id: str
    frames: np.ndarray
    frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS
    audio_path: Path | None = None

    def __post_init__(self):
        if self.frames.ndim != 2:
            raise DataError(
                f"utterance {self.utterance_id!r}: frames must be 2-D, got shape {self.frames.shape}"
            )
        if self.num_frames < 1 or self.dim < 1:
            raise DataError(
                f"utterance {self.utterance_id!r}: need T >= 1 and D >= 1, got T={self.num_frames} D={self.dim}"
            )
        if not np.isfinite(self.frames).all():
            raise DataError(f"utterance {self.utterance_id!r}: non-finite feature values")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class AlignmentEntry:
    word: str
    start_frame: int
    end_frame: int


@dataclass
class WordAlignment:
    """Word-level frame boundaries for one utterance (externally produced)."""

    utterance_id: str
    entries: list[AlignmentEntry]

    def validate(self, num_frames: int | None = None) -> None:
        prev_end = 0
        for e in self.entries:
            if not (0 <= e.start_frame < e.end_frame):
                raise DataError(
                    f"alignment {self.utterance_id!r}: bad span {e.start_frame}..{e.end_frame} for {e.word!r}"
                )
            if e.start_frame < prev_end:
                raise DataError(
                    f"alignment {self.utterance_id!r}: entries overlap or are unsorted at {e.word!r}"
                )
            prev_end = e.end_frame
        if num_frames is not None and self.entries and prev_end > num_frames:
            raise DataError(
                f"alignment {self.utterance_id!r}: end frame {prev_end} exceeds utterance length {num_frames}"
            )


@dataclass
class TranscriptHypothesis:
    utterance_id: str
    text: str

    def tokens(self) -> list[str]:
        return self.text.split()


@dataclass
class KeywordEntry:
    keyword: str
    min_char_length_ok: bool


@dataclass
class KeywordList:
    entries: list[KeywordEntry]
    language: str = ""

    def __post_init__(self):
        if not self.entries:
            raise DataError("keyword list is empty")
        lowered = [e.keyword.lower() for e in self.entries]
        if len(set(lowered)) != len(lowered):
            raise DataError("keywords are not unique after lowercasing")

    @property
    def keywords(self) -> list[str]:
        return [e.keyword for e in self.entries]


@dataclass
class Corpus:
    """Immutable bundle of one split's features plus optional sidecars."""

    split: str
    features: dict[str, FrameSequence] = field(default_factory=dict)
    alignments: dict[str, WordAlignment] = field(default_factory=dict)
    transcripts: dict[str, TranscriptHypothesis] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        first = next(iter(self.features.values()))
        return first.dim

    def utterance_ids(self) -> list[str]:
        return sorted(self.features)

    def validate(self) -> None:
        if not self.features:
            return
        dim = self.dim
        for fs in self.features.values():
            if fs.dim != dim:
                raise DataError(
                    f"corpus {self.split!r}: feature dim mismatch, {fs.utterance_id!r} has D={fs.dim}, expected {dim}"
                )
        for utt, al in self.alignments.items():
            if utt not in self.features:
                raise DataError(f"corpus {self.split!r}: alignment for unknown utterance {utt!r}")
            al.validate(self.features[utt].num_frames)
        for utt in self.transcripts:
            if utt not in self.features:
                raise DataError(f"corpus {self.split!r}: transcript for unknown utterance {utt!r}")


# ---------------------------------------------------------------------------
# Binary feature files


def save_feature_file(path: str | Path, frames: np.ndarray) -> None:
    """Write a T x D float32 matrix in the AWEF format (cast if needed)."""
    mat = np.ascontiguousarray(frames, dtype=np.float32)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise DataError(f"feature matrix must be 2-D with T,D >= 1, got shape {mat.shape}")
    if not np.isfinite(mat).all():
        raise DataError("refusing to write non-finite feature values")
    n_frames, dim = mat.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, dim, n_frames))
        fh.write(mat.tobytes(order="C"))


def load_feature_file(
    path: str | Path,
    utterance_id: str | None = None,
    expected_dim: int | None = None,
    frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS,
    audio_path: Path | None = None,
) -> FrameSequence:
    """Load an AWEF file; the utterance id defaults to the file stem."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 16:
        raise FormatError(f"{path}: truncated header, need 16 bytes, file has {len(data)}")
    if data[:4] != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r} at byte offset 0")
    version, dim, n_frames = struct.unpack_from("<III", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte offset 4")
    if dim < 1:
        raise FormatError(f"{path}: invalid D={dim} at byte offset 8")
    if n_frames < 1:
        raise FormatError(f"{path}: invalid T={n_frames} at byte offset 12")
    expected_bytes = n_frames * dim * 4
    if len(data) - 16 < expected_bytes:
        raise FormatError(
            f"{path}: truncated payload at byte offset {len(data)}, expected {expected_bytes} payload bytes, got {len(data) - 16}"
        )
    if len(data) - 16 > expected_bytes:
        raise FormatError(f"{path}: trailing data at byte offset {16 + expected_bytes}")
    mat = np.frombuffer(data, dtype="<f4", count=n_frames * dim, offset=16).reshape(n_frames, dim)
    finite = np.isfinite(mat)
    if not finite.all():
        flat = int(np.flatnonzero(~finite.ravel())[0])
        row, col = divmod(flat, dim)
        raise FormatError(
            f"{path}: non-finite value at byte offset {16 + 4 * flat} (row {row}, col {col})"
        )
    if expected_dim is not None and dim != expected_dim:
        raise DataError(f"{path}: feature dim {dim} does not match expected {expected_dim}")
    return FrameSequence(
        utterance_id=utterance_id if utterance_id is not None else path.stem,
        frames=mat.copy(),
        frame_shift_ms=frame_shift_ms,
        audio_path=audio_path,
    )


# ---------------------------------------------------------------------------
# Checkpoint files (named float32 tensors)


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    """Write named tensors as float32 in insertion order."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(tensors)))
        for name, tensor in tensors.items():
            arr = np.ascontiguousarray(tensor, dtype=np.float32)
            if not np.isfinite(arr).all():
                raise DataError(f"refusing to write non-finite tensor {name!r}")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.tobytes(order="C"))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    """Load named float32 tensors, preserving file order."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12:
        raise FormatError(f"{path}: truncated header, need 12 bytes, file has {len(data)}")
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r} at byte offset 0")
    version, count = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte offset 4")
    offset = 12
    tensors: dict[str, np.ndarray] = {}

    def need(nbytes: int, what: str):
        if offset + nbytes > len(data):
            raise FormatError(f"{path}: truncated {what} at byte offset {offset}")

    for _ in range(count):
        need(4, "tensor name length")
        (name_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        need(name_len, "tensor name")
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        need(4, "tensor rank")
        (rank,) = struct.unpack_from("<I", data, offset)
        offset += 4
        need(4 * rank, "tensor dims")
        dims = struct.unpack_from(f"<{rank}I", data, offset) if rank else ()
        offset += 4 * rank
        n_values = int(np.prod(dims)) if rank else 1
        need(4 * n_values, f"payload of tensor {name!r}")
        arr = np.frombuffer(data, dtype="<f4", count=n_values, offset=offset).reshape(dims)
        if not np.isfinite(arr).all():
            flat = int(np.flatnonzero(~np.isfinite(arr).ravel())[0])
            raise FormatError(
                f"{path}: non-finite value in tensor {name!r} at byte offset {offset + 4 * flat}"
            )
        offset += 4 * n_values
        if name in tensors:
            raise FormatError(f"{path}: duplicate tensor name {name!r}")
        tensors[name] = arr.copy()
    if offset != len(data):
        raise FormatError(f"{path}: trailing data at byte offset {offset}")
    return tensors


# ---------------------------------------------------------------------------
# TAB-separated sidecar files


def load_alignments(path: str | Path) -> dict[str, WordAlignment]:
    path = Path(path)
    grouped: dict[str, list[AlignmentEntry]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise FormatError(f"{path}:{lineno}: expected 4 TAB-separated fields, got {len(parts)}")
        utt, word, start_s, end_s = parts
        try:
            start, end = int(start_s), int(end_s)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: frame bounds must be integers") from None
        grouped.setdefault(utt, []).append(AlignmentEntry(word, start, end))
    alignments = {}
    for utt, entries in grouped.items():
        al = WordAlignment(utt, entries)
        al.validate()
        alignments[utt] = al
    return alignments


def save_alignments(path: str | Path, alignments: dict[str, WordAlignment]) -> None:
    lines = []
    for utt in sorted(alignments):
        for e in alignments[utt].entries:
            lines.append(f"{utt}\t{e.word}\t{e.start_frame}\t{e.end_frame}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_transcripts(path: str | Path) -> dict[str, TranscriptHypothesis]:
    path = Path(path)
    transcripts: dict[str, TranscriptHypothesis] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t", 1)
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected `utt_id TAB text`")
        utt, text = parts
        if utt in transcripts:
            raise FormatError(f"{path}:{lineno}: duplicate transcript for {utt!r}")
        transcripts[utt] = TranscriptHypothesis(utt, text)
    return transcripts


def save_transcripts(path: str | Path, transcripts: dict[str, TranscriptHypothesis]) -> None:
    lines = [f"{utt}\t{transcripts[utt].text}" for utt in sorted(transcripts)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_keyword_file(path: str | Path) -> list[str]:
    words = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip()
        if word and not word.startswith("#"):
            words.append(word)
    return words


def save_keyword_file(path: str | Path, keywords: list[str]) -> None:
    Path(path).write_text("\n".join(keywords) + "\n", encoding="utf-8")


def count_words(transcripts: dict[str, TranscriptHypothesis]) -> dict[str, int]:
    """Token occurrence counts over a split's transcripts (lowercased)."""
    counts: dict[str, int] = {}
    for hyp in transcripts.values():
        for tok in hyp.text.lower().split():
            counts[tok] = counts.get(tok, 0) + 1
    return counts


def load_keywords(
    path: str | Path,
    min_chars: int,
    min_occurrences: int,
    dev_counts: dict[str, int],
    test_counts: dict[str, int],
    language: str = "",
) -> KeywordList:
    """Filter candidate keywords by character length and per-split counts.

    A word survives iff len(word) >= min_chars and it occurs at least
    min_occurrences times in both the dev and test counts.  Output order is
    lexicographic.
    """
    candidates = read_keyword_file(path)
    kept = []
    seen = set()
    for word in candidates:
        lowered = word.lower()
        if lowered in seen:
            continue
        seen.add(lowered)
        if len(word) < min_chars:
            continue
        if dev_counts.get(lowered, 0) < min_occurrences:
            continue
        if test_counts.get(lowered, 0) < min_occurrences:
            continue
        kept.append(lowered)
    if not kept:
        raise DataError(
            f"no eligible keywords: none of the {len(candidates)} candidates meet "
            f"min_chars={min_chars} and min_occurrences={min_occurrences} in both splits"
        )
    kept.sort()
    return KeywordList([KeywordEntry(w, True) for w in kept], language=language)


def keyword_list_from_words(words: list[str], min_chars: int = 0, language: str = "") -> KeywordList:
    """Build an unfiltered keyword list, flagging each word's length rule."""
    seen = set()
    entries = []
    for word in words:
        lowered = word.lower()
        if lowered in seen:
            continue
        seen.add(lowered)
        entries.append(KeywordEntry(lowered, len(lowered) >= min_chars))
    return KeywordList(entries, language=language)


# ---------------------------------------------------------------------------
# Corpus assembly


def load_corpus(
    features_dir: str | Path,
    split: str,
    alignments_path: str | Path | None = None,
    transcripts_path: str | Path | None = None,
    expected_dim: int | None = None,
    frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS,
    audio_dir: str | Path | None = None,
) -> Corpus:
    """Load every ``*.awef`` under a directory into one corpus split.

    The resulting map is keyed by utterance id (file stem), so load order
    does not matter.
    """
    features_dir = Path(features_dir)
    files = sorted(features_dir.glob("*.awef"))
    if not files:
        raise DataError(f"no .awef feature files under {features_dir}")
    features: dict[str, FrameSequence] = {}
    for f in files:
        audio_path = None
        if audio_dir is not None:
            candidate = Path(audio_dir) / (f.stem + ".wav")
            if candidate.exists():
                audio_path = candidate
        fs = load_feature_file(
            f, expected_dim=expected_dim, frame_shift_ms=frame_shift_ms, audio_path=audio_path
        )
        if fs.utterance_id in features:
            raise DataError(f"duplicate utterance id {fs.utterance_id!r}")
        features[fs.utterance_id] = fs
    corpus = Corpus(split=split, features=features)
    if alignments_path is not None:
        corpus.alignments = load_alignments(alignments_path)
    if transcripts_path is not None:
        corpus.transcripts = load_transcripts(transcripts_path)
    corpus.validate()
    return corpus


def frames_for_span(corpus: Corpus, utterance_id: str, start: int, end: int) -> np.ndarray:
    """Slice one utterance's frames; bounds are validated."""
    fs = corpus.features.get(utterance_id)
    if fs is None:
        raise DataError(f"unknown utterance {utterance_id!r} in corpus {corpus.split!r}")
    if not (0 <= start < end <= fs.num_frames):
        raise DataError(
            f"span {start}..{end} out of bounds for utterance {utterance_id!r} (T={fs.num_frames})"
        )
    return fs.frames[start:end]


def seconds_for_frames(fs: FrameSequence, start: int, end: int) -> tuple[float, float]:
    """Frame span to a (start_s, end_s) time span via the frame shift."""
    shift_s = fs.frame_shift_ms / 1000.0
    return start * shift_s, end * shift_s

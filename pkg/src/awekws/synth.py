"""Seeded synthetic spoken-word corpus for desk-scale experiments.

Each vocabulary word is a fixed smooth random trajectory in feature space.
An instance of a word is that template resampled to a warped length
(within +/-20% by default) with Gaussian noise added; an utterance is the
concatenation of 2-6 instances with exact word boundaries recorded.  The
same seed always regenerates the same language, corpora, and bytes.

Optionally each utterance can be rendered to a small WAV file (one tone per
word) so the moderation UI has something to play.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    AlignmentEntry,
    Corpus,
    DEFAULT_FRAME_SHIFT_MS,
    FrameSequence,
    TranscriptHypothesis,
    WordAlignment,
    save_alignments,
    save_feature_file,
    save_transcripts,
)
from .errors import DataError

_CONSONANTS = "bdfghjklmnprstvwz"
_VOWELS = "aeiou"

_SPLIT_OFFSETS = {"train": 1, "dev": 2, "test": 3}


@dataclass
class SynthLanguage:
    words: list[str]
    templates: list[np.ndarray]
    feature_dim: int


def _make_word(rng: np.random.Generator, n_syllables: int) -> str:
    return "".join(
        _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
        for _ in range(n_syllables)
    )


def make_language(
    vocab_size: int,
    feature_dim: int,
    word_len_range: tuple[int, int] = (10, 16),
    seed: int = 0,
    control_points: int = 4,
) -> SynthLanguage:
    """Draw word strings and their smooth feature-space templates."""
    if vocab_size < 2:
        raise DataError("vocab_size must be >= 2")
    lo, hi = word_len_range
    if not (2 <= lo <= hi):
        raise DataError("word_len_range must satisfy 2 <= min <= max")
    rng = np.random.default_rng(seed)
    words: list[str] = []
    seen = set()
    while len(words) < vocab_size:
        word = _make_word(rng, int(rng.integers(2, 4)))
        if word not in seen:
            seen.add(word)
            words.append(word)
    templates = []
    for _ in range(vocab_size):
        length = int(rng.integers(lo, hi + 1))
        knots = rng.standard_normal((control_points, feature_dim))
        xs = np.linspace(0.0, 1.0, length)
        knot_xs = np.linspace(0.0, 1.0, control_points)
        template = np.empty((length, feature_dim))
        for d in range(feature_dim):
            template[:, d] = np.interp(xs, knot_xs, knots[:, d])
        templates.append(template)
    return SynthLanguage(words, templates, feature_dim)


def _warp_instance(
    rng: np.random.Generator, template: np.ndarray, warp: float, noise_sigma: float
) -> np.ndarray:
    length = template.shape[0]
    factor = 1.0 + rng.uniform(-warp, warp)
    new_len = max(2, int(round(length * factor)))
    xs = np.linspace(0.0, 1.0, new_len)
    orig_xs = np.linspace(0.0, 1.0, length)
    out = np.empty((new_len, template.shape[1]))
    for d in range(template.shape[1]):
        out[:, d] = np.interp(xs, orig_xs, template[:, d])
    if noise_sigma > 0:
        out = out + rng.normal(0.0, noise_sigma, size=out.shape)
    return out


def generate_synthetic_corpus(
    language: SynthLanguage,
    split: str,
    instances_per_word: int,
    noise_sigma: float = 0.1,
    warp: float = 0.2,
    words_per_utterance: tuple[int, int] = (2, 6),
    seed: int = 0,
    frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS,
) -> Corpus:
    """Sample one split: utterances, exact alignments, and transcripts."""
    if instances_per_word < 1:
        raise DataError("instances_per_word must be >= 1")
    lo, hi = words_per_utterance
    if not (1 <= lo <= hi):
        raise DataError("words_per_utterance must satisfy 1 <= min <= max")
    offset = _SPLIT_OFFSETS.get(split, 17)
    rng = np.random.default_rng((seed, offset))

    token_ids = np.repeat(np.arange(len(language.words)), instances_per_word)
    rng.shuffle(token_ids)

    corpus = Corpus(split=split)
    cursor = 0
    utt_index = 0
    while cursor < len(token_ids):
        take = int(rng.integers(lo, hi + 1))
        chunk = token_ids[cursor : cursor + take]
        cursor += take
        utt_id = f"{split}-{utt_index:04d}"
        utt_index += 1
        mats = []
        entries = []
        words = []
        frame = 0
        for word_idx in chunk:
            inst = _warp_instance(rng, language.templates[word_idx], warp, noise_sigma)
            mats.append(inst)
            word = language.words[word_idx]
            entries.append(AlignmentEntry(word, frame, frame + inst.shape[0]))
            words.append(word)
            frame += inst.shape[0]
        frames = np.concatenate(mats, axis=0).astype(np.float32)
        corpus.features[utt_id] = FrameSequence(utt_id, frames, frame_shift_ms=frame_shift_ms)
        corpus.alignments[utt_id] = WordAlignment(utt_id, entries)
        corpus.transcripts[utt_id] = TranscriptHypothesis(utt_id, " ".join(words))
    corpus.validate()
    return corpus


def write_corpus(corpus: Corpus, out_dir: str | Path) -> None:
    """Write features, alignments, and transcripts under ``out_dir``."""
    out_dir = Path(out_dir)
    feat_dir = out_dir / "features" / corpus.split
    feat_dir.mkdir(parents=True, exist_ok=True)
    for utt in corpus.utterance_ids():
        save_feature_file(feat_dir / f"{utt}.awef", corpus.features[utt].frames)
    save_alignments(out_dir / f"alignments_{corpus.split}.tsv", corpus.alignments)
    save_transcripts(out_dir / f"transcripts_{corpus.split}.tsv", corpus.transcripts)


def corrupt_transcripts(
    transcripts: dict[str, TranscriptHypothesis],
    vocab: list[str],
    error_rate: float,
    seed: int = 0,
) -> dict[str, TranscriptHypothesis]:
    """Simulated ASR hypotheses: seeded substitutions/deletions/insertions."""
    if not (0.0 <= error_rate < 1.0):
        raise DataError("error_rate must be in [0, 1)")
    rng = np.random.default_rng((seed, 101))
    out = {}
    for utt in sorted(transcripts):
        tokens = []
        for tok in transcripts[utt].text.split():
            roll = rng.random()
            if roll < error_rate:
                kind = rng.integers(3)
                if kind == 0:  # substitution
                    tokens.append(vocab[int(rng.integers(len(vocab)))])
                elif kind == 1:  # deletion
                    pass
                else:  # insertion
                    tokens.append(tok)
                    tokens.append(vocab[int(rng.integers(len(vocab)))])
            else:
                tokens.append(tok)
        if not tokens:
            tokens = [vocab[int(rng.integers(len(vocab)))]]
        out[utt] = TranscriptHypothesis(utt, " ".join(tokens))
    return out


def write_audio(
    corpus: Corpus,
    language: SynthLanguage,
    audio_dir: str | Path,
    sample_rate: int = 16000,
) -> None:
    """Render one tone per word instance so segments are audible."""
    audio_dir = Path(audio_dir)
    audio_dir.mkdir(parents=True, exist_ok=True)
    word_to_idx = {w: i for i, w in enumerate(language.words)}
    for utt in corpus.utterance_ids():
        fs = corpus.features[utt]
        samples_per_frame = int(round(sample_rate * fs.frame_shift_ms / 1000.0))
        total = fs.num_frames * samples_per_frame
        signal = np.zeros(total)
        for e in corpus.alignments[utt].entries:
            freq = 220.0 * 2.0 ** (word_to_idx[e.word] / 12.0)
            start = e.start_frame * samples_per_frame
            end = e.end_frame * samples_per_frame
            t = np.arange(end - start) / sample_rate
            tone = 0.4 * np.sin(2.0 * math.pi * freq * t)
            ramp = min(200, len(tone) // 4)
            if ramp > 0:
                envelope = np.ones(len(tone))
                envelope[:ramp] = np.linspace(0.0, 1.0, ramp)
                envelope[-ramp:] = np.linspace(1.0, 0.0, ramp)
                tone = tone * envelope
            signal[start:end] = tone
        pcm = np.clip(signal * 32767.0, -32768, 32767).astype("<i2")
        with wave.open(str(audio_dir / f"{utt}.wav"), "wb") as wav:
            wav.setnchannels(1)
            wav.setsampwidth(2)
            wav.setframerate(sample_rate)
            wav.writeframes(pcm.tobytes())

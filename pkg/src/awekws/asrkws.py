"""Keyword search over ASR transcript hypotheses, plus WER.

Transcripts are produced externally and ingested as TAB files; spotting a
keyword is a whole-token membership test over normalized tokens (a
substring rule is available behind a flag).  Word error rate is the
classic unit-cost edit distance divided by the reference length.
"""

from __future__ import annotations

import logging
import random
import string
from dataclasses import dataclass

import numpy as np

from . import kernels
from .corpus import KeywordList, TranscriptHypothesis
from .errors import DataError

logger = logging.getLogger("awekws.asrkws")

_PUNCT = string.punctuation + "‘’“”"


def normalize_token(token: str) -> str:
    """Lowercase and strip leading/trailing punctuation."""
    return token.lower().strip(_PUNCT)


def normalize_tokens(text: str) -> list[str]:
    """Whitespace-collapsed, normalized, non-empty tokens."""
    out = []
    for raw in text.split():
        tok = normalize_token(raw)
        if tok:
            out.append(tok)
    return out


@dataclass
class TranscriptPrediction:
    utterance_id: str
    predicted_tokens: list[str]

    @classmethod
    def from_hypothesis(cls, hyp: TranscriptHypothesis) -> "TranscriptPrediction":
        return cls(hyp.utterance_id, normalize_tokens(hyp.text))


def keyword_match(
    prediction: TranscriptPrediction, keywords: KeywordList, substring: bool = False
) -> set[str]:
    """Keywords spotted in one predicted transcript.

    Whole-token equality by default; ``substring=True`` matches a keyword
    occurring inside any token.
    """
    matched = set()
    tokens = prediction.predicted_tokens
    for entry in keywords.entries:
        kw = entry.keyword.lower()
        if substring:
            if any(kw in tok for tok in tokens):
                matched.add(entry.keyword)
        elif kw in tokens:
            matched.add(entry.keyword)
    return matched


def predicted_positive_utterances(
    predictions: list[TranscriptPrediction], keywords: KeywordList, substring: bool = False
) -> dict[str, set[str]]:
    """Map utterance id to its matched keywords, dropping empty matches."""
    out = {}
    for pred in predictions:
        matched = keyword_match(pred, keywords, substring=substring)
        if matched:
            out[pred.utterance_id] = matched
    return out


def sample_predicted_positives(
    predictions: list[TranscriptPrediction],
    keywords: KeywordList,
    k: int,
    seed: int = 0,
    substring: bool = False,
) -> list[str]:
    """Uniform sample (without replacement) of utterances with any match.

    Returns every positive when there are fewer than k; deterministic for a
    fixed seed.  Zero positives yields an empty list with a warning.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    positives = sorted(predicted_positive_utterances(predictions, keywords, substring=substring))
    if not positives:
        logger.warning("no utterances were predicted to contain a keyword")
        return []
    if len(positives) <= k:
        return positives
    return random.Random(seed).sample(positives, k)


def edit_distance(reference_tokens: list[str], hypothesis_tokens: list[str]) -> int:
    """Minimum substitutions + deletions + insertions between token lists."""
    vocab: dict[str, int] = {}
    for tok in reference_tokens + hypothesis_tokens:
        if tok not in vocab:
            vocab[tok] = len(vocab)
    ref_ids = np.array([vocab[t] for t in reference_tokens], dtype=np.int32)
    hyp_ids = np.array([vocab[t] for t in hypothesis_tokens], dtype=np.int32)
    return int(kernels.levenshtein(ref_ids, hyp_ids))


def word_error_rate(reference_tokens: list[str], hypothesis_tokens: list[str]) -> float:
    """(substitutions + deletions + insertions) / reference length."""
    if not reference_tokens:
        raise DataError("reference must be non-empty")
    return edit_distance(reference_tokens, hypothesis_tokens) / len(reference_tokens)


def corpus_word_error_rate(
    references: dict[str, TranscriptHypothesis], hypotheses: dict[str, TranscriptHypothesis]
) -> tuple[float, dict[str, float]]:
    """Aggregate WER (total edits over total reference tokens) plus per-utterance rates."""
    missing = sorted(set(references) - set(hypotheses))
    if missing:
        raise DataError(f"hypotheses missing for utterances {missing[:5]}")
    total_edits = 0
    total_ref = 0
    per_utt = {}
    for utt in sorted(references):
        ref = normalize_tokens(references[utt].text)
        hyp = normalize_tokens(hypotheses[utt].text)
        if not ref:
            raise DataError(f"reference transcript for {utt!r} is empty after normalization")
        edits = edit_distance(ref, hyp)
        per_utt[utt] = edits / len(ref)
        total_edits += edits
        total_ref += len(ref)
    return total_edits / total_ref, per_utt

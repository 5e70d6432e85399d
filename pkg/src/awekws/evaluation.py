"""Retrieval metrics, threshold tuning, and report generation.

Utterance-level labels: a (utterance, keyword) pair is positive iff the
keyword occurs as a whole token in the utterance's reference transcript.
Precision/recall/F1 are pooled over all keywords (micro) with per-keyword
and macro views alongside; P@k is the fraction of the k best-ranked
utterances that are labeled positive, and P@N sets k to the number of
positive utterances for that keyword.

Zero-denominator conventions (fixed so degenerate corpora yield
deterministic reports): with no predicted positives, precision is 1.0 when
there are also no true positives and 0.0 otherwise; recall mirrors this for
the no-true-positive case; F1 is 0 when P + R = 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .corpus import KeywordList, TranscriptHypothesis
from .asrkws import normalize_tokens
from .errors import DataError
from .search import RankedHit

REPORT_FORMAT_VERSION = 1

PairKey = tuple[str, str]  # (utterance_id, keyword)


@dataclass
class UtteranceLabel:
    utterance_id: str
    keyword: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError("label must be 0 or 1")


def labels_from_transcripts(
    transcripts: dict[str, TranscriptHypothesis], keywords: KeywordList
) -> dict[PairKey, int]:
    """Ground-truth labels for every (utterance, keyword) pair."""
    labels: dict[PairKey, int] = {}
    for utt in sorted(transcripts):
        tokens = set(normalize_tokens(transcripts[utt].text))
        for entry in keywords.entries:
            labels[(utt, entry.keyword)] = int(entry.keyword.lower() in tokens)
    return labels


# ---------------------------------------------------------------------------
# Precision / recall / F1


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def add(self, prediction: int, label: int) -> None:
        if prediction and label:
            self.tp += 1
        elif prediction and not label:
            self.fp += 1
        elif not prediction and label:
            self.fn += 1
        else:
            self.tn += 1


def prf_from_counts(c: Counts) -> tuple[float, float, float]:
    if c.tp + c.fp == 0:
        precision = 1.0 if c.tp + c.fn == 0 else 0.0
    else:
        precision = c.tp / (c.tp + c.fp)
    if c.tp + c.fn == 0:
        recall = 1.0 if c.tp + c.fp == 0 else 0.0
    else:
        recall = c.tp / (c.tp + c.fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def prf(
    predictions: dict[PairKey, int], labels: dict[PairKey, int]
) -> tuple[float, float, float]:
    """Pooled (micro) precision, recall, F1 over identical pair sets."""
    if set(predictions) != set(labels):
        only_p = sorted(set(predictions) - set(labels))[:3]
        only_l = sorted(set(labels) - set(predictions))[:3]
        raise DataError(
            f"predictions and labels cover different pairs (extra predictions {only_p}, missing {only_l})"
        )
    counts = Counts()
    for key, pred in predictions.items():
        counts.add(pred, labels[key])
    return prf_from_counts(counts)


# ---------------------------------------------------------------------------
# Ranked metrics


def precision_at_k(hits: list[RankedHit], labels: dict[str, int], k: int) -> float:
    """Fraction of the k top-ranked utterances with a positive label.

    ``hits`` must be rank-ordered (best first); ``labels`` maps utterance id
    to 0/1 for this hit list's keyword.  k beyond the list uses the whole
    list (the report generator notes this).
    """
    if k < 1:
        raise DataError("k must be >= 1")
    top = hits[: min(k, len(hits))]
    if not top:
        raise DataError("cannot compute precision@k on an empty hit list")
    correct = 0
    for h in top:
        if h.utterance_id not in labels:
            raise DataError(f"no label for utterance {h.utterance_id!r}")
        correct += labels[h.utterance_id]
    return correct / len(top)


def precision_at_n(hits: list[RankedHit], labels: dict[str, int]) -> float | None:
    """P@N with N = number of positive utterances; None when N = 0."""
    n_pos = sum(labels.values())
    if n_pos == 0:
        return None
    return precision_at_k(hits, labels, n_pos)


# ---------------------------------------------------------------------------
# Threshold tuning


def default_threshold_grid(scores: list[float]) -> list[float]:
    """Midpoints between consecutive distinct scores, plus both extremes."""
    if not scores:
        raise DataError("cannot build a threshold grid from no scores")
    distinct = sorted(set(scores))
    grid = [distinct[0]]
    for lo, hi in zip(distinct, distinct[1:]):
        grid.append((lo + hi) / 2.0)
    grid.append(distinct[-1] + 1.0)
    return grid


def pooled_f1_at_threshold(
    hits: list[RankedHit], labels: dict[PairKey, int], threshold: float
) -> float:
    counts = Counts()
    seen = set()
    for h in hits:
        key = (h.utterance_id, h.keyword)
        if key not in labels:
            raise DataError(f"no label for pair {key}")
        seen.add(key)
        counts.add(int(h.score < threshold), labels[key])
    for key, label in labels.items():
        if key not in seen:
            counts.add(0, label)
    return prf_from_counts(counts)[2]


def tune_threshold(
    hits: list[RankedHit], labels: dict[PairKey, int], grid: list[float] | None = None
) -> float:
    """Grid point maximizing pooled F1; ties resolve to the smallest threshold."""
    if grid is None:
        grid = default_threshold_grid([h.score for h in hits])
    if not grid:
        raise DataError("threshold grid is empty")
    best_t = None
    best_f1 = -1.0
    for t in sorted(grid):
        f1 = pooled_f1_at_threshold(hits, labels, t)
        if f1 > best_f1:
            best_f1 = f1
            best_t = t
    assert best_t is not None
    return best_t


# ---------------------------------------------------------------------------
# Moderation metrics


def moderation_precision(judgments: list) -> tuple[float, float]:
    """(keyword precision, music rate) over reviewed items.

    Each judgment needs boolean ``contains_keyword`` and ``contains_music``
    attributes.
    """
    if not judgments:
        raise DataError("no judgments reviewed")
    kw_yes = sum(1 for j in judgments if j.contains_keyword)
    music_yes = sum(1 for j in judgments if j.contains_music)
    return kw_yes / len(judgments), music_yes / len(judgments)


# ---------------------------------------------------------------------------
# Reports


@dataclass
class KeywordMetrics:
    keyword: str
    counts: Counts
    precision: float
    recall: float
    f1: float
    p_at_10: float
    p_at_n: float | None
    n_positive: int
    k_truncated: bool  # corpus smaller than 10, P@10 used the whole list


@dataclass
class EvalReport:
    threshold: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    mean_p_at_10: float
    mean_p_at_n: float | None
    counts: Counts
    per_keyword: list[KeywordMetrics] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"# awekws evaluation report v{REPORT_FORMAT_VERSION}",
            f"threshold: {self.threshold!r}",
            f"pooled counts: TP={self.counts.tp} FP={self.counts.fp} FN={self.counts.fn} TN={self.counts.tn}",
            f"micro: P={self.micro_precision:.4f} R={self.micro_recall:.4f} F1={self.micro_f1:.4f}",
            f"macro: P={self.macro_precision:.4f} R={self.macro_recall:.4f} F1={self.macro_f1:.4f}",
            "mean P@10: {:.4f}{}".format(
                self.mean_p_at_10,
                " (corpus smaller than 10 for some keywords; whole list used)"
                if any(m.k_truncated for m in self.per_keyword)
                else "",
            ),
            "mean P@N: " + (f"{self.mean_p_at_n:.4f}" if self.mean_p_at_n is not None else "n/a"),
            "",
            "keyword\tTP\tFP\tFN\tTN\tP\tR\tF1\tP@10\tP@N\tN",
        ]
        for m in self.per_keyword:
            p_at_n = f"{m.p_at_n:.4f}" if m.p_at_n is not None else "n/a"
            lines.append(
                f"{m.keyword}\t{m.counts.tp}\t{m.counts.fp}\t{m.counts.fn}\t{m.counts.tn}\t"
                f"{m.precision:.4f}\t{m.recall:.4f}\t{m.f1:.4f}\t{m.p_at_10:.4f}\t{p_at_n}\t{m.n_positive}"
            )
        return "\n".join(lines) + "\n"

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["format_version", REPORT_FORMAT_VERSION])
            writer.writerow(["threshold", repr(self.threshold)])
            writer.writerow(
                ["scope", "keyword", "tp", "fp", "fn", "tn", "precision", "recall", "f1", "p_at_10", "p_at_n", "n_positive"]
            )
            writer.writerow(
                [
                    "micro",
                    "",
                    self.counts.tp,
                    self.counts.fp,
                    self.counts.fn,
                    self.counts.tn,
                    repr(self.micro_precision),
                    repr(self.micro_recall),
                    repr(self.micro_f1),
                    repr(self.mean_p_at_10),
                    repr(self.mean_p_at_n) if self.mean_p_at_n is not None else "",
                    "",
                ]
            )
            writer.writerow(
                [
                    "macro",
                    "",
                    "",
                    "",
                    "",
                    "",
                    repr(self.macro_precision),
                    repr(self.macro_recall),
                    repr(self.macro_f1),
                    "",
                    "",
                    "",
                ]
            )
            for m in self.per_keyword:
                writer.writerow(
                    [
                        "keyword",
                        m.keyword,
                        m.counts.tp,
                        m.counts.fp,
                        m.counts.fn,
                        m.counts.tn,
                        repr(m.precision),
                        repr(m.recall),
                        repr(m.f1),
                        repr(m.p_at_10),
                        repr(m.p_at_n) if m.p_at_n is not None else "",
                        m.n_positive,
                    ]
                )


def evaluate_hits(
    hits_by_keyword: dict[str, list[RankedHit]],
    labels: dict[PairKey, int],
    threshold: float,
) -> EvalReport:
    """Classify ranked hits at a threshold and aggregate every metric."""
    pooled = Counts()
    per_keyword: list[KeywordMetrics] = []
    for keyword in sorted(hits_by_keyword):
        hits = hits_by_keyword[keyword]
        kw_labels: dict[str, int] = {}
        counts = Counts()
        seen = set()
        for h in hits:
            key = (h.utterance_id, keyword)
            if key not in labels:
                raise DataError(f"no label for pair {key}")
            kw_labels[h.utterance_id] = labels[key]
            seen.add(key)
            pred = int(h.score < threshold)
            counts.add(pred, labels[key])
            pooled.add(pred, labels[key])
        for (utt, kw), label in labels.items():
            if kw == keyword and (utt, kw) not in seen:
                counts.add(0, label)
                pooled.add(0, label)
        precision, recall, f1 = prf_from_counts(counts)
        per_keyword.append(
            KeywordMetrics(
                keyword=keyword,
                counts=counts,
                precision=precision,
                recall=recall,
                f1=f1,
                p_at_10=precision_at_k(hits, kw_labels, 10),
                p_at_n=precision_at_n(hits, kw_labels),
                n_positive=sum(kw_labels.values()),
                k_truncated=len(hits) < 10,
            )
        )
    micro_p, micro_r, micro_f1 = prf_from_counts(pooled)
    n_kw = len(per_keyword)
    macro_p = sum(m.precision for m in per_keyword) / n_kw
    macro_r = sum(m.recall for m in per_keyword) / n_kw
    macro_f1 = sum(m.f1 for m in per_keyword) / n_kw
    mean_p10 = sum(m.p_at_10 for m in per_keyword) / n_kw
    with_n = [m.p_at_n for m in per_keyword if m.p_at_n is not None]
    mean_pn = sum(with_n) / len(with_n) if with_n else None
    return EvalReport(
        threshold=threshold,
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=micro_f1,
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f1,
        mean_p_at_10=mean_p10,
        mean_p_at_n=mean_pn,
        counts=pooled,
        per_keyword=per_keyword,
    )

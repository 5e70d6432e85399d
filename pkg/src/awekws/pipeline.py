"""Pipeline configuration and stage orchestration.

A pipeline lives in one working directory.  Each stage reads only declared
inputs and writes only declared outputs, so re-running a stage with the
same inputs and seeds reproduces its artifacts byte for byte:

    synth     -> features/{split}/*.awef, alignments_*.tsv, transcripts_*.tsv,
                 hyp_test.tsv, keywords.txt, audio/*.wav (optional)
    segment   -> segments_test.tsv, segments_dev.tsv
    mine      -> pairs.tsv
    train     -> model.awec, losses.csv
    index     -> index_test.*, index_dev.*
    search    -> hits_test.tsv, hits_dev.tsv, top_any.tsv
    evaluate  -> report.txt, report.csv
    asr-kws   -> asr_matches.tsv, asr_sample.tsv

The config file is plain ``key = value`` lines (``#`` comments); unknown
keys are rejected.  Defaults: window lengths 20-35 step 5, stride 5, ten
templates per keyword, top-100 review lists, Adam at learning rate 0.001,
hidden size 400, embedding size 100.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import search as search_ops
from .corpus import (
    count_words,
    load_corpus,
    load_keywords,
    load_transcripts,
    save_keyword_file,
    save_transcripts,
)
from .errors import DataError
from .evaluation import evaluate_hits, labels_from_transcripts, tune_threshold
from .model import AweModel, ModelConfig
from .pairs import load_pairs, mine_pairs, save_pairs
from .asrkws import (
    TranscriptPrediction,
    predicted_positive_utterances,
    sample_predicted_positives,
)
from .segmentation import SegmentationConfig, load_segments, save_segments, segment_corpus
from .synth import (
    corrupt_transcripts,
    generate_synthetic_corpus,
    make_language,
    write_audio,
    write_corpus,
)
from .training import TrainConfig, save_loss_curve, train

STAGES = ("synth", "segment", "mine", "train", "index", "search", "evaluate", "asr-kws")


@dataclass
class PipelineConfig:
    workdir: str = "pipeline"
    seed: int = 0
    # synthetic corpus
    vocab_size: int = 12
    instances_per_word: int = 30
    feature_dim: int = 12
    word_len_min: int = 10
    word_len_max: int = 16
    noise_sigma: float = 0.1
    warp: float = 0.2
    asr_error_rate: float = 0.25
    with_audio: bool = False
    frame_shift_ms: float = 20.0
    # segmentation windows
    min_len: int = 20
    max_len: int = 35
    len_step: int = 5
    stride: int = 5
    # model / training
    hidden_dim: int = 400
    embed_dim: int = 100
    num_layers: int = 3
    cell: str = "gated"
    learning_rate: float = 0.001
    batch_size: int = 32
    epochs: int = 10
    max_pairs: int = 300_000
    grad_clip_norm: float = 0.0  # 0 disables clipping
    normalize_features: bool = False
    # keywords / search
    min_chars: int = 5
    min_occurrences: int = 10
    templates_per_keyword: int = 10
    top_k: int = 100
    threshold: float = float("nan")  # NaN means "tune"
    tune_on_test: bool = False

    def segmentation(self) -> SegmentationConfig:
        return SegmentationConfig.from_range(self.min_len, self.max_len, self.len_step, self.stride)

    def training(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            grad_clip_norm=self.grad_clip_norm if self.grad_clip_norm > 0 else None,
            normalize_features=self.normalize_features,
        )

    @property
    def root(self) -> Path:
        return Path(self.workdir)


def _parse_value(raw: str, kind):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise DataError(f"expected a boolean, got {raw!r}")
    return kind(raw)


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    """Parse a ``key = value`` config file into a PipelineConfig."""
    known = {f.name: f.type for f in fields(PipelineConfig)}
    kinds = {f.name: type(getattr(PipelineConfig(), f.name)) for f in fields(PipelineConfig)}
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise DataError(f"{path}:{lineno}: expected `key = value`")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise DataError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _parse_value(raw, kinds[key])
        except (ValueError, DataError) as exc:
            raise DataError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    if overrides:
        values.update(overrides)
    return PipelineConfig(**values)


def save_config(path: str | Path, cfg: PipelineConfig) -> None:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(cfg)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Stage plumbing


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise DataError(f"missing input {path}; run stage {producer!r} first")
    return path


class Pipeline:
    """Executes stages inside one working directory."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.root = cfg.root

    # paths -------------------------------------------------------------

    def features_dir(self, split: str) -> Path:
        return self.root / "features" / split

    def alignments_path(self, split: str) -> Path:
        return self.root / f"alignments_{split}.tsv"

    def transcripts_path(self, split: str) -> Path:
        return self.root / f"transcripts_{split}.tsv"

    def _corpus(self, split: str, need_alignments=False, need_transcripts=False):
        feats = _require(self.features_dir(split), "synth")
        align = self.alignments_path(split)
        trans = self.transcripts_path(split)
        return load_corpus(
            feats,
            split,
            alignments_path=_require(align, "synth") if need_alignments else (align if align.exists() else None),
            transcripts_path=_require(trans, "synth") if need_transcripts else (trans if trans.exists() else None),
            expected_dim=self.cfg.feature_dim,
            frame_shift_ms=self.cfg.frame_shift_ms,
        )

    # stages --------------------------------------------------------------

    def run(self, stage: str) -> list[Path]:
        runner = {
            "synth": self.stage_synth,
            "segment": self.stage_segment,
            "mine": self.stage_mine,
            "train": self.stage_train,
            "index": self.stage_index,
            "search": self.stage_search,
            "evaluate": self.stage_evaluate,
            "asr-kws": self.stage_asr_kws,
        }.get(stage)
        if runner is None:
            raise DataError(f"unknown stage {stage!r}; valid stages: {', '.join(STAGES)}")
        return runner()

    def run_all(self) -> list[Path]:
        out = []
        for stage in STAGES:
            out.extend(self.run(stage))
        return out

    def stage_synth(self) -> list[Path]:
        cfg = self.cfg
        self.root.mkdir(parents=True, exist_ok=True)
        language = make_language(
            cfg.vocab_size,
            cfg.feature_dim,
            (cfg.word_len_min, cfg.word_len_max),
            seed=cfg.seed,
        )
        outputs = []
        for split in ("train", "dev", "test"):
            corpus = generate_synthetic_corpus(
                language,
                split,
                cfg.instances_per_word,
                noise_sigma=cfg.noise_sigma,
                warp=cfg.warp,
                seed=cfg.seed,
                frame_shift_ms=cfg.frame_shift_ms,
            )
            write_corpus(corpus, self.root)
            outputs.extend(
                [self.features_dir(split), self.alignments_path(split), self.transcripts_path(split)]
            )
            if split == "test":
                hyp = corrupt_transcripts(
                    corpus.transcripts, language.words, cfg.asr_error_rate, seed=cfg.seed
                )
                save_transcripts(self.root / "hyp_test.tsv", hyp)
                outputs.append(self.root / "hyp_test.tsv")
            if cfg.with_audio:
                write_audio(corpus, language, self.root / "audio")
        save_keyword_file(self.root / "keywords.txt", language.words)
        outputs.append(self.root / "keywords.txt")
        return outputs

    def stage_segment(self) -> list[Path]:
        seg_cfg = self.cfg.segmentation()
        outputs = []
        for split in ("test", "dev"):
            corpus = self._corpus(split)
            segments = segment_corpus(corpus, seg_cfg)
            out = self.root / f"segments_{split}.tsv"
            save_segments(out, segments)
            outputs.append(out)
        return outputs

    def stage_mine(self) -> list[Path]:
        corpus = self._corpus("train", need_alignments=True)
        pairs = mine_pairs([corpus], max_pairs=self.cfg.max_pairs, seed=self.cfg.seed)
        out = self.root / "pairs.tsv"
        save_pairs(out, pairs)
        return [out]

    def stage_train(self) -> list[Path]:
        cfg = self.cfg
        pairs = load_pairs(_require(self.root / "pairs.tsv", "mine"))
        corpus = self._corpus("train", need_alignments=True)
        model = AweModel.init(
            ModelConfig(
                input_dim=cfg.feature_dim,
                hidden_dim=cfg.hidden_dim,
                embed_dim=cfg.embed_dim,
                num_layers=cfg.num_layers,
                cell=cfg.cell,
            ),
            seed=cfg.seed,
        )
        trained, curve = train(model, pairs, cfg.training(), [corpus])
        model_path = self.root / "model.awec"
        trained.save(model_path)
        curve_path = self.root / "losses.csv"
        save_loss_curve(curve_path, curve)
        return [model_path, curve_path]

    def stage_index(self) -> list[Path]:
        model = AweModel.load(_require(self.root / "model.awec", "train"))
        outputs = []
        for split in ("test", "dev"):
            corpus = self._corpus(split)
            segments = load_segments(_require(self.root / f"segments_{split}.tsv", "segment"))
            index = search_ops.build_index(model, corpus, self.cfg.segmentation(), segments=segments)
            prefix = self.root / f"index_{split}"
            search_ops.save_index(prefix, index)
            outputs.extend(search_ops.index_paths(prefix))
        return outputs

    def _keywords(self):
        path = _require(self.root / "keywords.txt", "synth")
        dev_counts = count_words(load_transcripts(_require(self.transcripts_path("dev"), "synth")))
        test_counts = count_words(load_transcripts(_require(self.transcripts_path("test"), "synth")))
        return load_keywords(
            path,
            min_chars=self.cfg.min_chars,
            min_occurrences=self.cfg.min_occurrences,
            dev_counts=dev_counts,
            test_counts=test_counts,
        )

    def stage_search(self) -> list[Path]:
        cfg = self.cfg
        model = AweModel.load(_require(self.root / "model.awec", "train"))
        keywords = self._keywords()
        dev_corpus = self._corpus("dev", need_alignments=True)
        queries = search_ops.build_queries(
            model,
            dev_corpus,
            keywords.keywords,
            templates_per_keyword=cfg.templates_per_keyword,
            seed=cfg.seed,
        )
        outputs = []
        for split in ("test", "dev"):
            prefix = self.root / f"index_{split}"
            _require(search_ops.index_paths(prefix)[0], "index")
            index = search_ops.load_index(prefix)
            all_hits = []
            for query in queries:
                all_hits.extend(search_ops.score_utterances(index, query))
            out = self.root / f"hits_{split}.tsv"
            search_ops.save_hits(out, all_hits)
            outputs.append(out)
            if split == "test":
                top = search_ops.top_k_any_keyword(index, queries, cfg.top_k)
                top_out = self.root / "top_any.tsv"
                search_ops.save_hits(top_out, top)
                outputs.append(top_out)
        return outputs

    def stage_evaluate(self) -> list[Path]:
        cfg = self.cfg
        keywords = self._keywords()
        test_hits = search_ops.load_hits(_require(self.root / "hits_test.tsv", "search"))
        test_labels = labels_from_transcripts(
            load_transcripts(_require(self.transcripts_path("test"), "synth")), keywords
        )
        threshold = cfg.threshold
        if np.isnan(threshold):
            if cfg.tune_on_test:
                threshold = tune_threshold(test_hits, test_labels)
            else:
                dev_hits = search_ops.load_hits(_require(self.root / "hits_dev.tsv", "search"))
                dev_labels = labels_from_transcripts(
                    load_transcripts(_require(self.transcripts_path("dev"), "synth")), keywords
                )
                threshold = tune_threshold(dev_hits, dev_labels)
        by_keyword: dict[str, list] = {}
        for h in test_hits:
            by_keyword.setdefault(h.keyword, []).append(h)
        report = evaluate_hits(by_keyword, test_labels, threshold)
        txt = self.root / "report.txt"
        txt.write_text(report.to_text(), encoding="utf-8")
        csv_path = self.root / "report.csv"
        report.save_csv(csv_path)
        return [txt, csv_path]

    def stage_asr_kws(self) -> list[Path]:
        cfg = self.cfg
        keywords = self._keywords()
        hyp = load_transcripts(_require(self.root / "hyp_test.tsv", "synth"))
        predictions = [TranscriptPrediction.from_hypothesis(h) for h in hyp.values()]
        matches = predicted_positive_utterances(predictions, keywords)
        match_path = self.root / "asr_matches.tsv"
        with open(match_path, "w", encoding="utf-8") as fh:
            for utt in sorted(matches):
                fh.write(f"{utt}\t{' '.join(sorted(matches[utt]))}\n")
        sample = sample_predicted_positives(predictions, keywords, k=cfg.top_k, seed=cfg.seed)
        sample_path = self.root / "asr_sample.tsv"
        sample_path.write_text("".join(f"{utt}\n" for utt in sample), encoding="utf-8")
        return [match_path, sample_path]

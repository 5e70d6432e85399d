"""Command-line entry point.

One binary with subcommands covering the whole pipeline; run
``awekws <command> --help`` for flags.  Exit codes: 0 ok, 1 usage error,
2 data/format error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import search as search_ops
from .asrkws import (
    TranscriptPrediction,
    corpus_word_error_rate,
    predicted_positive_utterances,
    sample_predicted_positives,
)
from .corpus import (
    keyword_list_from_words,
    load_corpus,
    load_transcripts,
    read_keyword_file,
)
from .errors import DataError, FormatError, NumericalError
from .evaluation import evaluate_hits, labels_from_transcripts, tune_threshold
from .model import AweModel, ModelConfig
from .pairs import load_pairs, mine_pairs, save_pairs
from .pipeline import Pipeline, PipelineConfig, STAGES, load_config
from .segmentation import (
    SegmentationConfig,
    load_segments,
    save_segments,
    segment_corpus,
    segments_from_alignments,
)
from .training import TrainConfig, save_loss_curve, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_segmentation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-len", type=int, default=20, help="smallest window length (frames)")
    p.add_argument("--max-len", type=int, default=35, help="largest window length (frames)")
    p.add_argument("--len-step", type=int, default=5, help="window length step (frames)")
    p.add_argument("--stride", type=int, default=5, help="window start stride (frames)")


def _segmentation_from_args(args) -> SegmentationConfig:
    return SegmentationConfig.from_range(args.min_len, args.max_len, args.len_step, args.stride)


def _load_corpora(args) -> list:
    feats = args.features or []
    aligns = args.alignments or []
    if len(feats) != len(aligns):
        raise DataError("--features and --alignments must be given the same number of times")
    return [
        load_corpus(f, split=f"corpus{i}", alignments_path=a, expected_dim=args.feature_dim)
        for i, (f, a) in enumerate(zip(feats, aligns))
    ]


def build_parser() -> _Parser:
    parser = _Parser(prog="awekws", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic desk-scale corpus")
    p.add_argument("--out", required=True, help="pipeline working directory")
    p.add_argument("--vocab-size", type=int, default=12)
    p.add_argument("--instances-per-word", type=int, default=30)
    p.add_argument("--feature-dim", type=int, default=12)
    p.add_argument("--noise-sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--with-audio", action="store_true", help="also render WAV files per utterance")

    p = sub.add_parser("segment", help="slide windows over a feature directory")
    p.add_argument("--features", required=True)
    p.add_argument("--feature-dim", type=int, default=None, help="validate the corpus feature dim")
    _add_segmentation_flags(p)
    p.add_argument("--out", required=True, help="segment dump (utt TAB start TAB end)")

    p = sub.add_parser("mine", help="mine positive word pairs from aligned corpora")
    p.add_argument("--features", action="append", required=True, help="repeatable, one per corpus")
    p.add_argument("--alignments", action="append", required=True, help="repeatable, one per corpus")
    p.add_argument("--feature-dim", type=int, default=None)
    p.add_argument("--max-pairs", type=int, default=300_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-awe", help="train the embedding model on mined pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--features", action="append", required=True)
    p.add_argument("--alignments", action="append", required=True)
    p.add_argument("--feature-dim", type=int, default=None)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=400)
    p.add_argument("--embed-dim", type=int, default=100)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--cell", choices=("gated", "vanilla"), default="gated")
    p.add_argument("--clip-norm", type=float, default=0.0, help="0 disables gradient clipping")
    p.add_argument("--normalize", action="store_true", help="per-dimension feature normalization")
    p.add_argument("--out", required=True, help="model checkpoint path (.awec)")
    p.add_argument("--loss-curve", default=None, help="CSV `epoch,mean_loss`")

    p = sub.add_parser("index", help="embed segments of a search corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--feature-dim", type=int, default=None)
    p.add_argument("--segments", default=None, help="precomputed segment dump")
    p.add_argument(
        "--true-boundaries",
        default=None,
        metavar="ALIGNMENTS",
        help="segment at aligned word boundaries instead of sliding windows",
    )
    _add_segmentation_flags(p)
    p.add_argument("--out", required=True, help="index prefix (writes .emb.awec and .segments.tsv)")

    p = sub.add_parser("search", help="rank utterances per keyword against an index")
    p.add_argument("--index", required=True, help="index prefix")
    p.add_argument("--model", required=True)
    p.add_argument("--keywords", required=True)
    p.add_argument("--template-features", required=True, help="corpus the templates come from")
    p.add_argument("--template-alignments", required=True)
    p.add_argument("--templates", type=int, default=10, help="templates per keyword")
    p.add_argument("--top-k", type=int, default=100)
    p.add_argument("--threshold", type=float, default=None, help="optional positive-match cutoff")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="per-keyword ranked hits")
    p.add_argument("--top-any-out", default=None, help="top-k over any keyword")

    p = sub.add_parser("evaluate", help="score ranked hits against reference transcripts")
    p.add_argument("--hits", required=True)
    p.add_argument("--transcripts", required=True, help="reference transcripts for labels")
    p.add_argument("--keywords", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--tune-hits", default=None, help="hits to tune the threshold on")
    p.add_argument("--tune-transcripts", default=None)
    p.add_argument("--out", required=True, help="report prefix (writes .txt and .csv)")

    p = sub.add_parser("asr-kws", help="keyword match over ASR transcript hypotheses")
    p.add_argument("--hyp", required=True)
    p.add_argument("--keywords", required=True)
    p.add_argument("--substring", action="store_true", help="substring instead of whole-token match")
    p.add_argument("--sample-k", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="matches per utterance")
    p.add_argument("--sample-out", default=None, help="sampled utterance ids for review")

    p = sub.add_parser("wer", help="word error rate between two transcript files")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--per-utt", action="store_true", help="also print per-utterance rates")

    p = sub.add_parser("serve", help="run the moderation review service")
    p.add_argument("--store", required=True, help="session store directory")
    p.add_argument("--audio-dir", default=None)
    p.add_argument("--frame-shift-ms", type=float, default=20.0)
    p.add_argument("--margin-s", type=float, default=1.0, help="audio context margin per side")
    p.add_argument("--ui-dir", default=None, help="static review UI to mount at /ui")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--awe-session", default=None, help="create a session from a retrieval list")
    p.add_argument("--asr-session", default=None, help="create a session from sampled matches")
    p.add_argument("--session-k", type=int, default=100)

    p = sub.add_parser("run", help="run pipeline stages from a config file")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument(
        "--stage",
        default="all",
        help=f"one of {', '.join(STAGES)}, 'serve' (blocking), or 'all'",
    )
    p.add_argument("--workdir", default=None, help="override the config's working directory")

    return parser


# ---------------------------------------------------------------------------
# Command implementations


def _cmd_synth(args) -> int:
    cfg = PipelineConfig(
        workdir=args.out,
        seed=args.seed,
        vocab_size=args.vocab_size,
        instances_per_word=args.instances_per_word,
        feature_dim=args.feature_dim,
        noise_sigma=args.noise_sigma,
        with_audio=args.with_audio,
    )
    outputs = Pipeline(cfg).stage_synth()
    print(f"wrote {len(outputs)} artifacts under {args.out}")
    return 0


def _cmd_segment(args) -> int:
    corpus = load_corpus(args.features, "search", expected_dim=args.feature_dim)
    segments = segment_corpus(corpus, _segmentation_from_args(args))
    save_segments(args.out, segments)
    print(f"{len(segments)} segments over {len(corpus.features)} utterances -> {args.out}")
    return 0


def _cmd_mine(args) -> int:
    corpora = _load_corpora(args)
    pairs = mine_pairs(corpora, max_pairs=args.max_pairs, seed=args.seed)
    save_pairs(args.out, pairs)
    print(f"{len(pairs)} pairs -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    corpora = _load_corpora(args)
    pairs = load_pairs(args.pairs)
    model = AweModel.init(
        ModelConfig(
            input_dim=corpora[0].dim,
            hidden_dim=args.hidden,
            embed_dim=args.embed_dim,
            num_layers=args.layers,
            cell=args.cell,
        ),
        seed=args.seed,
    )
    cfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        grad_clip_norm=args.clip_norm if args.clip_norm > 0 else None,
        normalize_features=args.normalize,
    )
    trained, curve = train(model, pairs, cfg, corpora)
    trained.save(args.out)
    if args.loss_curve:
        save_loss_curve(args.loss_curve, curve)
    final = f"{curve[-1]:.6f}" if curve else "n/a"
    print(f"trained {args.epochs} epochs on {len(pairs)} pairs, final mean loss {final} -> {args.out}")
    return 0


def _cmd_index(args) -> int:
    model = AweModel.load(args.model)
    corpus = load_corpus(args.features, "search", expected_dim=args.feature_dim)
    segments = None
    if args.segments and args.true_boundaries:
        raise DataError("--segments and --true-boundaries are mutually exclusive")
    if args.segments:
        segments = load_segments(args.segments)
    elif args.true_boundaries:
        from .corpus import load_alignments

        corpus.alignments = load_alignments(args.true_boundaries)
        corpus.validate()
        segments = segments_from_alignments(corpus)
    index = search_ops.build_index(model, corpus, _segmentation_from_args(args), segments=segments)
    search_ops.save_index(args.out, index)
    print(f"indexed {index.num_segments} segments ({index.embed_dim} dims) -> {args.out}.*")
    return 0


def _cmd_search(args) -> int:
    model = AweModel.load(args.model)
    index = search_ops.load_index(args.index)
    keywords = keyword_list_from_words(read_keyword_file(args.keywords))
    template_corpus = load_corpus(
        args.template_features, "templates", alignments_path=args.template_alignments
    )
    queries = search_ops.build_queries(
        model, template_corpus, keywords.keywords, args.templates, seed=args.seed
    )
    all_hits = []
    for query in queries:
        hits = search_ops.score_utterances(index, query)
        if args.threshold is not None:
            positives = sum(search_ops.classify(hits, args.threshold).values())
            print(f"{query.keyword}: {positives} predicted positives at threshold {args.threshold}")
        all_hits.extend(hits)
    search_ops.save_hits(args.out, all_hits)
    print(f"{len(all_hits)} hits for {len(queries)} keywords -> {args.out}")
    if args.top_any_out:
        top = search_ops.top_k_any_keyword(index, queries, args.top_k)
        search_ops.save_hits(args.top_any_out, top)
        print(f"top-{len(top)} any-keyword list -> {args.top_any_out}")
    return 0


def _cmd_evaluate(args) -> int:
    keywords = keyword_list_from_words(read_keyword_file(args.keywords))
    hits = search_ops.load_hits(args.hits)
    labels = labels_from_transcripts(load_transcripts(args.transcripts), keywords)
    if args.threshold is not None:
        threshold = args.threshold
    elif args.tune_hits and args.tune_transcripts:
        tune_labels = labels_from_transcripts(load_transcripts(args.tune_transcripts), keywords)
        threshold = tune_threshold(search_ops.load_hits(args.tune_hits), tune_labels)
    else:
        raise DataError("give either --threshold or both --tune-hits and --tune-transcripts")
    by_keyword: dict[str, list] = {}
    for h in hits:
        by_keyword.setdefault(h.keyword, []).append(h)
    report = evaluate_hits(by_keyword, labels, threshold)
    out = Path(args.out)
    Path(f"{out}.txt").write_text(report.to_text(), encoding="utf-8")
    report.save_csv(Path(f"{out}.csv"))
    print(
        f"threshold {threshold:.6f}: micro P={report.micro_precision:.3f} "
        f"R={report.micro_recall:.3f} F1={report.micro_f1:.3f} -> {out}.txt/.csv"
    )
    return 0


def _cmd_asr_kws(args) -> int:
    keywords = keyword_list_from_words(read_keyword_file(args.keywords))
    hyp = load_transcripts(args.hyp)
    predictions = [TranscriptPrediction.from_hypothesis(h) for h in hyp.values()]
    matches = predicted_positive_utterances(predictions, keywords, substring=args.substring)
    print(f"{len(matches)} of {len(predictions)} utterances predicted to contain a keyword")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for utt in sorted(matches):
                fh.write(f"{utt}\t{' '.join(sorted(matches[utt]))}\n")
    sample = sample_predicted_positives(
        predictions, keywords, k=args.sample_k, seed=args.seed, substring=args.substring
    )
    if args.sample_out:
        Path(args.sample_out).write_text("".join(f"{u}\n" for u in sample), encoding="utf-8")
        print(f"sampled {len(sample)} for review -> {args.sample_out}")
    return 0


def _cmd_wer(args) -> int:
    refs = load_transcripts(args.ref)
    hyps = load_transcripts(args.hyp)
    aggregate, per_utt = corpus_word_error_rate(refs, hyps)
    if args.per_utt:
        for utt in sorted(per_utt):
            print(f"{utt}\t{per_utt[utt]:.4f}")
    print(f"WER {aggregate:.4f} over {len(per_utt)} utterances")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import AudioLibrary, SessionStore, candidates_from_hits, create_app

    store = SessionStore(args.store)
    if args.awe_session:
        hits = search_ops.load_hits(args.awe_session)
        session = store.create_session("awe", candidates_from_hits(hits), k=args.session_k)
        print(f"created session {session.session_id} with {len(session.candidates)} candidates")
    if args.asr_session:
        from .service import Candidate

        candidates = []
        for i, line in enumerate(Path(args.asr_session).read_text(encoding="utf-8").splitlines()):
            parts = line.split("\t")
            keyword = parts[1].split()[0] if len(parts) > 1 and parts[1] else ""
            candidates.append(Candidate(i + 1, parts[0], keyword, 0.0, 0, 0))
        session = store.create_session("asr", candidates, k=args.session_k)
        print(f"created session {session.session_id} with {len(session.candidates)} candidates")
    audio = None
    if args.audio_dir:
        audio = AudioLibrary(args.audio_dir, args.frame_shift_ms, args.margin_s)
    app = create_app(store, audio=audio, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_run(args) -> int:
    overrides = {"workdir": args.workdir} if args.workdir else None
    cfg = load_config(args.config, overrides=overrides)
    pipeline = Pipeline(cfg)
    if args.stage == "serve":
        return _serve_pipeline(cfg, args)
    outputs = pipeline.run_all() if args.stage == "all" else pipeline.run(args.stage)
    for path in outputs:
        print(path)
    return 0


def _serve_pipeline(cfg, args) -> int:
    """`run --stage serve`: review service over the pipeline's artifacts."""
    import uvicorn

    from .service import AudioLibrary, SessionStore, candidates_from_hits, create_app

    root = Path(cfg.workdir)
    store = SessionStore(root / "store")
    top_any = root / "top_any.tsv"
    if top_any.exists() and not store.list_sessions():
        hits = search_ops.load_hits(top_any)
        session = store.create_session("awe", candidates_from_hits(hits), k=cfg.top_k)
        print(f"created session {session.session_id} with {len(session.candidates)} candidates")
    audio = None
    if (root / "audio").is_dir():
        audio = AudioLibrary(root / "audio", cfg.frame_shift_ms)
    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(store, audio=audio, ui_dir=ui_dir if ui_dir.is_dir() else None)
    uvicorn.run(app, host="127.0.0.1", port=8765, log_level="warning")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "segment": _cmd_segment,
    "mine": _cmd_mine,
    "train-awe": _cmd_train,
    "index": _cmd_index,
    "search": _cmd_search,
    "evaluate": _cmd_evaluate,
    "asr-kws": _cmd_asr_kws,
    "wer": _cmd_wer,
    "serve": _cmd_serve,
    "run": _cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (DataError, FormatError) as exc:
        print(f"awekws: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"awekws: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

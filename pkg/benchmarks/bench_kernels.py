#!/usr/bin/env python3
"""Benchmark the jitted kernels against the pure-numpy fallback.

Runs the hot paths at production-ish sizes on whichever backend is active,
so run it twice to compare:

    python benchmarks/bench_kernels.py
    AWEKWS_NO_NUMBA=1 python benchmarks/bench_kernels.py

Covered: encoder forward (segment embedding), forward+backward (training
step), batched segment scoring with per-utterance min, and edit distance.
"""

import time

import numpy as np

from awekws import kernels
from awekws.model import AweModel, ModelConfig, backward, encode


def timeit(label, fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        n_items = fn()
        best = min(best, time.perf_counter() - started)
    print(f"  {label:<38} {best:8.3f} s   ({n_items / best:,.0f} items/s)")


def bench_encode(model, segments):
    def run():
        for seg in segments:
            encode(model, seg)
        return len(segments)

    return run


def bench_train_step(model, pairs):
    def run():
        for x, t in pairs:
            backward(model, x, t)
        return len(pairs)

    return run


def bench_scoring(emb, sqnorms, queries, starts, ends):
    def run():
        for q in queries:
            scores = kernels.segment_scores(emb, sqnorms, q, kernels.dot_f64(q, q))
            kernels.range_min_argmin(scores, starts, ends)
        return len(queries) * emb.shape[0]

    return run


def bench_levenshtein(token_pairs):
    def run():
        for ref, hyp in token_pairs:
            kernels.levenshtein(ref, hyp)
        return len(token_pairs)

    return run


def main():
    print(f"backend: {kernels.BACKEND}")
    kernels.warmup()
    rng = np.random.default_rng(0)

    # encode: 2000 segments of 20-35 frames, D=64 against H=128/E=64
    model = AweModel.init(ModelConfig(input_dim=64, hidden_dim=128, embed_dim=64), seed=0)
    segments = [
        rng.standard_normal((int(rng.integers(20, 36)), 64)).astype(np.float32)
        for _ in range(2000)
    ]
    print("encoder forward (2000 segments, H=128):")
    timeit("encode", bench_encode(model, segments))

    # training step: 300 pairs on a smaller model
    small = AweModel.init(ModelConfig(input_dim=16, hidden_dim=48, embed_dim=24), seed=0)
    pairs = [
        (
            rng.standard_normal((int(rng.integers(8, 20)), 16)).astype(np.float32),
            rng.standard_normal((int(rng.integers(8, 20)), 16)).astype(np.float32),
        )
        for _ in range(300)
    ]
    print("forward+backward (300 pairs, H=48):")
    timeit("backward", bench_train_step(small, pairs))

    # scoring: 200k segments x E=100, 14 queries, 20k utterances
    n_seg, n_utt = 200_000, 20_000
    emb = np.ascontiguousarray(rng.standard_normal((n_seg, 100)))
    sqnorms = kernels.row_sqnorms_f64(emb)
    bounds = np.linspace(0, n_seg, n_utt + 1, dtype=np.int64)
    queries = [rng.standard_normal(100) for _ in range(14)]
    print("segment scoring (200k segments, 14 queries):")
    timeit("segment_scores + range_min_argmin", bench_scoring(emb, sqnorms, queries, bounds[:-1], bounds[1:]))

    # WER: 2000 utterance pairs of ~12 tokens
    token_pairs = [
        (
            rng.integers(0, 50, size=rng.integers(5, 13)).astype(np.int32),
            rng.integers(0, 50, size=rng.integers(5, 13)).astype(np.int32),
        )
        for _ in range(2000)
    ]
    print("edit distance (2000 pairs):")
    timeit("levenshtein", bench_levenshtein(token_pairs))


if __name__ == "__main__":
    main()

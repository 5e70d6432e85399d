"""Kernel backend selection: numba-jitted hot loops with a pure-numpy fallback.

The default backend compiles the cores in ``awekws.kernels.cores`` with
``numba.njit``.  Setting the environment variable ``AWEKWS_NO_NUMBA=1``
(or numba failing to import) selects the pure-numpy path instead.  Both
backends implement identical math; within one backend the scalar cosine
distance and the batched segment scorer are bit-for-bit consistent, which
the exact-oracle tests rely on.  Across backends results may differ in the
last float ulp because BLAS and sequential summation order differ.

``benchmarks/bench_kernels.py`` compares the two paths.
"""

import math
import os

import numpy as np

from . import cores

__all__ = [
    "BACKEND",
    "gated_forward",
    "gated_backward",
    "vanilla_forward",
    "vanilla_backward",
    "levenshtein",
    "dot_f64",
    "segment_scores",
    "range_min_argmin",
    "row_sqnorms_f64",
    "warmup",
]


def _numba_disabled() -> bool:
    return os.environ.get("AWEKWS_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}


BACKEND = "numpy"

if not _numba_disabled():
    try:
        from numba import njit

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        BACKEND = "numpy"


if BACKEND == "numba":
    gated_forward = njit(cache=True)(cores.gated_forward_core)
    gated_backward = njit(cache=True)(cores.gated_backward_core)
    vanilla_forward = njit(cache=True)(cores.vanilla_forward_core)
    vanilla_backward = njit(cache=True)(cores.vanilla_backward_core)
    levenshtein = njit(cache=True)(cores.levenshtein_core)
    range_min_argmin = njit(cache=True)(cores.range_min_argmin_core)

    @njit(cache=True)
    def dot_f64(a, b):
        s = 0.0
        for i in range(a.shape[0]):
            s += a[i] * b[i]
        return s

    @njit(cache=True)
    def segment_scores(emb, sqnorms, q, q_sqnorm):
        n = emb.shape[0]
        width = emb.shape[1]
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            if sqnorms[i] == 0.0 or q_sqnorm == 0.0:
                out[i] = 1.0
            else:
                s = 0.0
                for e in range(width):
                    s += emb[i, e] * q[e]
                d = 1.0 - s / math.sqrt(sqnorms[i] * q_sqnorm)
                if d < 0.0:
                    d = 0.0
                elif d > 2.0:
                    d = 2.0
                out[i] = d
        return out

else:
    gated_forward = cores.gated_forward_core
    gated_backward = cores.gated_backward_core
    vanilla_forward = cores.vanilla_forward_core
    vanilla_backward = cores.vanilla_backward_core
    levenshtein = cores.levenshtein_core

    def dot_f64(a, b):
        return float(np.dot(a, b))

    def segment_scores(emb, sqnorms, q, q_sqnorm):
        # Row-wise np.dot keeps batch scoring bit-identical to the scalar
        # distance op on this backend (one shared BLAS dot routine).
        n = emb.shape[0]
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            if sqnorms[i] == 0.0 or q_sqnorm == 0.0:
                out[i] = 1.0
            else:
                d = 1.0 - np.dot(emb[i], q) / math.sqrt(sqnorms[i] * q_sqnorm)
                out[i] = min(2.0, max(0.0, d))
        return out

    def range_min_argmin(scores, starts, ends):
        n = starts.shape[0]
        mins = np.empty(n, dtype=np.float64)
        arg = np.empty(n, dtype=np.int64)
        for i in range(n):
            rel = int(np.argmin(scores[starts[i] : ends[i]]))
            arg[i] = starts[i] + rel
            mins[i] = scores[arg[i]]
        return mins, arg


def row_sqnorms_f64(emb: np.ndarray) -> np.ndarray:
    """Squared euclidean norm per row, via the backend dot for bit-consistency."""
    out = np.empty(emb.shape[0], dtype=np.float64)
    for i in range(emb.shape[0]):
        out[i] = dot_f64(emb[i], emb[i])
    return out


def warmup() -> None:
    """Trigger JIT compilation of every kernel (no-op on the numpy path)."""
    for dt in (np.float64, np.float32):
        ax = np.zeros((2, 3), dtype=dt)
        u = np.zeros((3, 3), dtype=dt)
        h0 = np.zeros(3, dtype=dt)
        h, r, g, c = gated_forward(ax, ax, ax, u, u, u, h0)
        gated_backward(ax, h, h0, r, g, c, u, u, u)
        h = vanilla_forward(ax, u, h0)
        vanilla_backward(ax, h, h0, u)
    levenshtein(np.zeros(2, dtype=np.int32), np.zeros(2, dtype=np.int32))
    emb = np.zeros((2, 3), dtype=np.float64)
    scores = segment_scores(emb, row_sqnorms_f64(emb), emb[0], 0.0)
    range_min_argmin(scores, np.array([0], dtype=np.int64), np.array([2], dtype=np.int64))
    dot_f64(emb[0], emb[1])

"""Backend parity: the jitted kernels and the pure-numpy fallback implement
the same math (agreement to float tolerance; exact for integer kernels)."""

import subprocess
import sys

import numpy as np
import pytest

from awekws import kernels
from awekws.kernels import cores


class TestBackendSelection:
    @pytest.mark.skipif(kernels.BACKEND != "numba", reason="numba disabled via env flag")
    def test_default_backend_is_numba(self):
        assert kernels.BACKEND == "numba"

    def test_env_flag_selects_numpy(self):
        code = "import awekws.kernels as k; print(k.BACKEND)"
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            env={"AWEKWS_NO_NUMBA": "1", "PATH": "/usr/bin:/bin"},
        )
        assert out.stdout.strip() == "numpy"


class TestRnnCoreParity:
    def test_gated_forward_backward_match_reference(self, rng):
        for dt in (np.float64, np.float32):
            t_steps, width = 9, 7
            ax = [rng.standard_normal((t_steps, width)).astype(dt) for _ in range(3)]
            us = [rng.standard_normal((width, width)).astype(dt) * 0.3 for _ in range(3)]
            h0 = np.zeros(width, dtype=dt)
            rtol, atol = (1e-4, 1e-6) if dt == np.float32 else (1e-10, 1e-13)
            jit_out = kernels.gated_forward(*ax, *us, h0)
            ref_out = cores.gated_forward_core(*ax, *us, h0)
            for a, b in zip(jit_out, ref_out):
                np.testing.assert_allclose(a, b, rtol=rtol, atol=atol)
            dh = rng.standard_normal((t_steps, width)).astype(dt)
            h, r, u, c = jit_out
            jit_back = kernels.gated_backward(dh, h, h0, r, u, c, *us)
            rh, rr, ru, rc = ref_out
            ref_back = cores.gated_backward_core(dh, rh, h0, rr, ru, rc, *us)
            for a, b in zip(jit_back, ref_back):
                np.testing.assert_allclose(a, b, rtol=rtol, atol=atol)

    def test_vanilla_cores_match_reference(self, rng):
        t_steps, width = 6, 5
        ax = rng.standard_normal((t_steps, width))
        u_w = rng.standard_normal((width, width)) * 0.4
        h0 = np.zeros(width)
        h_jit = kernels.vanilla_forward(ax, u_w, h0)
        h_ref = cores.vanilla_forward_core(ax, u_w, h0)
        np.testing.assert_allclose(h_jit, h_ref, rtol=1e-12)
        dh = rng.standard_normal((t_steps, width))
        for a, b in zip(kernels.vanilla_backward(dh, h_jit, h0, u_w), cores.vanilla_backward_core(dh, h_ref, h0, u_w)):
            np.testing.assert_allclose(a, b, rtol=1e-12)


class TestDistanceKernels:
    def test_scalar_and_batch_are_bit_consistent(self, rng):
        emb = rng.standard_normal((40, 16))
        q = rng.standard_normal(16)
        sqnorms = kernels.row_sqnorms_f64(emb)
        scores = kernels.segment_scores(emb, sqnorms, q, kernels.dot_f64(q, q))
        import math

        for i in range(emb.shape[0]):
            sq_a = kernels.dot_f64(emb[i], emb[i])
            sq_b = kernels.dot_f64(q, q)
            expected = 1.0 - kernels.dot_f64(emb[i], q) / math.sqrt(sq_a * sq_b)
            assert scores[i] == expected

    def test_zero_norm_rows_get_distance_one(self, rng):
        emb = rng.standard_normal((3, 4))
        emb[1] = 0.0
        scores = kernels.segment_scores(emb, kernels.row_sqnorms_f64(emb), emb[0], kernels.dot_f64(emb[0], emb[0]))
        assert scores[1] == 1.0

    def test_range_min_argmin_first_occurrence(self):
        scores = np.array([0.5, 0.2, 0.2, 0.9, 0.1, 0.1])
        starts = np.array([0, 3], dtype=np.int64)
        ends = np.array([3, 6], dtype=np.int64)
        mins, args = kernels.range_min_argmin(scores, starts, ends)
        assert mins.tolist() == [0.2, 0.1]
        assert args.tolist() == [1, 4]  # first index of the minimum


class TestLevenshtein:
    def test_known_distances(self):
        def dist(a, b):
            return int(
                kernels.levenshtein(np.array(a, dtype=np.int32), np.array(b, dtype=np.int32))
            )

        assert dist([1, 2, 3], [1, 2, 3]) == 0
        assert dist([1, 2, 3], [1, 9, 3]) == 1
        assert dist([1, 2], [1, 9, 8]) == 2
        assert dist([], [1, 2]) == 2
        assert dist([1, 2], []) == 2

"""Finite-difference oracle for backpropagation through time.

The oracle perturbs every parameter element with central differences on the
scalar loss; it never touches the analytic backward path.  Comparison is
per parameter tensor (norm of the difference over the larger norm), since
individual near-zero entries are dominated by finite-difference roundoff.
"""

import numpy as np
import pytest

from awekws.model import AweModel, ModelConfig, backward, loss

FD_EPS = 1e-5
REL_TOL = 1e-4


def finite_difference_grads(model, x, target, eps=FD_EPS):
    grads = {}
    for name, p in model.params.items():
        g = np.empty_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + eps
            plus = loss(model, x, target)
            p[idx] = orig - eps
            minus = loss(model, x, target)
            p[idx] = orig
            g[idx] = (plus - minus) / (2 * eps)
        grads[name] = g
    return grads


def tensor_rel_error(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


@pytest.mark.parametrize("cell", ["gated", "vanilla"])
@pytest.mark.parametrize("seed", [0, 1])
def test_backward_matches_finite_differences(cell, seed):
    cfg = ModelConfig(input_dim=3, hidden_dim=8, embed_dim=4, num_layers=3, cell=cell)
    model = AweModel.init(cfg, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 100)
    x = rng.standard_normal((int(rng.integers(2, 7)), 3))
    target = rng.standard_normal((int(rng.integers(2, 7)), 3))
    _, analytic = backward(model, x, target)
    numeric = finite_difference_grads(model, x, target)
    for name in model.params:
        rel = tensor_rel_error(analytic[name], numeric[name])
        assert rel < REL_TOL, f"{name}: rel err {rel:.3e}"


def test_backward_single_frame_sequences():
    cfg = ModelConfig(input_dim=2, hidden_dim=5, embed_dim=3, num_layers=2)
    model = AweModel.init(cfg, seed=7, dtype=np.float64)
    rng = np.random.default_rng(7)
    x = rng.standard_normal((1, 2))
    target = rng.standard_normal((1, 2))
    _, analytic = backward(model, x, target)
    numeric = finite_difference_grads(model, x, target)
    for name in model.params:
        assert tensor_rel_error(analytic[name], numeric[name]) < REL_TOL

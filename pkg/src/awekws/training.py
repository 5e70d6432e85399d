"""Adam training loop for the correspondence autoencoder.

Mini-batch gradients are accumulated pair by pair in a fixed order
(identical math to padded batching, since the loss is averaged per pair),
so results are bit-reproducible under a fixed seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import model as model_ops
from .corpus import Corpus
from .errors import DataError, NumericalError
from .model import AweModel
from .pairs import WordPair, resolve_pair_frames

DEFAULT_LEARNING_RATE = 0.001


@dataclass
class TrainConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    grad_clip_norm: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    normalize_features: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise DataError("batch_size must be >= 1 and epochs >= 0")


class AdamState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step = 0

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], cfg: TrainConfig):
        self.step += 1
        bias1 = 1.0 - cfg.beta1**self.step
        bias2 = 1.0 - cfg.beta2**self.step
        for name, p in params.items():
            g = grads[name]
            self.m[name] = cfg.beta1 * self.m[name] + (1.0 - cfg.beta1) * g
            self.v[name] = cfg.beta2 * self.v[name] + (1.0 - cfg.beta2) * (g * g)
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            p -= (cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)).astype(p.dtype)


def _clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g.astype(np.float64) ** 2))
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * scale


def feature_stats(corpora: list[Corpus]) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean/std over all frames of the given corpora."""
    mats = [fs.frames for c in corpora for fs in c.features.values()]
    if not mats:
        raise DataError("no features to compute normalization stats from")
    stacked = np.concatenate(mats, axis=0).astype(np.float64)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std[std < 1e-8] = 1.0
    return mean, std


def train(
    model: AweModel,
    pairs: list[WordPair],
    cfg: TrainConfig,
    corpora: list[Corpus],
) -> tuple[AweModel, list[float]]:
    """Train a copy of the model; returns it with the per-epoch mean loss curve.

    epochs=0 returns an unchanged copy.  Non-finite loss aborts with the
    offending epoch index.
    """
    if not pairs:
        raise DataError("need at least one training pair")
    trained = model.copy()
    if cfg.normalize_features:
        mean, std = feature_stats(corpora)
        trained.set_feature_normalization(mean, std)

    resolved = [resolve_pair_frames(p, corpora) for p in pairs]
    adam = AdamState(trained.params)
    rng = np.random.default_rng(cfg.seed)
    curve: list[float] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(resolved))
        epoch_losses = []
        for batch_start in range(0, len(order), cfg.batch_size):
            batch = order[batch_start : batch_start + cfg.batch_size]
            grads_sum: dict[str, np.ndarray] | None = None
            for idx in batch:
                inp, tgt = resolved[idx]
                pair_loss, grads = model_ops.backward(trained, inp, tgt)
                epoch_losses.append(pair_loss)
                if grads_sum is None:
                    grads_sum = grads
                else:
                    for name in grads_sum:
                        grads_sum[name] += grads[name]
            assert grads_sum is not None
            inv = 1.0 / len(batch)
            for name in grads_sum:
                grads_sum[name] = grads_sum[name] * inv
            if cfg.grad_clip_norm is not None:
                _clip_gradients(grads_sum, cfg.grad_clip_norm)
            adam.update(trained.params, grads_sum, cfg)
        mean_loss = float(np.mean(epoch_losses))
        if not np.isfinite(mean_loss):
            raise NumericalError(f"training diverged: non-finite loss at epoch {epoch}")
        curve.append(mean_loss)
    return trained, curve


def save_loss_curve(path, curve: list[float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss"])
        for epoch, value in enumerate(curve):
            writer.writerow([epoch, repr(value)])

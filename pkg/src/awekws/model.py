"""Correspondence-autoencoder RNN for acoustic word embeddings.

The encoder is a stack of unidirectional recurrent layers run over a
variable-length feature segment; the embedding is a linear projection of the
final top-layer hidden state.  The decoder is a mirrored stack that receives
the embedding as its input at every time step (zero initial state) and emits
one feature frame per step through an output linear map.  Training
reconstructs a *different* instance of the same word type, with per-frame
mean squared error.

Everything is plain numpy arrays; the sequential recurrences run through
``awekws.kernels`` (numba-jitted by default).  ``backward`` implements exact
backpropagation through time for both cell types and is verified against
central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corpus import load_checkpoint, save_checkpoint
from .errors import DataError

GATE_SUFFIXES = ("Wr", "Ur", "br", "Wu", "Uu", "bu", "Wc", "Uc", "bc")
VANILLA_SUFFIXES = ("W", "U", "b")

DEFAULT_HIDDEN_DIM = 400
DEFAULT_EMBED_DIM = 100
DEFAULT_NUM_LAYERS = 3


@dataclass
class ModelConfig:
    input_dim: int
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    embed_dim: int = DEFAULT_EMBED_DIM
    num_layers: int = DEFAULT_NUM_LAYERS
    cell: str = "gated"  # "gated" | "vanilla"

    def __post_init__(self):
        if self.cell not in ("gated", "vanilla"):
            raise DataError(f"unknown cell type {self.cell!r}")
        for name in ("input_dim", "hidden_dim", "embed_dim", "num_layers"):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be >= 1")


def _layer_names(side: str, layer: int, cell: str) -> list[str]:
    suffixes = GATE_SUFFIXES if cell == "gated" else VANILLA_SUFFIXES
    return [f"{side}.l{layer}.{s}" for s in suffixes]


def parameter_names(cfg: ModelConfig) -> list[str]:
    """Canonical parameter order; checkpoints serialize in this order."""
    names = []
    for layer in range(cfg.num_layers):
        names.extend(_layer_names("enc", layer, cfg.cell))
    names.extend(["proj.W", "proj.b"])
    for layer in range(cfg.num_layers):
        names.extend(_layer_names("dec", layer, cfg.cell))
    names.extend(["out.W", "out.b"])
    return names


def _glorot(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class AweModel:
    config: ModelConfig
    params: dict[str, np.ndarray]
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None

    # -- construction ---------------------------------------------------

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0, dtype=np.float32) -> "AweModel":
        rng = np.random.default_rng(seed)
        params: dict[str, np.ndarray] = {}
        hid = config.hidden_dim
        for side, in_dim in (("enc", config.input_dim), ("dec", config.embed_dim)):
            layer_in = in_dim
            for layer in range(config.num_layers):
                for name in _layer_names(side, layer, config.cell):
                    suffix = name.rsplit(".", 1)[1]
                    if suffix.startswith("W"):
                        arr = _glorot(rng, (hid, layer_in))
                    elif suffix.startswith("U"):
                        arr = _glorot(rng, (hid, hid))
                    else:
                        arr = np.zeros(hid)
                    params[name] = arr.astype(dtype)
                layer_in = hid
        params["proj.W"] = _glorot(rng, (config.embed_dim, hid)).astype(dtype)
        params["proj.b"] = np.zeros(config.embed_dim, dtype=dtype)
        params["out.W"] = _glorot(rng, (config.input_dim, hid)).astype(dtype)
        params["out.b"] = np.zeros(config.input_dim, dtype=dtype)
        ordered = {name: params[name] for name in parameter_names(config)}
        return cls(config, ordered)

    @property
    def dtype(self):
        return self.params["proj.W"].dtype

    def copy(self) -> "AweModel":
        return AweModel(
            self.config,
            {k: v.copy() for k, v in self.params.items()},
            None if self.feature_mean is None else self.feature_mean.copy(),
            None if self.feature_std is None else self.feature_std.copy(),
        )

    def astype(self, dtype) -> "AweModel":
        return AweModel(
            self.config,
            {k: v.astype(dtype) for k, v in self.params.items()},
            None if self.feature_mean is None else self.feature_mean.astype(dtype),
            None if self.feature_std is None else self.feature_std.astype(dtype),
        )

    # -- checkpointing ----------------------------------------------------

    def save(self, path) -> None:
        """Write parameters as named float32 tensors (casts if needed)."""
        tensors = dict(self.params)
        if self.feature_mean is not None:
            tensors["norm.mean"] = self.feature_mean
            tensors["norm.std"] = self.feature_std
        save_checkpoint(path, tensors)

    @classmethod
    def load(cls, path, dtype=np.float32) -> "AweModel":
        tensors = load_checkpoint(path)
        cell = "gated" if "enc.l0.Wr" in tensors else "vanilla"
        first_w = "enc.l0.Wr" if cell == "gated" else "enc.l0.W"
        if first_w not in tensors:
            raise DataError(f"{path}: not a model checkpoint (missing {first_w!r})")
        num_layers = len({k.split(".")[1] for k in tensors if k.startswith("enc.l")})
        config = ModelConfig(
            input_dim=tensors[first_w].shape[1],
            hidden_dim=tensors[first_w].shape[0],
            embed_dim=tensors["proj.W"].shape[0],
            num_layers=num_layers,
            cell=cell,
        )
        expected = parameter_names(config)
        missing = [n for n in expected if n not in tensors]
        if missing:
            raise DataError(f"{path}: checkpoint missing tensors {missing}")
        params = {n: tensors[n].astype(dtype) for n in expected}
        model = cls(config, params)
        if "norm.mean" in tensors:
            model.feature_mean = tensors["norm.mean"].astype(dtype)
            model.feature_std = tensors["norm.std"].astype(dtype)
        _check_shapes(model)
        return model

    # -- normalization ----------------------------------------------------

    def set_feature_normalization(self, mean: np.ndarray, std: np.ndarray) -> None:
        if mean.shape != (self.config.input_dim,) or std.shape != (self.config.input_dim,):
            raise DataError("normalization stats must be D-dimensional")
        if np.any(std <= 0):
            raise DataError("normalization std must be positive")
        self.feature_mean = mean.astype(self.dtype)
        self.feature_std = std.astype(self.dtype)

    def _prepare_input(self, frames: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(frames, dtype=self.dtype)
        if x.ndim != 2 or x.shape[0] < 1:
            raise DataError(f"segment frames must be (T, D) with T >= 1, got {x.shape}")
        if x.shape[1] != self.config.input_dim:
            raise DataError(
                f"feature dim mismatch: segment has D={x.shape[1]}, model expects {self.config.input_dim}"
            )
        if self.feature_mean is not None:
            x = (x - self.feature_mean) / self.feature_std
        return x


def _check_shapes(model: AweModel) -> None:
    cfg = model.config
    hid, emb, dim = cfg.hidden_dim, cfg.embed_dim, cfg.input_dim
    if model.params["proj.W"].shape != (emb, hid):
        raise DataError("projection shape inconsistent with (E, H)")
    if model.params["out.W"].shape != (dim, hid):
        raise DataError("output map shape inconsistent with (D, H)")
    dec_first = "dec.l0.Wr" if cfg.cell == "gated" else "dec.l0.W"
    if model.params[dec_first].shape != (hid, emb):
        raise DataError("decoder input shape inconsistent with (H, E)")


# ---------------------------------------------------------------------------
# Stack forward/backward


@dataclass
class _StackCache:
    inputs: list[np.ndarray]
    h: list[np.ndarray]
    r: list[np.ndarray] = field(default_factory=list)
    u: list[np.ndarray] = field(default_factory=list)
    c: list[np.ndarray] = field(default_factory=list)


def _stack_forward(model: AweModel, side: str, x: np.ndarray) -> _StackCache:
    cfg = model.config
    p = model.params
    cache = _StackCache(inputs=[], h=[])
    h0 = np.zeros(cfg.hidden_dim, dtype=model.dtype)
    for layer in range(cfg.num_layers):
        cache.inputs.append(x)
        if cfg.cell == "gated":
            ax_r = x @ p[f"{side}.l{layer}.Wr"].T + p[f"{side}.l{layer}.br"]
            ax_u = x @ p[f"{side}.l{layer}.Wu"].T + p[f"{side}.l{layer}.bu"]
            ax_c = x @ p[f"{side}.l{layer}.Wc"].T + p[f"{side}.l{layer}.bc"]
            h, r, u, c = kernels.gated_forward(
                ax_r,
                ax_u,
                ax_c,
                p[f"{side}.l{layer}.Ur"],
                p[f"{side}.l{layer}.Uu"],
                p[f"{side}.l{layer}.Uc"],
                h0,
            )
            cache.r.append(r)
            cache.u.append(u)
            cache.c.append(c)
        else:
            ax = x @ p[f"{side}.l{layer}.W"].T + p[f"{side}.l{layer}.b"]
            h = kernels.vanilla_forward(ax, p[f"{side}.l{layer}.U"], h0)
        cache.h.append(h)
        x = h
    return cache


def _stack_backward(
    model: AweModel, side: str, cache: _StackCache, dh_top: np.ndarray, grads: dict[str, np.ndarray]
) -> np.ndarray:
    """Backprop through the stack; returns gradient w.r.t. the stack input."""
    cfg = model.config
    p = model.params
    h0 = np.zeros(cfg.hidden_dim, dtype=model.dtype)
    dh_out = dh_top
    for layer in range(cfg.num_layers - 1, -1, -1):
        x = cache.inputs[layer]
        h = cache.h[layer]
        h_prev_seq = np.vstack([h0[None, :], h[:-1]])
        if cfg.cell == "gated":
            r, u, c = cache.r[layer], cache.u[layer], cache.c[layer]
            da_r, da_u, da_c, _ = kernels.gated_backward(
                dh_out,
                h,
                h0,
                r,
                u,
                c,
                p[f"{side}.l{layer}.Ur"],
                p[f"{side}.l{layer}.Uu"],
                p[f"{side}.l{layer}.Uc"],
            )
            grads[f"{side}.l{layer}.Wr"] = da_r.T @ x
            grads[f"{side}.l{layer}.Wu"] = da_u.T @ x
            grads[f"{side}.l{layer}.Wc"] = da_c.T @ x
            grads[f"{side}.l{layer}.Ur"] = da_r.T @ h_prev_seq
            grads[f"{side}.l{layer}.Uu"] = da_u.T @ h_prev_seq
            grads[f"{side}.l{layer}.Uc"] = da_c.T @ (r * h_prev_seq)
            grads[f"{side}.l{layer}.br"] = da_r.sum(axis=0)
            grads[f"{side}.l{layer}.bu"] = da_u.sum(axis=0)
            grads[f"{side}.l{layer}.bc"] = da_c.sum(axis=0)
            dh_out = (
                da_r @ p[f"{side}.l{layer}.Wr"]
                + da_u @ p[f"{side}.l{layer}.Wu"]
                + da_c @ p[f"{side}.l{layer}.Wc"]
            )
        else:
            da, _ = kernels.vanilla_backward(dh_out, h, h0, p[f"{side}.l{layer}.U"])
            grads[f"{side}.l{layer}.W"] = da.T @ x
            grads[f"{side}.l{layer}.U"] = da.T @ h_prev_seq
            grads[f"{side}.l{layer}.b"] = da.sum(axis=0)
            dh_out = da @ p[f"{side}.l{layer}.W"]
    return dh_out


# ---------------------------------------------------------------------------
# Public operations


def encode(model: AweModel, frames: np.ndarray) -> np.ndarray:
    """Embed one variable-length segment into an E-dimensional vector."""
    x = model._prepare_input(frames)
    cache = _stack_forward(model, "enc", x)
    h_last = cache.h[-1][-1]
    return model.params["proj.W"] @ h_last + model.params["proj.b"]


def decode(model: AweModel, embedding: np.ndarray, target_length: int) -> np.ndarray:
    """Reconstruct target_length feature frames from an embedding."""
    if target_length < 1:
        raise DataError("target_length must be >= 1")
    z = np.ascontiguousarray(embedding, dtype=model.dtype)
    if z.shape != (model.config.embed_dim,):
        raise DataError(
            f"embedding must have length {model.config.embed_dim}, got shape {z.shape}"
        )
    x = np.tile(z, (target_length, 1))
    cache = _stack_forward(model, "dec", x)
    return cache.h[-1] @ model.params["out.W"].T + model.params["out.b"]


def loss(model: AweModel, input_frames: np.ndarray, target_frames: np.ndarray) -> float:
    """Mean squared error of reconstructing the target instance."""
    target = model._prepare_input(target_frames)
    z = encode(model, input_frames)
    recon = decode(model, z, target.shape[0])
    diff = recon - target
    return float(np.mean(diff * diff))


def backward(
    model: AweModel, input_frames: np.ndarray, target_frames: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact analytic gradients for one correspondence pair.

    The returned dict has the same keys and shapes as ``model.params``.
    """
    p = model.params
    x_in = model._prepare_input(input_frames)
    target = model._prepare_input(target_frames)
    t_out = target.shape[0]

    enc_cache = _stack_forward(model, "enc", x_in)
    h_last = enc_cache.h[-1][-1]
    z = p["proj.W"] @ h_last + p["proj.b"]
    dec_in = np.tile(z, (t_out, 1))
    dec_cache = _stack_forward(model, "dec", dec_in)
    recon = dec_cache.h[-1] @ p["out.W"].T + p["out.b"]

    diff = recon - target
    loss_value = float(np.mean(diff * diff))

    grads: dict[str, np.ndarray] = {}
    d_recon = (2.0 / diff.size) * diff
    d_recon = d_recon.astype(model.dtype, copy=False)
    grads["out.W"] = d_recon.T @ dec_cache.h[-1]
    grads["out.b"] = d_recon.sum(axis=0)
    dh_dec_top = d_recon @ p["out.W"]

    d_dec_in = _stack_backward(model, "dec", dec_cache, dh_dec_top, grads)
    dz = d_dec_in.sum(axis=0)

    grads["proj.W"] = np.outer(dz, h_last)
    grads["proj.b"] = dz
    dh_enc_top = np.zeros_like(enc_cache.h[-1])
    dh_enc_top[-1] = p["proj.W"].T @ dz
    _stack_backward(model, "enc", enc_cache, dh_enc_top, grads)

    ordered = {name: grads[name] for name in parameter_names(model.config)}
    return loss_value, ordered

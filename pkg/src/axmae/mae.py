"""Axis-wise masked autoencoders over patch embeddings.

Two mirrored models share this code. The spatial one masks whole sensors
and attends across the node axis independently for every patch index; the
temporal one masks whole patches and attends across the patch axis
independently for every node. Keeping attention on a single axis bounds the
score matrices at N x N or T_p x T_p per head; the joint axis is never
materialized. A third "mixed" mode (ablation only) flattens patch x node
slots and attends over all of them, which is quadratic in the slot count by
construction.

Masked positions are dropped before encoding, re-inserted as a shared
learnable token (plus the positional code) before the single-layer decoder,
and only the masked positions enter the reconstruction loss.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import engine as eg
from .data import DataError, NormStats, SeriesDataset, split_bounds
from .embedding import patchify, positional_encoding
from .engine import DivergenceError, Tensor
from .serialize import load_container, save_container

__all__ = [
    "MaskSpec",
    "MaeArch",
    "MaeParams",
    "MaeCheckpoint",
    "PretrainConfig",
    "sample_mask",
    "apply_mask",
    "init_mae_params",
    "encode",
    "pad_and_decode",
    "masked_loss",
    "pretrain",
    "encode_representation",
    "encode_representations",
    "attention_probe",
    "save_mae_checkpoint",
    "load_mae_checkpoint",
]

AXES = ("spatial", "temporal", "mixed")


# ---------------------------------------------------------------- masking


@dataclass(frozen=True)
class MaskSpec:
    """A sampled mask along one axis; indices are sorted and disjoint."""

    axis: str
    ratio: float
    extent: int
    masked_indices: tuple
    visible_indices: tuple
    seed: object

    @property
    def n_masked(self) -> int:
        return len(self.masked_indices)


def sample_mask(axis: str, extent: int, ratio: float, seed, mode: str = "fixed") -> MaskSpec:
    """Draw a mask over ``extent`` positions.

    ``fixed`` masks exactly floor(extent * ratio) positions without
    replacement; ``bernoulli`` flips an independent coin per position (and
    never leaves the visible set empty). Identical arguments give identical
    masks.
    """
    if axis not in AXES:
        raise ValueError(f"unknown mask axis {axis!r}; expected one of {AXES}")
    if extent < 1:
        raise ValueError(f"mask extent must be >= 1, got {extent}")
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"mask ratio must lie in [0, 1), got {ratio}")
    key = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    rng = np.random.default_rng(np.random.SeedSequence(key))
    if mode == "fixed":
        n_masked = int(math.floor(extent * ratio))
        masked = np.sort(rng.permutation(extent)[:n_masked])
    elif mode == "bernoulli":
        draw = rng.random(extent) < ratio
        if draw.all():
            draw[rng.integers(0, extent)] = False
        masked = np.flatnonzero(draw)
    else:
        raise ValueError(f"unknown mask mode {mode!r}")
    masked_set = set(int(i) for i in masked)
    visible = tuple(i for i in range(extent) if i not in masked_set)
    return MaskSpec(axis=axis, ratio=float(ratio), extent=int(extent),
                    masked_indices=tuple(int(i) for i in masked),
                    visible_indices=visible,
                    seed=tuple(key) if len(key) > 1 else key[0])


def _mask_axis(spec: MaskSpec) -> int:
    # tensor layouts: spatial/mixed tokens sit on axis -2, temporal on -3
    return -3 if spec.axis == "temporal" else -2


def apply_mask(e: Tensor, spec: MaskSpec) -> Tensor:
    """Drop masked positions from an embedded grid, keeping slice order.

    Spatial masks remove node columns of a (..., T_p, N, D) tensor,
    temporal masks remove patch rows, and mixed masks flatten the grid to
    (..., T_p * N, D) slots first.
    """
    if spec.axis == "mixed":
        t_p, n, d = e.shape[-3], e.shape[-2], e.shape[-1]
        if t_p * n != spec.extent:
            raise ValueError(f"mask extent {spec.extent} does not match grid {t_p}x{n}")
        e = eg.reshape(e, e.shape[:-3] + (t_p * n, d))
        return eg.gather(e, spec.visible_indices, axis=-2)
    ax = _mask_axis(spec)
    if e.shape[ax] != spec.extent:
        raise ValueError(
            f"mask extent {spec.extent} does not match axis extent {e.shape[ax]}"
        )
    return eg.gather(e, spec.visible_indices, axis=ax)


# ---------------------------------------------------------------- model


@dataclass(frozen=True)
class MaeArch:
    """Shape parameters; the decoder is always a single layer."""

    patch_len: int = 12
    channels: int = 1
    embed_dim: int = 96
    heads: int = 4
    encoder_layers: int = 4
    t_long: int = 864

    def __post_init__(self):
        if self.embed_dim % 4 != 0:
            raise ValueError(f"embed_dim must be divisible by 4, got {self.embed_dim}")
        if self.embed_dim % self.heads != 0:
            raise ValueError(
                f"embed_dim {self.embed_dim} must be divisible by heads {self.heads}"
            )
        if self.t_long % self.patch_len != 0:
            raise ValueError(
                f"t_long ({self.t_long}) must be divisible by patch_len ({self.patch_len})"
            )
        if self.encoder_layers < 1:
            raise ValueError("need at least one encoder layer")

    @property
    def t_patches(self) -> int:
        return self.t_long // self.patch_len

    @property
    def patch_width(self) -> int:
        return self.patch_len * self.channels


@dataclass
class MaeParams:
    """Named parameter tensors in a stable order, plus their architecture."""

    arch: MaeArch
    tensors: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def parameters(self):
        return list(self.tensors.values())

    def clone_values(self) -> dict:
        return {k: v.values.copy() for k, v in self.tensors.items()}

    def load_values(self, values: dict) -> None:
        for k, v in self.tensors.items():
            v.values = np.asarray(values[k], dtype=v.values.dtype).copy()


def _block_names(prefix: str):
    return [f"{prefix}.{part}" for part in (
        "ln1.g", "ln1.b", "attn.wq", "attn.bq", "attn.wk", "attn.bk",
        "attn.wv", "attn.bv", "attn.wo", "attn.bo",
        "ln2.g", "ln2.b", "ffn.w1", "ffn.b1", "ffn.w2", "ffn.b2",
    )]


def init_mae_params(arch: MaeArch, seed: int = 0) -> MaeParams:
    """Seeded initialization. The output regression starts at zero so an
    untrained model predicts zero (the normalized-space mean)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1A17]))
    d = arch.embed_dim
    tensors = {}

    def param(name, shape, scale=None):
        if scale is None:
            values = np.zeros(shape)
        elif scale == "ones":
            values = np.ones(shape)
        else:
            values = rng.normal(scale=scale, size=shape)
        tensors[name] = Tensor(values, requires_grad=True)

    param("embed.w", (arch.patch_width, d), 1.0 / math.sqrt(arch.patch_width))
    param("embed.b", (d,))

    def block(prefix):
        param(f"{prefix}.ln1.g", (d,), "ones")
        param(f"{prefix}.ln1.b", (d,))
        for w, b in (("wq", "bq"), ("wk", "bk"), ("wv", "bv"), ("wo", "bo")):
            param(f"{prefix}.attn.{w}", (d, d), 1.0 / math.sqrt(d))
            param(f"{prefix}.attn.{b}", (d,))
        param(f"{prefix}.ln2.g", (d,), "ones")
        param(f"{prefix}.ln2.b", (d,))
        param(f"{prefix}.ffn.w1", (d, 4 * d), 1.0 / math.sqrt(d))
        param(f"{prefix}.ffn.b1", (4 * d,))
        param(f"{prefix}.ffn.w2", (4 * d, d), 1.0 / math.sqrt(4 * d))
        param(f"{prefix}.ffn.b2", (d,))

    for i in range(arch.encoder_layers):
        block(f"enc.{i}")
    param("enc.norm.g", (d,), "ones")
    param("enc.norm.b", (d,))
    param("mask_token", (d,), 0.02)
    block("dec.0")
    param("dec.norm.g", (d,), "ones")
    param("dec.norm.b", (d,))
    param("reg.w", (d, arch.patch_width))  # zero start
    param("reg.b", (arch.patch_width,))
    return MaeParams(arch=arch, tensors=tensors)


# attention-score instrumentation: active probes collect every score-buffer
# shape so tests can prove the joint (N*T_p)^2 buffer never exists
_PROBES: list = []


@contextmanager
def attention_probe():
    buf = []
    _PROBES.append(buf)
    try:
        yield buf
    finally:
        _PROBES.remove(buf)


def _swap(ndim: int, i: int, j: int):
    axes = list(range(ndim))
    axes[i % ndim], axes[j % ndim] = axes[j % ndim], axes[i % ndim]
    return tuple(axes)


def _attention(x: Tensor, params: MaeParams, prefix: str) -> Tensor:
    d = x.shape[-1]
    heads = params.arch.heads
    dh = d // heads

    def project(w, b):
        t = eg.add(eg.matmul(x, params[f"{prefix}.attn.{w}"]), params[f"{prefix}.attn.{b}"])
        t = eg.reshape(t, t.shape[:-1] + (heads, dh))
        return eg.transpose(t, _swap(t.ndim, -3, -2))  # (..., heads, S, dh)

    q, k, v = project("wq", "bq"), project("wk", "bk"), project("wv", "bv")
    scores = eg.mul(eg.matmul(q, eg.transpose(k, _swap(k.ndim, -1, -2))), 1.0 / math.sqrt(dh))
    for buf in _PROBES:
        buf.append(tuple(scores.shape))
    ctx = eg.matmul(eg.softmax_last(scores), v)
    ctx = eg.transpose(ctx, _swap(ctx.ndim, -3, -2))
    ctx = eg.reshape(ctx, ctx.shape[:-2] + (d,))
    return eg.add(eg.matmul(ctx, params[f"{prefix}.attn.wo"]), params[f"{prefix}.attn.bo"])


def _transformer_block(x: Tensor, params: MaeParams, prefix: str) -> Tensor:
    a = eg.layer_norm(x, params[f"{prefix}.ln1.g"], params[f"{prefix}.ln1.b"])
    x = eg.add(x, _attention(a, params, prefix))
    f = eg.layer_norm(x, params[f"{prefix}.ln2.g"], params[f"{prefix}.ln2.b"])
    h = eg.gelu(eg.add(eg.matmul(f, params[f"{prefix}.ffn.w1"]), params[f"{prefix}.ffn.b1"]))
    h = eg.add(eg.matmul(h, params[f"{prefix}.ffn.w2"]), params[f"{prefix}.ffn.b2"])
    return eg.add(x, h)


def _to_token_layout(x: Tensor, axis: str) -> Tensor:
    # temporal attention runs over the patch axis, so move it next to D
    return eg.transpose(x, _swap(x.ndim, -3, -2)) if axis == "temporal" else x


def _from_token_layout(x: Tensor, axis: str) -> Tensor:
    return eg.transpose(x, _swap(x.ndim, -3, -2)) if axis == "temporal" else x


def encode(visible: Tensor, params: MaeParams, axis: str) -> Tensor:
    """Run the encoder stack, attending along the masked axis only.

    Shape is preserved. Positions on the non-attended axis never exchange
    information, so the output is exactly permutation-equivariant there.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    x = _to_token_layout(visible, axis)
    for i in range(params.arch.encoder_layers):
        x = _transformer_block(x, params, f"enc.{i}")
    x = eg.layer_norm(x, params["enc.norm.g"], params["enc.norm.b"])
    return _from_token_layout(x, axis)


def pad_and_decode(h: Tensor, spec: MaskSpec, params: MaeParams,
                   t_patches: int, n_nodes: int, return_full: bool = False):
    """Re-insert mask tokens, decode one layer, regress to patch values.

    Returns reconstructions at the masked positions only (an empty tensor
    when nothing was masked); ``return_full=True`` also returns the full
    grid of regressed patches.
    """
    arch = params.arch
    d = arch.embed_dim
    pos = positional_encoding(t_patches, n_nodes, d)

    if spec.axis == "spatial":
        ax = -2
        lead = h.shape[:-3]
        pos_masked = pos[:, list(spec.masked_indices), :]
        expected_visible = len(spec.visible_indices)
        if h.shape[-2] != expected_visible or h.shape[-3] != t_patches:
            raise ValueError(f"visible block {h.shape} does not match mask {spec.extent}")
    elif spec.axis == "temporal":
        ax = -3
        lead = h.shape[:-3]
        pos_masked = pos[list(spec.masked_indices), :, :]
        if h.shape[-3] != len(spec.visible_indices) or h.shape[-2] != n_nodes:
            raise ValueError(f"visible block {h.shape} does not match mask {spec.extent}")
    else:  # mixed: flattened slots
        ax = -2
        lead = h.shape[:-2]
        pos_masked = pos.reshape(t_patches * n_nodes, d)[list(spec.masked_indices), :]
        if h.shape[-2] != len(spec.visible_indices):
            raise ValueError(f"visible block {h.shape} does not match mask {spec.extent}")

    token = eg.reshape(params["mask_token"], (1,) * (h.ndim - 1) + (d,))
    pos_block = Tensor(np.ascontiguousarray(np.broadcast_to(pos_masked, lead + pos_masked.shape)))
    tokens = eg.add(token, pos_block)

    merged = eg.concat([h, tokens], axis=ax)
    restore = np.argsort(np.concatenate([
        np.asarray(spec.visible_indices, dtype=np.intp),
        np.asarray(spec.masked_indices, dtype=np.intp),
    ]))
    full = eg.gather(merged, restore, axis=ax)

    x = _to_token_layout(full, spec.axis)
    x = _transformer_block(x, params, "dec.0")
    x = eg.layer_norm(x, params["dec.norm.g"], params["dec.norm.b"])
    x = _from_token_layout(x, spec.axis)
    regressed = eg.add(eg.matmul(x, params["reg.w"]), params["reg.b"])

    q_hat = eg.gather(regressed, spec.masked_indices, axis=ax)
    if return_full:
        return q_hat, regressed
    return q_hat


def masked_loss(prediction: Tensor, truth) -> Tensor:
    """Mean absolute error over every masked patch element."""
    t = truth if isinstance(truth, Tensor) else Tensor(np.asarray(truth))
    if prediction.shape != t.shape:
        raise ValueError(f"prediction {prediction.shape} and truth {t.shape} differ")
    if prediction.size == 0:
        raise ValueError("masked set is empty; loss undefined")
    return eg.tmean(eg.absolute(eg.sub(prediction, t)))


# ---------------------------------------------------------------- training


@dataclass
class PretrainConfig:
    """Settings for one masked-autoencoder pre-training run."""

    t_long: int = 864
    patch_len: int = 12
    embed_dim: int = 96
    heads: int = 4
    encoder_layers: int = 4
    mask_ratio: float = 0.25
    mask_mode: str = "fixed"
    epochs: int = 10
    batch_size: int = 8
    learning_rate: float = 1e-3
    window_stride: int = 12
    max_val_windows: int = 32
    seed: int = 0
    precision: str = "float32"

    def __post_init__(self):
        if not 0.0 < self.mask_ratio < 1.0:
            raise ValueError(f"mask_ratio must lie in (0, 1), got {self.mask_ratio}")
        if self.epochs < 1 or self.batch_size < 1 or self.window_stride < 1:
            raise ValueError("epochs, batch_size and window_stride must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class MaeCheckpoint:
    """Trained parameters plus everything needed to reuse them."""

    axis: str
    params: MaeParams
    n_nodes: int
    norm: NormStats | None
    metadata: dict = field(default_factory=dict)

    @property
    def arch(self) -> MaeArch:
        return self.params.arch


def _window_starts(bounds, t_long: int, stride: int):
    start, end = bounds
    last = end - t_long
    if last < start:
        return []
    return list(range(start, last + 1, stride))


def _mask_extent(axis: str, t_patches: int, n_nodes: int) -> int:
    if axis == "spatial":
        return n_nodes
    if axis == "temporal":
        return t_patches
    return t_patches * n_nodes


def _gather_target(patches: np.ndarray, spec: MaskSpec) -> np.ndarray:
    # patches: (B, T_p, N, L*C) raw normalized values
    idx = list(spec.masked_indices)
    if spec.axis == "spatial":
        return patches[:, :, idx, :]
    if spec.axis == "temporal":
        return patches[:, idx, :, :]
    b, t_p, n, w = patches.shape
    return patches.reshape(b, t_p * n, w)[:, idx, :]


def _forward_loss(patches: np.ndarray, spec: MaskSpec, params: MaeParams,
                  pos: np.ndarray) -> Tensor:
    x = Tensor(patches)
    e = eg.add(eg.add(eg.matmul(x, params["embed.w"]), params["embed.b"]), Tensor(pos))
    visible = apply_mask(e, spec)
    hidden = encode(visible, params, spec.axis)
    pred = pad_and_decode(hidden, spec, params, patches.shape[1], patches.shape[2])
    return masked_loss(pred, _gather_target(patches, spec))


def pretrain(dataset: SeriesDataset, axis: str, config: PretrainConfig):
    """Train one masked autoencoder on the dataset's training split.

    Resamples a fresh mask every step, tracks reconstruction loss on fixed
    validation masks once per epoch, and returns the checkpoint taken at
    the best validation loss together with the loss-curve rows
    (step, train_loss, val_loss-or-None). Raises DivergenceError if the
    loss stops being finite.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    if not dataset.normalized:
        raise DataError("pretrain expects a normalized dataset")
    arch = MaeArch(patch_len=config.patch_len, channels=dataset.channels,
                   embed_dim=config.embed_dim, heads=config.heads,
                   encoder_layers=config.encoder_layers, t_long=config.t_long)
    t_p = arch.t_patches
    n = dataset.n_nodes
    extent = _mask_extent(axis, t_p, n)
    if int(extent * config.mask_ratio) < 1:
        raise ValueError(
            f"mask_ratio {config.mask_ratio} masks nothing over extent {extent}"
        )

    train_bounds, val_bounds, _ = split_bounds(dataset)
    train_starts = _window_starts(train_bounds, config.t_long, config.window_stride)
    if not train_starts:
        raise DataError(
            f"training split {train_bounds} is shorter than t_long={config.t_long}"
        )
    val_starts = _window_starts(val_bounds, config.t_long, config.window_stride)
    val_starts = val_starts[:config.max_val_windows]

    with eg.using_dtype(np.float32 if config.precision == "float32" else np.float64):
        params = init_mae_params(arch, seed=config.seed)
        pos = positional_encoding(t_p, n, arch.embed_dim).astype(eg.get_default_dtype())
        optimizer = eg.Adam(params.parameters(), learning_rate=config.learning_rate)
        order_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))

        values = dataset.values
        dtype = eg.get_default_dtype()

        def window_batch(starts):
            stack = np.stack([values[s:s + config.t_long] for s in starts])
            return patchify(stack, config.patch_len).astype(dtype)

        val_specs = [
            sample_mask(axis, extent, config.mask_ratio, seed=(config.seed, 4, i),
                        mode=config.mask_mode)
            for i in range(len(val_starts))
        ]

        def validation_loss():
            if not val_starts:
                return None
            total = 0.0
            with eg.no_grad():
                for s, spec in zip(val_starts, val_specs):
                    loss = _forward_loss(window_batch([s]), spec, params, pos)
                    total += float(loss.values)
            return total / len(val_starts)

        curve = []
        best_val = math.inf
        best_values = params.clone_values()
        step = 0
        final_train = math.nan
        for epoch in range(config.epochs):
            epoch_starts = [train_starts[i] for i in order_rng.permutation(len(train_starts))]
            for i in range(0, len(epoch_starts), config.batch_size):
                batch = epoch_starts[i:i + config.batch_size]
                spec = sample_mask(axis, extent, config.mask_ratio,
                                   seed=(config.seed, 3, step), mode=config.mask_mode)
                try:
                    loss = _forward_loss(window_batch(batch), spec, params, pos)
                except ValueError as exc:
                    # a float32 overflow mid-forward trips the softmax
                    # finiteness guard before the loss itself can go inf
                    if "non-finite" in str(exc):
                        raise DivergenceError(
                            f"pre-training forward produced non-finite values at step {step}"
                        ) from exc
                    raise
                train_loss = float(loss.values)
                if not math.isfinite(train_loss):
                    raise DivergenceError(f"pre-training loss diverged at step {step}")
                loss.backward()
                optimizer.step()
                optimizer.zero_grad()
                step += 1
                final_train = train_loss
                curve.append([step, train_loss, None])
            val = validation_loss()
            if val is not None:
                if not math.isfinite(val):
                    raise DivergenceError(f"validation loss diverged after epoch {epoch}")
                curve[-1][2] = val
                if val < best_val:
                    best_val = val
                    best_values = params.clone_values()

        if math.isinf(best_val):
            best_val = None
            best_values = params.clone_values()
        params.load_values(best_values)

    checkpoint = MaeCheckpoint(
        axis=axis,
        params=params,
        n_nodes=n,
        norm=dataset.norm,
        metadata={
            "seed": config.seed,
            "epochs": config.epochs,
            "steps": step,
            "mask_ratio": config.mask_ratio,
            "mask_mode": config.mask_mode,
            "learning_rate": config.learning_rate,
            "best_val_loss": best_val,
            "final_train_loss": final_train,
            "precision": config.precision,
        },
    )
    return checkpoint, [tuple(row) for row in curve]


# ---------------------------------------------------------------- inference


def encode_representations(windows: np.ndarray, checkpoint: MaeCheckpoint) -> np.ndarray:
    """Encode unmasked long windows: (B, T_long, N, C) -> (B, T_p, N, D)."""
    arch = checkpoint.arch
    windows = np.asarray(windows)
    if windows.ndim == 3:
        windows = windows[None]
    b, t, n, c = windows.shape
    if t != arch.t_long or c != arch.channels:
        raise ValueError(
            f"window shape {windows.shape[1:]} incompatible with architecture "
            f"(t_long={arch.t_long}, channels={arch.channels})"
        )
    if n != checkpoint.n_nodes:
        raise ValueError(f"checkpoint was trained on {checkpoint.n_nodes} nodes, got {n}")
    params = checkpoint.params
    dtype = params["embed.w"].values.dtype
    patches = patchify(windows, arch.patch_len)
    pos = positional_encoding(arch.t_patches, n, arch.embed_dim)
    # run at the precision the parameters were trained in
    with eg.using_dtype(dtype), eg.no_grad():
        x = Tensor(patches)
        e = eg.add(eg.add(eg.matmul(x, params["embed.w"]), params["embed.b"]), Tensor(pos))
        if checkpoint.axis == "mixed":
            e = eg.reshape(e, (b, arch.t_patches * n, arch.embed_dim))
            h = encode(e, params, "mixed")
            h = eg.reshape(h, (b, arch.t_patches, n, arch.embed_dim))
        else:
            h = encode(e, params, checkpoint.axis)
    return h.values


def encode_representation(window: np.ndarray, checkpoint: MaeCheckpoint) -> np.ndarray:
    """Single-window form of :func:`encode_representations`: (T_p, N, D)."""
    return encode_representations(np.asarray(window)[None], checkpoint)[0]


# ---------------------------------------------------------------- storage


def save_mae_checkpoint(path, checkpoint: MaeCheckpoint) -> None:
    arch = checkpoint.arch
    header = {
        "kind": "mae-checkpoint",
        "format_version": 1,
        "axis": checkpoint.axis,
        "arch": {
            "patch_len": arch.patch_len,
            "channels": arch.channels,
            "embed_dim": arch.embed_dim,
            "heads": arch.heads,
            "encoder_layers": arch.encoder_layers,
            "t_long": arch.t_long,
        },
        "n_nodes": checkpoint.n_nodes,
        "norm": None if checkpoint.norm is None else
                {"mean": list(checkpoint.norm.mean), "std": list(checkpoint.norm.std)},
        "metadata": checkpoint.metadata,
    }
    save_container(path, header, ((name, t.values) for name, t in checkpoint.params.tensors.items()))


def load_mae_checkpoint(path) -> MaeCheckpoint:
    header, arrays = load_container(path)
    if header.get("kind") != "mae-checkpoint":
        raise ValueError(f"{path}: expected a mae-checkpoint, got {header.get('kind')!r}")
    arch = MaeArch(**header["arch"])
    # blobs are stored as float32; restore at the recorded training precision
    precision = header.get("metadata", {}).get("precision", "float32")
    dtype = np.float64 if precision == "float64" else np.float32
    with eg.using_dtype(dtype):
        params = init_mae_params(arch, seed=0)
    for name, tensor in params.tensors.items():
        if name not in arrays:
            raise ValueError(f"{path}: missing parameter blob {name!r}")
        if tuple(arrays[name].shape) != tensor.values.shape:
            raise ValueError(f"{path}: parameter {name!r} has shape {arrays[name].shape}, "
                             f"expected {tensor.values.shape}")
        tensor.values = arrays[name].astype(dtype)
    norm = header.get("norm")
    return MaeCheckpoint(
        axis=header["axis"],
        params=params,
        n_nodes=int(header["n_nodes"]),
        norm=None if norm is None else NormStats(mean=tuple(norm["mean"]), std=tuple(norm["std"])),
        metadata=header.get("metadata", {}),
    )

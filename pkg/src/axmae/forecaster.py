"""Short-window forecaster and the representation-augmentation pathway.

The predictor is a node-wise stack of dilated temporal convolutions with
skip aggregation: kernel 2, dilations (1, 2, 4, 4), so the surviving step
sees exactly the 12 input steps and nothing mixes across nodes. Frozen
encoder representations of the long window are truncated to the last
patches, projected per node by a two-layer perceptron, and added to the
predictor's hidden state before the regression head. With both branches
disabled the pipeline is the baseline predictor, parameter for parameter.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import engine as eg
from .data import DataError, NormStats, SeriesDataset, iterate_samples, split_bounds, dataset_fingerprint
from .engine import DivergenceError, Tensor
from .mae import MaeCheckpoint, encode_representations
from .serialize import load_container, save_container

__all__ = [
    "ForecastConfig",
    "ForecasterParams",
    "ForecasterCheckpoint",
    "init_forecaster_params",
    "predictor_forward",
    "truncate_and_project",
    "augment",
    "forecast_head",
    "forecaster_forward",
    "branch_features",
    "train_forecaster",
    "forecaster_predictions",
    "evaluate",
    "metric_mae",
    "metric_rmse",
    "metric_mape",
    "save_forecaster_checkpoint",
    "load_forecaster_checkpoint",
]


@dataclass
class ForecastConfig:
    """Settings for downstream forecaster training."""

    t_short: int = 12
    horizon: int = 12
    t_long: int = 864
    hidden: int = 64
    dilations: tuple = (1, 2, 4, 4)
    tail: int = 1  # trailing patches kept from each representation
    use_spatial: bool = True
    use_temporal: bool = True
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 1e-3
    sample_stride: int = 1
    val_stride: int | None = None
    max_val_samples: int = 256
    patience: int = 5
    seed: int = 0
    precision: str = "float32"
    zero_threshold: float = 1e-2
    cache_dir: str | None = None

    def __post_init__(self):
        self.dilations = tuple(int(d) for d in self.dilations)
        if self.t_short != 1 + sum(self.dilations):
            raise ValueError(
                f"dilations {self.dilations} cover {1 + sum(self.dilations)} steps, "
                f"but t_short is {self.t_short}"
            )
        if self.horizon < 1 or self.hidden < 1 or self.tail < 1:
            raise ValueError("horizon, hidden and tail must be >= 1")
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 0:
            raise ValueError("epochs and batch_size must be >= 1, patience >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class ForecasterParams:
    """Named parameter tensors; branch projections exist only when enabled."""

    config: ForecastConfig
    channels: int
    branch_dims: dict  # branch name -> encoder width D, for enabled branches
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


def init_forecaster_params(config: ForecastConfig, channels: int,
                           branch_dims: dict | None = None, seed: int = 0) -> ForecasterParams:
    """Seeded initialization.

    The predictor and head draw from one stream and each branch projection
    from its own, so enabling a branch never changes the predictor's
    starting point. Projection output layers start near zero so early
    augmented training tracks the baseline.
    """
    branch_dims = dict(branch_dims or {})
    h = config.hidden
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    tensors = {}

    def normal(name, shape, fan_in, generator):
        tensors[name] = Tensor(generator.normal(scale=1.0 / math.sqrt(fan_in), size=shape),
                               requires_grad=True)

    def zeros(name, shape):
        tensors[name] = Tensor(np.zeros(shape), requires_grad=True)

    normal("in.w", (channels, h), channels, rng)
    zeros("in.b", (h,))
    for i in range(len(config.dilations)):
        normal(f"conv.{i}.wc", (h, h), h, rng)
        normal(f"conv.{i}.wp", (h, h), h, rng)
        zeros(f"conv.{i}.b", (h,))
    normal("head.w1", (h, h), h, rng)
    zeros("head.b1", (h,))
    normal("head.w2", (h, config.horizon * channels), h, rng)
    zeros("head.b2", (config.horizon * channels,))

    for idx, name in enumerate(("spatial", "temporal")):
        if name not in branch_dims:
            continue
        d = branch_dims[name]
        brng = np.random.default_rng(np.random.SeedSequence([seed, 7, idx]))
        normal(f"proj.{name}.w1", (config.tail * d, h), config.tail * d, brng)
        zeros(f"proj.{name}.b1", (h,))
        tensors[f"proj.{name}.w2"] = Tensor(brng.normal(scale=1e-3, size=(h, h)),
                                            requires_grad=True)
        zeros(f"proj.{name}.b2", (h,))

    return ForecasterParams(config=config, channels=channels,
                            branch_dims=branch_dims, tensors=tensors)


# ---------------------------------------------------------------- forward


def predictor_forward(short_input, params: ForecasterParams) -> Tensor:
    """Hidden state of the short window: (T, N, C) -> (N, D').

    A leading batch axis is passed through: (B, T, N, C) -> (B, N, D').
    Every operation acts per node, so permuting nodes permutes the rows.
    """
    cfg = params.config
    x = short_input if isinstance(short_input, Tensor) else Tensor(np.asarray(short_input))
    if x.ndim not in (3, 4):
        raise ValueError(f"short input must be (T, N, C) or (B, T, N, C), got {x.shape}")
    if x.shape[-3] != cfg.t_short:
        raise ValueError(f"short input length {x.shape[-3]} != t_short {cfg.t_short}")
    if x.shape[-1] != params.channels:
        raise ValueError(f"short input has {x.shape[-1]} channels, expected {params.channels}")

    # (…, T, N, C) -> (…, T, N, D'), then shrink T by each dilation
    h = eg.gelu(eg.add(eg.matmul(x, params["in.w"]), params["in.b"]))
    skips = None
    for i, d in enumerate(cfg.dilations):
        t = h.shape[-3]
        curr = eg.narrow(h, -3, d, t - d)
        prev = eg.narrow(h, -3, 0, t - d)
        mixed = eg.add(eg.matmul(curr, params[f"conv.{i}.wc"]),
                       eg.matmul(prev, params[f"conv.{i}.wp"]))
        h = eg.gelu(eg.add(mixed, params[f"conv.{i}.b"]))
        last = eg.narrow(h, -3, h.shape[-3] - 1, 1)
        skips = last if skips is None else eg.add(skips, last)
    return eg.reshape(skips, skips.shape[:-3] + skips.shape[-2:])


def truncate_and_project(rep, params: ForecasterParams, branch: str) -> Tensor:
    """Project the last patches of a representation: (T_p, N, D) -> (N, D').

    Keeps the trailing ``tail`` patches, reshapes node-wise to tail*D, and
    applies the branch's two-layer perceptron. Batched input is supported.
    """
    if branch not in params.branch_dims:
        raise ValueError(f"branch {branch!r} is not enabled on this forecaster")
    cfg = params.config
    r = rep if isinstance(rep, Tensor) else Tensor(np.asarray(rep))
    t_p, n, d = r.shape[-3:]
    if cfg.tail > t_p:
        raise ValueError(f"tail {cfg.tail} exceeds representation length {t_p}")
    if d != params.branch_dims[branch]:
        raise ValueError(f"{branch} representation width {d} != expected {params.branch_dims[branch]}")
    tail = eg.narrow(r, -3, t_p - cfg.tail, cfg.tail)
    tail = eg.transpose(tail, _swap_last3(tail.ndim))          # (…, N, tail, D)
    flat = eg.reshape(tail, tail.shape[:-2] + (cfg.tail * d,))  # (…, N, tail*D)
    z = eg.gelu(eg.add(eg.matmul(flat, params[f"proj.{branch}.w1"]),
                       params[f"proj.{branch}.b1"]))
    return eg.add(eg.matmul(z, params[f"proj.{branch}.w2"]), params[f"proj.{branch}.b2"])


def _swap_last3(ndim: int):
    axes = list(range(ndim))
    axes[-3], axes[-2] = axes[-2], axes[-3]
    return tuple(axes)


def augment(hidden: Tensor, *projections) -> Tensor:
    """Elementwise sum of the hidden state and any projected branches."""
    out = hidden
    for p in projections:
        if p is None:
            continue
        if p.shape != hidden.shape:
            raise ValueError(f"projection shape {p.shape} != hidden shape {hidden.shape}")
        out = eg.add(out, p)
    return out


def forecast_head(h_aug: Tensor, params: ForecasterParams) -> Tensor:
    """Regress the augmented state to the horizon: (N, D') -> (H, N, C)."""
    cfg = params.config
    if h_aug.shape[-1] != cfg.hidden:
        raise ValueError(f"head expects width {cfg.hidden}, got {h_aug.shape[-1]}")
    z = eg.gelu(eg.add(eg.matmul(h_aug, params["head.w1"]), params["head.b1"]))
    out = eg.add(eg.matmul(z, params["head.w2"]), params["head.b2"])
    lead = out.shape[:-2]
    n = out.shape[-2]
    out = eg.reshape(out, lead + (n, cfg.horizon, params.channels))
    return eg.transpose(out, _swap_last3(out.ndim))  # (…, H, N, C)


def forecaster_forward(short_input, params: ForecasterParams,
                       features: dict | None = None) -> Tensor:
    """Full pipeline: predictor, optional branch projections, head.

    ``features`` maps an enabled branch name to its representation block
    (…, T_p or tail, N, D); branches without features contribute nothing.
    """
    hidden = predictor_forward(short_input, params)
    projections = []
    for branch in params.branch_dims:
        block = (features or {}).get(branch)
        if block is None:
            raise ValueError(f"branch {branch!r} is enabled but no features were given")
        projections.append(truncate_and_project(block, params, branch))
    h_aug = augment(hidden, *projections)
    return forecast_head(h_aug, params)


# ---------------------------------------------------------------- features


def _params_fingerprint(tensors: dict) -> str:
    h = hashlib.sha256()
    for name in sorted(tensors):
        h.update(name.encode())
        h.update(np.ascontiguousarray(tensors[name].values, dtype=np.float32).tobytes())
    return h.hexdigest()


def branch_features(dataset: SeriesDataset, starts, checkpoint: MaeCheckpoint,
                    t_long: int, tail: int, cache_path=None,
                    batch_size: int = 8) -> np.ndarray:
    """Frozen-encoder features for the long windows at ``starts``.

    Returns (W, tail, N, D): the last ``tail`` patches of each window's
    representation. With ``cache_path`` the result is reused across runs
    when the dataset, checkpoint, window list, and tail all match.
    """
    starts = [int(s) for s in starts]
    key = {
        "kind": "rep-cache",
        "dataset": dataset_fingerprint(dataset),
        "checkpoint": _params_fingerprint(checkpoint.params.tensors),
        "tail": tail,
        "t_long": t_long,
        "starts": starts,
    }
    if cache_path is not None:
        try:
            header, arrays = load_container(cache_path)
        except (OSError, ValueError):
            header, arrays = None, None
        if header is not None and all(header.get(k) == v for k, v in key.items()):
            return arrays["features"].astype(np.float64)

    t_p = checkpoint.arch.t_patches
    if tail > t_p:
        raise ValueError(f"tail {tail} exceeds representation length {t_p}")
    out = []
    for i in range(0, len(starts), batch_size):
        chunk = starts[i:i + batch_size]
        windows = np.stack([dataset.values[s:s + t_long] for s in chunk])
        reps = encode_representations(windows, checkpoint)
        out.append(reps[:, t_p - tail:, :, :])
    features = np.concatenate(out, axis=0) if out else np.zeros(
        (0, tail, dataset.n_nodes, checkpoint.arch.embed_dim))
    if cache_path is not None:
        save_container(cache_path, key, [("features", features)])
    return features.astype(np.float64)


# ---------------------------------------------------------------- training


@dataclass
class ForecasterCheckpoint:
    params: ForecasterParams
    norm: NormStats | None
    metadata: dict = field(default_factory=dict)


def _check_compatible(dataset: SeriesDataset, ckpt: MaeCheckpoint, cfg: ForecastConfig, label: str):
    if ckpt is None:
        raise DataError(f"{label} branch is enabled but no checkpoint was given")
    if ckpt.n_nodes != dataset.n_nodes:
        raise DataError(f"{label} checkpoint has {ckpt.n_nodes} nodes, dataset has {dataset.n_nodes}")
    if ckpt.arch.channels != dataset.channels:
        raise DataError(f"{label} checkpoint has {ckpt.arch.channels} channels, "
                        f"dataset has {dataset.channels}")
    if ckpt.arch.t_long != cfg.t_long:
        raise DataError(f"{label} checkpoint was trained on t_long={ckpt.arch.t_long}, "
                        f"config asks for {cfg.t_long}")
    if ckpt.norm is not None and dataset.norm is not None and ckpt.norm != dataset.norm:
        raise DataError(f"{label} checkpoint normalization differs from the dataset's")


def train_forecaster(dataset: SeriesDataset, s_ckpt: MaeCheckpoint | None,
                     t_ckpt: MaeCheckpoint | None, config: ForecastConfig):
    """Train the forecaster on MAE loss with frozen encoder branches.

    Representations are extracted once, outside the graph, so encoder
    parameters cannot move. Early stopping tracks validation MAE with the
    configured patience and the best parameters are restored at the end.
    Returns (checkpoint, curve rows) shaped like :func:`axmae.mae.pretrain`.
    """
    if not dataset.normalized:
        raise DataError("train_forecaster expects a normalized dataset")
    branches = {}
    if config.use_spatial:
        _check_compatible(dataset, s_ckpt, config, "spatial")
        branches["spatial"] = s_ckpt
    if config.use_temporal:
        _check_compatible(dataset, t_ckpt, config, "temporal")
        branches["temporal"] = t_ckpt

    train_bounds, val_bounds, _ = split_bounds(dataset)
    train_samples = iterate_samples(dataset, train_bounds, t_short=config.t_short,
                                    horizon=config.horizon, t_long=config.t_long,
                                    stride=config.sample_stride)
    if not train_samples:
        raise DataError(f"training split {train_bounds} yields no samples")
    val_stride = config.val_stride or config.sample_stride
    val_samples = iterate_samples(dataset, val_bounds, t_short=config.t_short,
                                  horizon=config.horizon, t_long=config.t_long,
                                  stride=val_stride)[:config.max_val_samples]

    def feature_table(samples, tag):
        table = {}
        for name, ckpt in branches.items():
            starts = [s.anchor - config.t_long + 1 for s in samples]
            cache = None
            if config.cache_dir is not None:
                os.makedirs(config.cache_dir, exist_ok=True)
                digest = hashlib.sha256(repr(starts).encode()).hexdigest()[:16]
                cache = os.path.join(config.cache_dir, f"rep-{name}-{tag}-{digest}.axc")
            table[name] = branch_features(dataset, starts, ckpt, config.t_long,
                                          config.tail, cache_path=cache,
                                          batch_size=config.batch_size)
        return table

    train_features = feature_table(train_samples, "train")
    val_features = feature_table(val_samples, "val")

    with eg.using_dtype(np.float32 if config.precision == "float32" else np.float64):
        dtype = eg.get_default_dtype()
        params = init_forecaster_params(
            config, dataset.channels,
            branch_dims={k: v.arch.embed_dim for k, v in branches.items()},
            seed=config.seed)
        optimizer = eg.Adam(params.parameters(), learning_rate=config.learning_rate)
        order_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 8]))

        shorts = np.stack([s.short_input for s in train_samples]).astype(dtype)
        targets = np.stack([s.target for s in train_samples]).astype(dtype)
        val_shorts = np.stack([s.short_input for s in val_samples]).astype(dtype) \
            if val_samples else None
        val_targets = np.stack([s.target for s in val_samples]).astype(dtype) \
            if val_samples else None

        def batch_forward(idx, feats_source, shorts_arr):
            feats = {name: Tensor(block[idx].astype(dtype))
                     for name, block in feats_source.items()}
            return forecaster_forward(Tensor(shorts_arr[idx]), params, feats)

        def val_mae():
            if val_shorts is None:
                return None
            total, count = 0.0, 0
            with eg.no_grad():
                for i in range(0, len(val_samples), config.batch_size):
                    idx = np.arange(i, min(i + config.batch_size, len(val_samples)))
                    pred = batch_forward(idx, val_features, val_shorts)
                    total += float(np.abs(pred.values - val_targets[idx]).sum())
                    count += pred.size
            return total / count

        curve = []
        best_val = math.inf
        best_values = params.clone_values()
        stale = 0
        step = 0
        stop = False
        for epoch in range(config.epochs):
            order = order_rng.permutation(len(train_samples))
            for i in range(0, len(order), config.batch_size):
                idx = order[i:i + config.batch_size]
                pred = batch_forward(idx, train_features, shorts)
                loss = eg.tmean(eg.absolute(eg.sub(pred, Tensor(targets[idx]))))
                train_loss = float(loss.values)
                if not math.isfinite(train_loss):
                    raise DivergenceError(f"forecaster loss diverged at step {step}")
                loss.backward()
                optimizer.step()
                optimizer.zero_grad()
                step += 1
                curve.append([step, train_loss, None])
            val = val_mae()
            if val is not None:
                if not math.isfinite(val):
                    raise DivergenceError(f"validation MAE diverged after epoch {epoch}")
                curve[-1][2] = val
                if val < best_val - 1e-12:
                    best_val = val
                    best_values = params.clone_values()
                    stale = 0
                else:
                    stale += 1
                    if stale > config.patience:
                        stop = True
            if stop:
                break

        if math.isinf(best_val):
            best_val = None
            best_values = params.clone_values()
        params.load_values(best_values)

    checkpoint = ForecasterCheckpoint(
        params=params,
        norm=dataset.norm,
        metadata={
            "seed": config.seed,
            "steps": step,
            "epochs_run": epoch + 1,
            "best_val_mae": best_val,
            "branches": sorted(branches),
            "branch_axes": {name: ckpt.axis for name, ckpt in branches.items()},
            "precision": config.precision,
        },
    )
    return checkpoint, [tuple(row) for row in curve]


def forecaster_predictions(dataset: SeriesDataset, split_range,
                           checkpoint: ForecasterCheckpoint,
                           s_ckpt: MaeCheckpoint | None = None,
                           t_ckpt: MaeCheckpoint | None = None,
                           stride: int = 1, batch_size: int = 8):
    """Predict every sample in a split range.

    Returns (anchors, predictions, truths) where predictions and truths
    have shape (S, horizon, N, C) in normalized units.
    """
    params = checkpoint.params
    cfg = params.config
    samples = iterate_samples(dataset, split_range, t_short=cfg.t_short,
                              horizon=cfg.horizon, t_long=cfg.t_long, stride=stride)
    if not samples:
        raise DataError(f"split range {split_range} yields no samples")
    sources = {"spatial": s_ckpt, "temporal": t_ckpt}
    features = {}
    for name in params.branch_dims:
        ckpt = sources.get(name)
        if ckpt is None:
            raise DataError(f"forecaster uses the {name} branch; pass its checkpoint")
        starts = [s.anchor - cfg.t_long + 1 for s in samples]
        features[name] = branch_features(dataset, starts, ckpt, cfg.t_long,
                                         cfg.tail, batch_size=batch_size)

    dtype = params["in.w"].values.dtype
    shorts = np.stack([s.short_input for s in samples])
    truths = np.stack([s.target for s in samples])
    anchors = np.array([s.anchor for s in samples])
    preds = []
    with eg.using_dtype(dtype), eg.no_grad():
        for i in range(0, len(samples), batch_size):
            idx = np.arange(i, min(i + batch_size, len(samples)))
            feats = {name: Tensor(block[idx]) for name, block in features.items()}
            preds.append(forecaster_forward(Tensor(shorts[idx]), params, feats).values)
    return anchors, np.concatenate(preds, axis=0).astype(np.float64), truths


# ---------------------------------------------------------------- metrics


def metric_mae(predictions: np.ndarray, truths: np.ndarray) -> float:
    return float(np.mean(np.abs(predictions - truths)))


def metric_rmse(predictions: np.ndarray, truths: np.ndarray) -> float:
    return float(np.sqrt(np.mean((predictions - truths) ** 2)))


def metric_mape(predictions: np.ndarray, truths: np.ndarray,
                zero_threshold: float, exclusion_reference=None) -> float | None:
    """Mean absolute percentage error, excluding near-zero targets.

    The exclusion compares ``exclusion_reference`` (the truths themselves by
    default) against the threshold; passing normalized truths here lets a
    de-normalized report keep the normalized-units exclusion rule. Returns
    None when every target is excluded: an undefined percentage, not a
    perfect zero.
    """
    ref = truths if exclusion_reference is None else np.asarray(exclusion_reference)
    if ref.shape != truths.shape:
        raise ValueError(f"exclusion reference shape {ref.shape} != truth shape {truths.shape}")
    keep = np.abs(ref) >= zero_threshold
    if not keep.any():
        return None
    return float(np.mean(np.abs((predictions[keep] - truths[keep]) / truths[keep])) * 100.0)


def evaluate(predictions: np.ndarray, truths: np.ndarray,
             zero_threshold: float = 1e-2, horizons=(3, 6, 12),
             exclusion_reference=None) -> dict:
    """Overall and per-horizon MAE / RMSE / MAPE(%).

    Expects (S, H, N, C) arrays. Overall metrics average over every
    prediction step; horizon@k reports the k-th step alone.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if predictions.shape != truths.shape:
        raise ValueError(f"prediction shape {predictions.shape} != truth shape {truths.shape}")
    if predictions.ndim != 4:
        raise ValueError(f"expected (S, H, N, C) arrays, got {predictions.shape}")
    h = predictions.shape[1]
    bad = [k for k in horizons if not 1 <= k <= h]
    if bad:
        raise ValueError(f"horizons {bad} outside the prediction range 1..{h}")
    ref = None if exclusion_reference is None else np.asarray(exclusion_reference)

    def block(p, t, r):
        return {
            "mae": metric_mae(p, t),
            "rmse": metric_rmse(p, t),
            "mape": metric_mape(p, t, zero_threshold, exclusion_reference=r),
        }

    report = block(predictions, truths, ref)
    report["horizons"] = {
        int(k): block(predictions[:, k - 1], truths[:, k - 1],
                      None if ref is None else ref[:, k - 1])
        for k in horizons
    }
    return report


# ---------------------------------------------------------------- storage


def save_forecaster_checkpoint(path, checkpoint: ForecasterCheckpoint) -> None:
    cfg = checkpoint.params.config
    header = {
        "kind": "forecaster-checkpoint",
        "format_version": 1,
        "config": {
            "t_short": cfg.t_short, "horizon": cfg.horizon, "t_long": cfg.t_long,
            "hidden": cfg.hidden, "dilations": list(cfg.dilations), "tail": cfg.tail,
            "use_spatial": cfg.use_spatial, "use_temporal": cfg.use_temporal,
            "seed": cfg.seed, "precision": cfg.precision,
            "zero_threshold": cfg.zero_threshold,
        },
        "channels": checkpoint.params.channels,
        "branch_dims": checkpoint.params.branch_dims,
        "norm": None if checkpoint.norm is None else
                {"mean": list(checkpoint.norm.mean), "std": list(checkpoint.norm.std)},
        "metadata": checkpoint.metadata,
    }
    save_container(path, header,
                   ((name, t.values) for name, t in checkpoint.params.tensors.items()))


def load_forecaster_checkpoint(path) -> ForecasterCheckpoint:
    header, arrays = load_container(path)
    if header.get("kind") != "forecaster-checkpoint":
        raise ValueError(f"{path}: expected a forecaster-checkpoint, got {header.get('kind')!r}")
    raw = dict(header["config"])
    raw["dilations"] = tuple(raw["dilations"])
    cfg = ForecastConfig(**raw)
    precision = header.get("metadata", {}).get("precision", cfg.precision)
    dtype = np.float64 if precision == "float64" else np.float32
    with eg.using_dtype(dtype):
        params = init_forecaster_params(cfg, int(header["channels"]),
                                        branch_dims=header.get("branch_dims", {}),
                                        seed=cfg.seed)
    for name, tensor in params.tensors.items():
        if name not in arrays:
            raise ValueError(f"{path}: missing parameter blob {name!r}")
        if tuple(arrays[name].shape) != tensor.values.shape:
            raise ValueError(f"{path}: parameter {name!r} has shape {arrays[name].shape}, "
                             f"expected {tensor.values.shape}")
        tensor.values = arrays[name].astype(dtype)
    norm = header.get("norm")
    return ForecasterCheckpoint(
        params=params,
        norm=None if norm is None else NormStats(mean=tuple(norm["mean"]), std=tuple(norm["std"])),
        metadata=header.get("metadata", {}),
    )

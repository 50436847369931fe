"""Command-line pipeline: synth, pretrain, train, eval, report.

Every command is a pure function of (config, input artifacts, seed); only
wall-clock fields differ between identical runs. Relative output paths
resolve under the AXMAE_OUTPUT_ROOT environment variable when it is set.

Exit codes: 0 success, 2 configuration error, 3 data/artifact error,
4 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import engine as eg
from .config import (
    ConfigError,
    ExperimentConfig,
    RunReport,
    environment_fingerprint,
    load_experiment_config,
)
from .data import (
    DataError,
    LayoutDescriptor,
    SeriesDataset,
    dataset_fingerprint,
    fit_and_apply_zscore,
    load_dataset,
    save_series_binary,
    split_bounds,
    synth_generate,
    synth_spec_from_dict,
)
from .embedding import patchify, positional_encoding, unpatchify
from .engine import DivergenceError, Tensor
from .forecaster import (
    ForecastConfig,
    branch_features,
    evaluate,
    forecaster_forward,
    forecaster_predictions,
    load_forecaster_checkpoint,
    metric_mae,
    metric_rmse,
    save_forecaster_checkpoint,
    train_forecaster,
)
from .mae import (
    PretrainConfig,
    apply_mask,
    encode,
    load_mae_checkpoint,
    pad_and_decode,
    pretrain,
    sample_mask,
    save_mae_checkpoint,
)

OUTPUT_ROOT_ENV = "AXMAE_OUTPUT_ROOT"

PRETRAIN_AXES = {
    "full": ("spatial", "temporal"),
    "s-only": ("spatial",),
    "t-only": ("temporal",),
    "mixed": ("mixed",),
    "none": (),
}

# schema of the eval-metrics.json document (jsonschema draft 2020-12)
_METRIC_BLOCK = {
    "type": "object",
    "required": ["mae", "rmse", "mape"],
    "properties": {
        "mae": {"type": "number"},
        "rmse": {"type": "number"},
        "mape": {"type": ["number", "null"]},
    },
}
EVAL_SCHEMA = {
    "type": "object",
    "required": ["phase", "split", "n_samples", "stride", "zero_threshold",
                 "denormalized", "metrics", "artifacts", "dataset_fingerprint",
                 "environment", "timings_sec"],
    "properties": {
        "phase": {"const": "eval"},
        "split": {"enum": ["train", "val", "test"]},
        "warning": {"type": "string"},
        "n_samples": {"type": "integer", "minimum": 1},
        "stride": {"type": "integer", "minimum": 1},
        "zero_threshold": {"type": "number"},
        "denormalized": {"type": "boolean"},
        "metrics": {
            "allOf": [_METRIC_BLOCK],
            "required": ["horizons"],
            "properties": {
                "horizons": {
                    "type": "object",
                    "patternProperties": {r"^\d+$": _METRIC_BLOCK},
                },
            },
        },
        "artifacts": {"type": "object"},
        "dataset_fingerprint": {"type": "string"},
        "environment": {"type": "object"},
        "timings_sec": {"type": "object"},
    },
}


# ---------------------------------------------------------------- plumbing


def _output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))


def _resolve(path_like) -> Path:
    p = Path(path_like)
    return p if p.is_absolute() else _output_root() / p


def _out_dir(cfg: ExperimentConfig) -> Path:
    d = _resolve(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _prepare_dataset(cfg: ExperimentConfig):
    """Resolve the config's dataset source: (normalized dataset, mirage pairs)."""
    if cfg.synth is not None:
        spec = synth_spec_from_dict(cfg.synth)
        raw, manifest = synth_generate(spec)
        raw = SeriesDataset(raw.values, split_ratios=cfg.split_ratios)
    else:
        layout = LayoutDescriptor(kind=cfg.dataset_layout, nan_policy=cfg.nan_policy)
        raw = load_dataset(cfg.dataset_path, layout, split_ratios=cfg.split_ratios)
        manifest = []
        sidecar = Path(f"{cfg.dataset_path}.manifest.json")
        if sidecar.exists():
            with open(sidecar) as fh:
                manifest = json.load(fh).get("pairs", [])
    return fit_and_apply_zscore(raw), manifest


def _write_loss_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "train_loss", "val_loss"])
        for step, train, val in rows:
            writer.writerow([step, repr(float(train)), "" if val is None else repr(float(val))])


def _save_config_snapshot(cfg: ExperimentConfig, out: Path) -> None:
    with open(out / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _artifact_ref(path, out: Path) -> str:
    """Name a file relative to the run directory when it lives there."""
    path = Path(path)
    return path.name if path.parent == out else str(path)


def _require_files(paths: dict) -> None:
    missing = [f"{name}: {path}" for name, path in paths.items() if not Path(path).exists()]
    if missing:
        raise DataError("missing artifacts: " + ", ".join(missing))


def _pretrain_config(cfg: ExperimentConfig, mask_ratio: float) -> PretrainConfig:
    return PretrainConfig(
        t_long=cfg.t_long, patch_len=cfg.patch_len, embed_dim=cfg.embed_dim,
        heads=cfg.heads, encoder_layers=cfg.encoder_layers,
        mask_ratio=mask_ratio, mask_mode=cfg.mask_mode,
        epochs=cfg.pretrain_epochs, batch_size=cfg.pretrain_batch_size,
        learning_rate=cfg.pretrain_learning_rate,
        window_stride=cfg.pretrain_window_stride,
        max_val_windows=cfg.pretrain_max_val_windows,
        seed=cfg.seed, precision=cfg.precision)


def _forecast_config(cfg: ExperimentConfig, use_spatial: bool, use_temporal: bool,
                     cache_dir) -> ForecastConfig:
    return ForecastConfig(
        t_short=cfg.t_short, horizon=cfg.horizon, t_long=cfg.t_long,
        hidden=cfg.hidden, dilations=cfg.dilations, tail=cfg.tail,
        use_spatial=use_spatial, use_temporal=use_temporal,
        epochs=cfg.train_epochs, batch_size=cfg.train_batch_size,
        learning_rate=cfg.train_learning_rate,
        sample_stride=cfg.train_sample_stride, val_stride=cfg.train_val_stride,
        max_val_samples=cfg.train_max_val_samples, patience=cfg.train_patience,
        seed=cfg.seed, precision=cfg.precision,
        zero_threshold=cfg.zero_threshold, cache_dir=cache_dir)


def _branch_paths(cfg: ExperimentConfig, out: Path, args) -> dict:
    """Map the ablation mode to {branch slot: (checkpoint path, expected axis)}."""
    spatial = Path(args.spatial) if args.spatial else out / "spatial.ckpt"
    temporal = Path(args.temporal) if args.temporal else out / "temporal.ckpt"
    mixed = Path(getattr(args, "mixed", None) or out / "mixed.ckpt")
    if cfg.ablation == "full":
        return {"spatial": (spatial, "spatial"), "temporal": (temporal, "temporal")}
    if cfg.ablation == "s-only":
        return {"spatial": (spatial, "spatial")}
    if cfg.ablation == "t-only":
        return {"temporal": (temporal, "temporal")}
    if cfg.ablation == "mixed":
        # the joint encoder rides the temporal branch slot
        return {"temporal": (mixed, "mixed")}
    return {}


def _load_branches(paths: dict) -> dict:
    _require_files({f"{slot} checkpoint": p for slot, (p, _) in paths.items()})
    loaded = {}
    for slot, (path, expected_axis) in paths.items():
        ckpt = load_mae_checkpoint(path)
        if ckpt.axis != expected_axis:
            raise DataError(f"{path} holds a {ckpt.axis!r} encoder, expected {expected_axis!r}")
        loaded[slot] = ckpt
    return loaded


def _split_range(ds: SeriesDataset, name: str):
    bounds = dict(zip(("train", "val", "test"), split_bounds(ds)))
    return bounds[name]


def _eval_metrics(ds, fc_ckpt, branches: dict, split_range, stride: int,
                  zero_threshold: float, horizon: int):
    anchors, preds, truths = forecaster_predictions(
        ds, split_range, fc_ckpt,
        s_ckpt=branches.get("spatial"), t_ckpt=branches.get("temporal"),
        stride=stride)
    norm = ds.norm
    preds_d, truths_d = norm.invert(preds), norm.invert(truths)
    horizons = tuple(k for k in (3, 6, 12) if k <= horizon)
    metrics = evaluate(preds_d, truths_d, zero_threshold=zero_threshold,
                       horizons=horizons, exclusion_reference=truths)
    return anchors, preds_d, truths_d, metrics


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    try:
        with open(args.spec) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read synth spec {args.spec}: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"synth spec {args.spec} is not valid JSON: {exc}"]) from exc
    spec = synth_spec_from_dict(raw)
    ds, manifest = synth_generate(spec)

    out = _resolve(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_series_binary(out, ds.values)
    manifest_path = Path(args.manifest) if args.manifest else Path(f"{out}.manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump({"pairs": manifest}, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"wrote {out} shape=({ds.t_total}, {ds.n_nodes}, {ds.channels})")
    print(f"wrote {manifest_path} with {len(manifest)} mirage pair(s)")
    print(f"fingerprint {dataset_fingerprint(ds)}")
    return 0


def _parse_sweep(text: str):
    try:
        ratios = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError([f"--sweep-r must be comma-separated numbers, got {text!r}"]) from exc
    bad = [r for r in ratios if not 0.0 < r < 1.0]
    if bad or not ratios:
        raise ConfigError([f"--sweep-r ratios must lie in (0, 1), got {ratios}"])
    return ratios


def cmd_pretrain(args) -> int:
    cfg = load_experiment_config(args.config)
    out = _out_dir(cfg)
    _save_config_snapshot(cfg, out)
    axes = PRETRAIN_AXES[cfg.ablation]
    report = RunReport(phase="pretrain", config=cfg.to_dict())

    if not axes:
        note = "ablation mode 'none': no masked autoencoders to pre-train, nothing written"
        print(note)
        report.notes.append(note)
        report.save(out / "pretrain-report.json")
        return 0

    t0 = time.perf_counter()
    ds, _ = _prepare_dataset(cfg)
    report.timings_sec["dataset"] = round(time.perf_counter() - t0, 3)
    report.artifacts["dataset_fingerprint"] = dataset_fingerprint(ds)

    ratios = _parse_sweep(args.sweep_r) if args.sweep_r else [cfg.mask_ratio]
    sweep = args.sweep_r is not None
    table = []
    for ratio in ratios:
        for axis in axes:
            tag = f"{axis}-r{ratio:g}" if sweep else axis
            t0 = time.perf_counter()
            ckpt, curve = pretrain(ds, axis, _pretrain_config(cfg, ratio))
            seconds = time.perf_counter() - t0
            ckpt_path = out / f"{tag}.ckpt"
            save_mae_checkpoint(ckpt_path, ckpt)
            curve_path = out / f"pretrain-{tag}-loss.csv"
            _write_loss_csv(curve_path, curve)
            report.artifacts[f"checkpoint_{tag}"] = ckpt_path.name
            report.loss_curves[f"pretrain_{tag}"] = curve_path.name
            report.timings_sec[f"pretrain_{tag}"] = round(seconds, 3)
            row = {
                "mask_ratio": ratio,
                "axis": axis,
                "best_val_loss": ckpt.metadata["best_val_loss"],
                "final_train_loss": ckpt.metadata["final_train_loss"],
            }
            table.append(row)
            print(f"pre-trained {tag}: best val loss {row['best_val_loss']}, "
                  f"{len(curve)} steps, {seconds:.1f}s")

    report.metrics = {"runs": table}
    if sweep:
        sweep_path = out / "sweep-r.csv"
        with open(sweep_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mask_ratio", "axis", "best_val_loss", "final_train_loss"])
            for row in table:
                writer.writerow([row["mask_ratio"], row["axis"],
                                 row["best_val_loss"], row["final_train_loss"]])
        report.artifacts["sweep_table"] = sweep_path.name
        print(f"\nmask-ratio sweep ({sweep_path}):")
        print(f"{'r':>6}  {'axis':<8}  {'best_val_loss':>14}  {'final_train_loss':>16}")
        for row in table:
            print(f"{row['mask_ratio']:>6g}  {row['axis']:<8}  "
                  f"{row['best_val_loss']:>14.6f}  {row['final_train_loss']:>16.6f}")

    report.save(out / "pretrain-report.json")
    return 0


def cmd_train(args) -> int:
    cfg = load_experiment_config(args.config)
    out = _out_dir(cfg)
    _save_config_snapshot(cfg, out)
    ds, _ = _prepare_dataset(cfg)
    report = RunReport(phase="train", config=cfg.to_dict())
    report.artifacts["dataset_fingerprint"] = dataset_fingerprint(ds)

    branch_paths = _branch_paths(cfg, out, args)
    branches = _load_branches(branch_paths)
    cache_dir = str(out / "cache")
    _, val_bounds, _ = split_bounds(ds)
    eval_stride = cfg.train_val_stride or cfg.train_sample_stride
    metrics = {}

    def run(tag: str, ckpt_name: str, curve_name: str,
            use_spatial: bool, use_temporal: bool, slot_ckpts: dict):
        fc_cfg = _forecast_config(cfg, use_spatial, use_temporal, cache_dir)
        t0 = time.perf_counter()
        ckpt, curve = train_forecaster(ds, slot_ckpts.get("spatial"),
                                       slot_ckpts.get("temporal"), fc_cfg)
        seconds = time.perf_counter() - t0
        ckpt_path = out / ckpt_name
        save_forecaster_checkpoint(ckpt_path, ckpt)
        curve_path = out / curve_name
        _write_loss_csv(curve_path, curve)
        report.artifacts[f"forecaster_{tag}"] = ckpt_path.name
        report.loss_curves[f"train_{tag}"] = curve_path.name
        report.timings_sec[f"train_{tag}"] = round(seconds, 3)
        _, _, _, m = _eval_metrics(ds, ckpt, slot_ckpts, val_bounds, eval_stride,
                                   cfg.zero_threshold, cfg.horizon)
        m["best_val_mae_normalized"] = ckpt.metadata["best_val_mae"]
        metrics[tag] = m
        print(f"trained {tag}: val MAE {m['mae']:.6f} (de-normalized), "
              f"{ckpt.metadata['steps']} steps, {seconds:.1f}s")
        return ckpt

    if cfg.ablation == "none":
        run("baseline", "forecaster.ckpt", "train-loss.csv", False, False, {})
    else:
        run("augmented", "forecaster.ckpt", "train-loss.csv",
            "spatial" in branches, "temporal" in branches, branches)
        if args.compare:
            run("baseline", "baseline.ckpt", "train-baseline-loss.csv", False, False, {})

    report.metrics = metrics
    report.save(out / "train-report.json")
    print(f"report written to {out / 'train-report.json'}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_experiment_config(args.config)
    out = _out_dir(cfg)
    ds, _ = _prepare_dataset(cfg)

    fc_path = Path(args.forecaster) if args.forecaster else out / "forecaster.ckpt"
    _require_files({"forecaster checkpoint": fc_path})
    fc = load_forecaster_checkpoint(fc_path)

    # branch checkpoints default to the files the recorded source axes imply
    overrides = {"spatial": args.spatial, "temporal": args.temporal,
                 "mixed": getattr(args, "mixed", None)}
    branch_axes = fc.metadata.get("branch_axes", {})
    slot_paths = {}
    for slot in fc.params.branch_dims:
        axis = branch_axes.get(slot, slot)
        path = overrides.get(axis) or out / f"{axis}.ckpt"
        slot_paths[slot] = (Path(path), axis)
    branches = _load_branches(slot_paths)

    split_range = _split_range(ds, args.split)
    t0 = time.perf_counter()
    anchors, preds_d, truths_d, metrics = _eval_metrics(
        ds, fc, branches, split_range, args.stride, cfg.zero_threshold, cfg.horizon)
    seconds = time.perf_counter() - t0

    samples_path = out / "eval-samples.csv"
    with open(samples_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["anchor", "mae", "rmse"])
        for i, anchor in enumerate(anchors):
            writer.writerow([int(anchor),
                             repr(metric_mae(preds_d[i], truths_d[i])),
                             repr(metric_rmse(preds_d[i], truths_d[i]))])

    document = {
        "phase": "eval",
        "split": args.split,
        "n_samples": int(len(anchors)),
        "stride": int(args.stride),
        "zero_threshold": cfg.zero_threshold,
        "denormalized": True,
        "metrics": metrics,
        "artifacts": {
            "forecaster": _artifact_ref(fc_path, out),
            "samples_csv": samples_path.name,
            **{f"{slot}_checkpoint": _artifact_ref(p, out)
               for slot, (p, _) in slot_paths.items()},
        },
        "dataset_fingerprint": dataset_fingerprint(ds),
        "config": cfg.to_dict(),
        "environment": environment_fingerprint(),
        "timings_sec": {"eval": round(seconds, 3)},
    }
    if args.split == "train":
        document["warning"] = "metrics were computed on the training split"
    metrics_path = out / "eval-metrics.json"
    with open(metrics_path, "w") as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write("\n")

    mape = metrics["mape"]
    print(f"{args.split} split, {len(anchors)} samples: "
          f"MAE {metrics['mae']:.6f}  RMSE {metrics['rmse']:.6f}  "
          f"MAPE {'undefined' if mape is None else f'{mape:.3f}%'}")
    print(f"metrics written to {metrics_path}")
    return 0


# ---------------------------------------------------------------- report


def _reconstruct_window(ds, ckpt, cfg: ExperimentConfig, window_start: int, probe_index: int):
    """Masked forward pass over one long window: (reconstruction, mask spec)."""
    arch = ckpt.arch
    window = ds.values[window_start:window_start + arch.t_long]
    patches = patchify(window, arch.patch_len)
    t_p, n = arch.t_patches, ds.n_nodes
    extent = {"spatial": n, "temporal": t_p, "mixed": t_p * n}[ckpt.axis]
    spec = sample_mask(ckpt.axis, extent, cfg.mask_ratio,
                       seed=(cfg.seed, 9, probe_index), mode=cfg.mask_mode)
    params = ckpt.params
    pos = positional_encoding(t_p, n, arch.embed_dim)
    with eg.using_dtype(params["embed.w"].values.dtype), eg.no_grad():
        e = eg.add(eg.add(eg.matmul(Tensor(patches), params["embed.w"]),
                          params["embed.b"]), Tensor(pos))
        h = encode(apply_mask(e, spec), params, ckpt.axis)
        _, full = pad_and_decode(h, spec, params, t_p, n, return_full=True)
    recon = full.values
    if ckpt.axis == "mixed":
        recon = recon.reshape(t_p, n, arch.patch_width)
    return unpatchify(recon, arch.patch_len, arch.channels), spec


def _step_masked(spec, step_rel: int, node: int, patch_len: int, n_nodes: int) -> bool:
    patch = step_rel // patch_len
    masked = set(spec.masked_indices)
    if spec.axis == "spatial":
        return node in masked
    if spec.axis == "temporal":
        return patch in masked
    return patch * n_nodes + node in masked


def cmd_report(args) -> int:
    cfg = load_experiment_config(args.config)
    out = _out_dir(cfg)
    ds, manifest = _prepare_dataset(cfg)
    rep_dir = out / "report"
    rep_dir.mkdir(exist_ok=True)
    node = args.node
    if not 0 <= node < ds.n_nodes:
        raise ConfigError([f"--node must lie in [0, {ds.n_nodes}), got {node}"])
    norm = ds.norm

    required = {"forecaster checkpoint": out / "forecaster.ckpt"}
    branch_paths = _branch_paths(cfg, out, args)
    for slot, (path, axis) in branch_paths.items():
        required[f"{axis} checkpoint"] = path
    _require_files(required)

    fc = load_forecaster_checkpoint(out / "forecaster.ckpt")
    branches = _load_branches(branch_paths)
    if set(branches) != set(fc.params.branch_dims):
        raise DataError(
            f"forecaster uses branches {sorted(fc.params.branch_dims)} but the "
            f"config's ablation {cfg.ablation!r} supplies {sorted(branches)}")
    written = []

    for path in sorted(out.glob("pretrain-*-loss.csv")) + sorted(out.glob("train-*loss.csv")):
        target = rep_dir / path.name
        shutil.copyfile(path, target)
        written.append(target)

    # reconstruction overlays: one long validation window per encoder
    _, val_bounds, _ = split_bounds(ds)
    if val_bounds[1] - val_bounds[0] < cfg.t_long:
        raise DataError(f"validation split {val_bounds} is shorter than t_long={cfg.t_long}")
    window_start = val_bounds[0]
    for i, (slot, ckpt) in enumerate(sorted(branches.items())):
        recon, spec = _reconstruct_window(ds, ckpt, cfg, window_start, i)
        truth = ds.values[window_start:window_start + cfg.t_long]
        path = rep_dir / f"overlay-reconstruction-{ckpt.axis}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "truth", "reconstruction", "masked"])
            for rel in range(cfg.t_long):
                writer.writerow([
                    window_start + rel,
                    repr(float(norm.invert(truth[rel])[node, 0])),
                    repr(float(norm.invert(recon[rel])[node, 0])),
                    int(_step_masked(spec, rel, node, cfg.patch_len, ds.n_nodes)),
                ])
        written.append(path)

    # prediction overlay: the first validation anchor
    def predict_anchors(anchor_list):
        shorts = np.stack([ds.values[a - cfg.t_short + 1:a + 1] for a in anchor_list])
        starts = [a - cfg.t_long + 1 for a in anchor_list]
        blocks = {slot: branch_features(ds, starts, ckpt, cfg.t_long, cfg.tail)
                  for slot, ckpt in branches.items()}
        params = fc.params
        with eg.using_dtype(params["in.w"].values.dtype), eg.no_grad():
            feats = {slot: Tensor(block) for slot, block in blocks.items()}
            return forecaster_forward(Tensor(shorts), params, feats).values

    first_anchor = val_bounds[0] + cfg.t_long - 1
    if first_anchor + cfg.horizon >= val_bounds[1]:
        raise DataError(f"validation split {val_bounds} has no full forecast sample")
    pred = predict_anchors([first_anchor])[0]
    path = rep_dir / "overlay-prediction.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "truth", "prediction"])
        for k in range(cfg.horizon):
            t_abs = first_anchor + 1 + k
            writer.writerow([
                t_abs,
                repr(float(norm.invert(ds.values[t_abs])[node, 0])),
                repr(float(norm.invert(pred[k])[node, 0])),
            ])
    written.append(path)

    # mirage-pair overlays from the generator manifest
    usable = []
    for pair in manifest:
        a = pair["window_start_a"] + cfg.t_short - 1
        b = pair["window_start_b"] + cfg.t_short - 1
        if min(a, b) - cfg.t_long + 1 >= 0 and max(a, b) + cfg.horizon < ds.t_total:
            usable.append((a, b, pair["divergence_step"]))
        if len(usable) == args.pairs:
            break
    for i, (a, b, div) in enumerate(usable):
        preds = predict_anchors([a, b])
        path = rep_dir / f"overlay-mirage-{i}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rel_step", "truth_a", "truth_b", "pred_a", "pred_b",
                             "after_divergence"])
            for rel in range(cfg.t_short + cfg.horizon):
                ta = a - cfg.t_short + 1 + rel
                tb = b - cfg.t_short + 1 + rel
                future = rel - cfg.t_short
                row = [
                    rel,
                    repr(float(norm.invert(ds.values[ta])[node, 0])),
                    repr(float(norm.invert(ds.values[tb])[node, 0])),
                ]
                if future >= 0:
                    row.append(repr(float(norm.invert(preds[0][future])[node, 0])))
                    row.append(repr(float(norm.invert(preds[1][future])[node, 0])))
                else:
                    row.extend(["", ""])
                row.append(int(rel >= div))
                writer.writerow(row)
        written.append(path)
    if manifest and not usable:
        print("note: no mirage pair leaves room for a full long window; overlays skipped")

    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="axmae",
        description="Axis-wise masked pre-training for spatiotemporal forecasting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset from a spec file")
    p.add_argument("spec", help="JSON synthetic-series spec")
    p.add_argument("--out", default="synth.bin", help="output dataset file")
    p.add_argument("--manifest", default=None,
                   help="mirage manifest path (default: <out>.manifest.json)")

    p = sub.add_parser("pretrain", help="pre-train the masked autoencoders")
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--sweep-r", default=None, metavar="R1,R2,...",
                   help="run each mask ratio and emit a comparison table")

    p = sub.add_parser("train", help="train the downstream forecaster")
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--spatial", default=None, help="spatial encoder checkpoint")
    p.add_argument("--temporal", default=None, help="temporal encoder checkpoint")
    p.add_argument("--mixed", default=None, help="joint encoder checkpoint (ablation 'mixed')")
    p.add_argument("--compare", action="store_true",
                   help="also train the no-branch baseline and report both")

    p = sub.add_parser("eval", help="evaluate a trained forecaster on a split")
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--forecaster", default=None, help="forecaster checkpoint")
    p.add_argument("--spatial", default=None, help="spatial encoder checkpoint")
    p.add_argument("--temporal", default=None, help="temporal encoder checkpoint")
    p.add_argument("--mixed", default=None, help="joint encoder checkpoint")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--stride", type=int, default=1, help="sample stride within the split")

    p = sub.add_parser("report", help="emit plot-ready CSV overlays for a finished run")
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--spatial", default=None, help="spatial encoder checkpoint")
    p.add_argument("--temporal", default=None, help="temporal encoder checkpoint")
    p.add_argument("--mixed", default=None, help="joint encoder checkpoint")
    p.add_argument("--node", type=int, default=0, help="sensor index for overlays")
    p.add_argument("--pairs", type=int, default=3, help="max mirage pairs to overlay")
    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

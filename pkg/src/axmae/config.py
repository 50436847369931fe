"""Experiment configuration and run reporting.

A config is one JSON document with explicit defaults for every knob. All
cross-field violations are collected and reported together, before any
compute starts. Reports capture the resolved config, artifact paths, loss
curves, metrics, phase timings, and an environment fingerprint, so every
reported number can be traced to a file on disk.
"""

from __future__ import annotations

import json
import platform
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunReport",
    "experiment_config_from_dict",
    "load_experiment_config",
    "environment_fingerprint",
]

ABLATION_MODES = ("full", "s-only", "t-only", "mixed", "none")


class ConfigError(Exception):
    """Invalid experiment configuration; carries every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    """Everything one experiment needs, with defaults spelled out."""

    # dataset source: exactly one of dataset_path / synth
    dataset_path: str | None = None
    dataset_layout: str = "binary"
    nan_policy: str = "reject"
    synth: dict | None = None
    split_ratios: tuple = (0.6, 0.2, 0.2)

    # window geometry: the short window equals one patch
    patch_len: int = 12
    t_long: int = 864
    t_short: int = 12
    horizon: int = 12
    tail: int = 1

    # model widths
    embed_dim: int = 96
    heads: int = 4
    encoder_layers: int = 4
    hidden: int = 64
    dilations: tuple = (1, 2, 4, 4)

    # masking
    mask_ratio: float = 0.25
    mask_mode: str = "fixed"
    ablation: str = "full"

    # pre-training phase
    pretrain_epochs: int = 10
    pretrain_batch_size: int = 8
    pretrain_learning_rate: float = 1e-3
    pretrain_window_stride: int = 12
    pretrain_max_val_windows: int = 32

    # forecaster phase
    train_epochs: int = 30
    train_batch_size: int = 8
    train_learning_rate: float = 1e-3
    train_sample_stride: int = 1
    train_val_stride: int | None = None
    train_max_val_samples: int = 256
    train_patience: int = 5

    zero_threshold: float = 1e-2
    precision: str = "float32"
    seed: int = 0
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.split_ratios = tuple(float(r) for r in self.split_ratios)
        self.dilations = tuple(int(d) for d in self.dilations)

    def validate(self) -> None:
        """Raise ConfigError listing every violated invariant."""
        p = []
        sources = (self.dataset_path is not None) + (self.synth is not None)
        if sources != 1:
            p.append("exactly one of dataset_path or synth must be set")
        if self.dataset_layout not in ("binary", "csv"):
            p.append(f"dataset_layout must be 'binary' or 'csv', got {self.dataset_layout!r}")
        if self.nan_policy not in ("reject", "forward_fill"):
            p.append(f"nan_policy must be 'reject' or 'forward_fill', got {self.nan_policy!r}")
        if len(self.split_ratios) != 3 or any(r < 0 for r in self.split_ratios) \
                or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            p.append(f"split_ratios must be three non-negative values summing to 1, "
                     f"got {self.split_ratios}")

        if self.patch_len < 1:
            p.append("patch_len must be >= 1")
        elif self.t_long % self.patch_len != 0:
            p.append(f"t_long ({self.t_long}) must be divisible by patch_len ({self.patch_len})")
        if self.t_short != self.patch_len:
            p.append(f"t_short ({self.t_short}) must equal patch_len ({self.patch_len}) "
                     "so the forecasting input aligns with one patch")
        if self.t_short != 1 + sum(self.dilations):
            p.append(f"dilations {self.dilations} cover {1 + sum(self.dilations)} steps, "
                     f"but t_short is {self.t_short}")
        if self.horizon < 1:
            p.append("horizon must be >= 1")
        if self.tail < 1 or self.tail > max(1, self.t_long // max(1, self.patch_len)):
            p.append(f"tail must lie in [1, t_long/patch_len], got {self.tail}")

        if self.embed_dim % 4 != 0:
            p.append(f"embed_dim must be divisible by 4, got {self.embed_dim}")
        if self.heads < 1 or self.embed_dim % self.heads != 0:
            p.append(f"embed_dim ({self.embed_dim}) must be divisible by heads ({self.heads})")
        if self.encoder_layers < 1:
            p.append("encoder_layers must be >= 1")
        if self.hidden < 1:
            p.append("hidden must be >= 1")

        if not 0.0 < self.mask_ratio < 1.0:
            p.append(f"mask_ratio must lie in (0, 1), got {self.mask_ratio}")
        if self.mask_mode not in ("fixed", "bernoulli"):
            p.append(f"mask_mode must be 'fixed' or 'bernoulli', got {self.mask_mode!r}")
        if self.ablation not in ABLATION_MODES:
            p.append(f"ablation must be one of {ABLATION_MODES}, got {self.ablation!r}")

        for name in ("pretrain_epochs", "pretrain_batch_size", "pretrain_window_stride",
                     "train_epochs", "train_batch_size", "train_sample_stride"):
            if getattr(self, name) < 1:
                p.append(f"{name} must be >= 1")
        for name in ("pretrain_learning_rate", "train_learning_rate"):
            if getattr(self, name) <= 0:
                p.append(f"{name} must be positive")
        if self.train_val_stride is not None and self.train_val_stride < 1:
            p.append("train_val_stride must be >= 1 when set")
        if self.train_patience < 0:
            p.append("train_patience must be >= 0")
        if self.pretrain_max_val_windows < 0 or self.train_max_val_samples < 0:
            p.append("validation caps must be >= 0")
        if self.zero_threshold < 0:
            p.append("zero_threshold must be >= 0")
        if self.precision not in ("float32", "float64"):
            p.append(f"precision must be 'float32' or 'float64', got {self.precision!r}")

        if p:
            raise ConfigError(p)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split_ratios"] = list(self.split_ratios)
        d["dilations"] = list(self.dilations)
        return d


def experiment_config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate a config, rejecting unknown keys by name."""
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError([f"unknown config key {k!r}" for k in unknown])
    cfg = ExperimentConfig(**raw)
    cfg.validate()
    return cfg


def load_experiment_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config {path} is not valid JSON: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([f"config {path} must hold a JSON object"])
    return experiment_config_from_dict(raw)


def environment_fingerprint() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


@dataclass
class RunReport:
    """One command's outcome, written as sorted JSON next to its artifacts."""

    phase: str
    config: dict
    artifacts: dict = field(default_factory=dict)
    loss_curves: dict = field(default_factory=dict)
    metrics: dict | None = None
    notes: list = field(default_factory=list)
    timings_sec: dict = field(default_factory=dict)
    environment: dict = field(default_factory=environment_fingerprint)

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "config": self.config,
            "artifacts": self.artifacts,
            "loss_curves": self.loss_curves,
            "metrics": self.metrics,
            "notes": self.notes,
            "timings_sec": self.timings_sec,
            "environment": self.environment,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

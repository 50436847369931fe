"""Patch construction, patch embedding, and the two-axis positional code.

A long window of T_long steps is cut into T_p = T_long / L non-overlapping
patches of length L. Each patch (one node, L steps, C channels) is flattened
and projected to the model width D by a single affine map shared across all
positions. The positional code splits the D channels in half: the first half
varies only with the patch index, the second half only with the node index,
each as interleaved sin/cos pairs at geometrically spaced frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .engine import Tensor, add, matmul

__all__ = [
    "PatchConfig",
    "patchify",
    "unpatchify",
    "patch_embed",
    "positional_encoding",
    "input_embedding",
]


@dataclass(frozen=True)
class PatchConfig:
    """Patch length L, model width D, and the long-window length T_long."""

    length: int = 12
    embed_dim: int = 96
    t_long: int = 864

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"patch length must be >= 1, got {self.length}")
        if self.t_long % self.length != 0:
            raise ValueError(
                f"t_long ({self.t_long}) must be divisible by patch length ({self.length})"
            )
        if self.embed_dim % 4 != 0:
            raise ValueError(f"embed_dim must be divisible by 4, got {self.embed_dim}")

    @property
    def t_patches(self) -> int:
        return self.t_long // self.length


def patchify(x: np.ndarray, length: int) -> np.ndarray:
    """(T, N, C) -> (T_p, N, L*C) with element (p, n, l*C + c) = x[p*L + l, n, c].

    Accepts a leading batch axis: (B, T, N, C) -> (B, T_p, N, L*C).
    """
    x = np.asarray(x)
    batched = x.ndim == 4
    if not batched and x.ndim != 3:
        raise ValueError(f"patchify expects (T, N, C) or (B, T, N, C), got {x.shape}")
    t, n, c = x.shape[-3:]
    if t % length != 0:
        raise ValueError(f"window length {t} is not divisible by patch length {length}")
    t_p = t // length
    lead = x.shape[:-3]
    out = x.reshape(*lead, t_p, length, n, c)
    out = np.moveaxis(out, -3, -2)  # (..., T_p, N, L, C)
    return np.ascontiguousarray(out).reshape(*lead, t_p, n, length * c)


def unpatchify(patches: np.ndarray, length: int, channels: int = 1) -> np.ndarray:
    """Inverse of :func:`patchify`."""
    patches = np.asarray(patches)
    t_p, n, lc = patches.shape[-3:]
    if lc % channels != 0 or lc // channels != length:
        raise ValueError(f"patch width {lc} does not factor into L={length} x C={channels}")
    lead = patches.shape[:-3]
    out = patches.reshape(*lead, t_p, n, length, channels)
    out = np.moveaxis(out, -2, -3)  # (..., T_p, L, N, C)
    return np.ascontiguousarray(out).reshape(*lead, t_p * length, n, channels)


def patch_embed(patches, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine projection of flattened patches to the model width.

    The same weights apply at every (patch, node) position.
    """
    p = patches if isinstance(patches, Tensor) else Tensor(np.asarray(patches))
    if p.shape[-1] != weight.shape[0]:
        raise ValueError(
            f"patch width {p.shape[-1]} does not match embedding weight rows {weight.shape[0]}"
        )
    return add(matmul(p, weight), bias)


@lru_cache(maxsize=32)
def _positional_table(t_p: int, n: int, d: int) -> np.ndarray:
    half = d // 2
    quarter = d // 4
    table = np.zeros((t_p, n, d))
    # geometric frequency ladder shared by both halves
    rates = np.power(10000.0, -4.0 * np.arange(quarter) / d)
    t_arg = np.arange(t_p)[:, None] * rates[None, :]  # (T_p, D/4)
    n_arg = np.arange(n)[:, None] * rates[None, :]  # (N, D/4)
    table[:, :, 0:half:2] = np.sin(t_arg)[:, None, :]
    table[:, :, 1:half:2] = np.cos(t_arg)[:, None, :]
    table[:, :, half::2] = np.sin(n_arg)[None, :, :]
    table[:, :, half + 1::2] = np.cos(n_arg)[None, :, :]
    table.setflags(write=False)
    return table


def positional_encoding(t_p: int, n: int, d: int) -> np.ndarray:
    """Deterministic (T_p, N, D) positional table; cached, read-only.

    First D/2 channels depend only on the patch index, last D/2 only on the
    node index. Every entry lies in [-1, 1].
    """
    if d % 4 != 0:
        raise ValueError(f"positional encoding width must be divisible by 4, got {d}")
    if t_p < 1 or n < 1:
        raise ValueError(f"positional encoding extents must be >= 1, got ({t_p}, {n})")
    return _positional_table(t_p, n, d)


def input_embedding(x, cfg: PatchConfig, weight: Tensor, bias: Tensor,
                    channels: int = 1, include_positional: bool = True) -> Tensor:
    """Patchify + project + add the positional table.

    ``x`` is a raw (T_long, N, C) window or a pre-patchified array/Tensor of
    shape (..., T_p, N, L*C). ``include_positional=False`` is a diagnostic
    mode that returns the content embedding alone.
    """
    if isinstance(x, Tensor):
        patches = x
    else:
        x = np.asarray(x)
        time_axis = 0 if x.ndim == 3 else 1
        if x.shape[time_axis] == cfg.t_long and x.shape[-1] == channels:
            patches = Tensor(patchify(x, cfg.length))
        elif x.shape[-1] == cfg.length * channels:
            patches = Tensor(x)  # already patchified
        else:
            raise ValueError(
                f"input shape {x.shape} matches neither a raw window of length "
                f"{cfg.t_long} nor patches of width {cfg.length * channels}"
            )
    embedded = patch_embed(patches, weight, bias)
    if not include_positional:
        return embedded
    t_p, n = embedded.shape[-3], embedded.shape[-2]
    pos = Tensor(positional_encoding(t_p, n, cfg.embed_dim))
    return add(embedded, pos)

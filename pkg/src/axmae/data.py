"""Series ingestion, normalization, splitting, window sampling, and synthesis.

On-disk formats
---------------
CSV: one row per time step, one column per sensor, no header, single channel.

Binary: a 12-byte header of three little-endian uint32 values
``(T_total, N, C)`` followed by ``T_total * N * C`` little-endian float32
values in row-major (time, node, channel) order.

Mirage manifest: JSON with a ``pairs`` list; each record is
``{"window_start_a", "window_start_b", "divergence_step"}`` where
``window_start_*`` is the absolute index of the first step of the planted
12-step input window and ``divergence_step`` is the offset from the window
start at which the two futures separate.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataError",
    "NormStats",
    "SeriesDataset",
    "ForecastSample",
    "SynthSpec",
    "LayoutDescriptor",
    "load_dataset",
    "save_series_binary",
    "save_series_csv",
    "fit_and_apply_zscore",
    "split_bounds",
    "iterate_samples",
    "synth_generate",
    "synth_spec_from_dict",
    "dataset_fingerprint",
]


class DataError(Exception):
    """Raised for malformed inputs, shape mismatches, and bad series values."""


@dataclass(frozen=True)
class NormStats:
    """Per-channel z-score statistics fitted on the training split only."""

    mean: tuple
    std: tuple

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - np.asarray(self.mean)) / np.asarray(self.std)

    def invert(self, values: np.ndarray) -> np.ndarray:
        return values * np.asarray(self.std) + np.asarray(self.mean)


@dataclass
class SeriesDataset:
    """A (T_total, N, C) series plus split ratios and normalization state.

    Values are frozen after construction; transforms return new datasets.
    """

    values: np.ndarray
    split_ratios: tuple = (0.6, 0.2, 0.2)
    interval_minutes: float = 5.0
    norm: NormStats | None = None
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3:
            raise DataError(f"series must have shape (T, N, C), got {v.shape}")
        ratios = tuple(float(r) for r in self.split_ratios)
        if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise DataError(f"split ratios must be three non-negative values summing to 1, got {ratios}")
        v = v.copy()
        v.setflags(write=False)
        self.values = v
        self.split_ratios = ratios

    @property
    def t_total(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class ForecastSample:
    """Aligned (short input, long input, target) views for one anchor step.

    Both inputs end at ``anchor``; the target covers the following steps.
    """

    short_input: np.ndarray
    long_input: np.ndarray
    target: np.ndarray
    anchor: int


@dataclass
class LayoutDescriptor:
    """Declared file layout; any dimension left as None is taken from the file."""

    kind: str = "binary"  # "binary" or "csv"
    t_total: int | None = None
    n_nodes: int | None = None
    channels: int | None = None
    nan_policy: str = "reject"  # "reject" or "forward_fill"


# ---------------------------------------------------------------- loading


_BIN_HEADER = np.dtype("<u4")
_BIN_VALUE = np.dtype("<f4")


def save_series_binary(path, values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.ndim == 2:
        values = values[:, :, None]
    t, n, c = values.shape
    with open(path, "wb") as fh:
        fh.write(np.array([t, n, c], dtype=_BIN_HEADER).tobytes())
        fh.write(np.ascontiguousarray(values, dtype=_BIN_VALUE).tobytes())


def save_series_csv(path, values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.ndim == 3:
        if values.shape[2] != 1:
            raise DataError("CSV layout only supports a single channel")
        values = values[:, :, 0]
    np.savetxt(path, values, delimiter=",", fmt="%.9g")


def load_dataset(path, layout: LayoutDescriptor,
                 split_ratios=(0.6, 0.2, 0.2), interval_minutes: float = 5.0) -> SeriesDataset:
    """Read a series file into a SeriesDataset, validating the declared layout."""
    if layout.kind == "binary":
        raw = _read_binary(path, layout)
    elif layout.kind == "csv":
        raw = _read_csv(path, layout)
    else:
        raise DataError(f"unknown layout kind {layout.kind!r}")

    for name, declared, actual in (
        ("T_total", layout.t_total, raw.shape[0]),
        ("N", layout.n_nodes, raw.shape[1]),
        ("C", layout.channels, raw.shape[2]),
    ):
        if declared is not None and declared != actual:
            raise DataError(f"layout mismatch: declared {name}={declared}, file has {actual}")

    raw = _handle_missing(raw, layout.nan_policy)
    return SeriesDataset(raw, split_ratios=split_ratios, interval_minutes=interval_minutes)


def _read_binary(path, layout: LayoutDescriptor) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(blob) < 12:
        raise DataError(f"{path}: file too short for a binary series header")
    t, n, c = (int(x) for x in np.frombuffer(blob[:12], dtype=_BIN_HEADER))
    expected = 12 + t * n * c * 4
    if t == 0 or n == 0 or c == 0:
        raise DataError(f"{path}: header declares an empty series ({t}, {n}, {c})")
    if len(blob) != expected:
        raise DataError(
            f"{path}: payload size {len(blob) - 12} bytes does not match "
            f"header ({t}, {n}, {c}) = {expected - 12} bytes"
        )
    flat = np.frombuffer(blob, dtype=_BIN_VALUE, offset=12)
    return flat.astype(np.float64).reshape(t, n, c)


def _read_csv(path, layout: LayoutDescriptor) -> np.ndarray:
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{path}: malformed CSV: {exc}") from exc
    if raw.size == 0:
        raise DataError(f"{path}: empty series file")
    return raw[:, :, None]


def _handle_missing(values: np.ndarray, policy: str) -> np.ndarray:
    finite = np.isfinite(values)
    if finite.all():
        return values
    if policy == "reject":
        bad = int((~finite).sum())
        raise DataError(f"series contains {bad} non-finite values (nan_policy='reject')")
    if policy != "forward_fill":
        raise DataError(f"unknown nan_policy {policy!r}")
    filled = values.copy()
    t_total = filled.shape[0]
    for n in range(filled.shape[1]):
        for c in range(filled.shape[2]):
            col = filled[:, n, c]
            ok = np.isfinite(col)
            if not ok[0]:
                raise DataError(f"node {n} channel {c} starts with a missing value; cannot forward-fill")
            idx = np.where(ok, np.arange(t_total), 0)
            np.maximum.accumulate(idx, out=idx)
            filled[:, n, c] = col[idx]
    return filled


# ---------------------------------------------------------------- transforms


def split_bounds(ds: SeriesDataset) -> tuple:
    """Contiguous (train, val, test) index ranges via floor of cumulative ratios."""
    t = ds.t_total
    r1, r2, _ = ds.split_ratios
    # nudge before flooring so binary representation noise in the ratios
    # (0.7 + 0.1 -> 0.7999...) cannot shift a boundary
    b1 = int(np.floor(t * r1 + 1e-9))
    b2 = int(np.floor(t * (r1 + r2) + 1e-9))
    return (0, b1), (b1, b2), (b2, t)


def fit_and_apply_zscore(ds: SeriesDataset) -> SeriesDataset:
    """Fit per-channel mean/std on the training split and normalize the whole series."""
    (t0, t1), _, _ = split_bounds(ds)
    train = ds.values[t0:t1]
    if train.size == 0:
        raise DataError("training split is empty; cannot fit normalization")
    mean = train.mean(axis=(0, 1))
    std = train.std(axis=(0, 1))  # population std
    if np.any(std <= 0):
        raise DataError(f"training split has zero variance in channel(s) {np.where(std <= 0)[0].tolist()}")
    stats = NormStats(mean=tuple(mean.tolist()), std=tuple(std.tolist()))
    out = SeriesDataset(stats.apply(ds.values), split_ratios=ds.split_ratios,
                        interval_minutes=ds.interval_minutes)
    out.norm = stats
    out.normalized = True
    return out


def iterate_samples(ds: SeriesDataset, split_range, t_short: int = 12,
                    horizon: int = 12, t_long: int = 864, stride: int = 1):
    """Enumerate forecast samples whose lookback and target both fit the range.

    With stride 1 the count is ``span - t_long - horizon + 1`` (never
    negative). Windows that would reach before the range start are dropped,
    not padded, so no sample crosses a split boundary. Returned arrays are
    views into the dataset.
    """
    if t_long < t_short:
        raise DataError(f"t_long ({t_long}) must be >= t_short ({t_short})")
    if stride < 1:
        raise DataError("stride must be >= 1")
    start, end = split_range
    if not (0 <= start <= end <= ds.t_total):
        raise DataError(f"split range {split_range} outside dataset of length {ds.t_total}")
    first = start + t_long - 1
    last = end - horizon - 1
    if first > last:
        warnings.warn(
            f"split range {split_range} too short for t_long={t_long}, horizon={horizon}; "
            "no samples produced", RuntimeWarning, stacklevel=2)
        return []
    samples = []
    v = ds.values
    for t in range(first, last + 1, stride):
        samples.append(ForecastSample(
            short_input=v[t - t_short + 1:t + 1],
            long_input=v[t - t_long + 1:t + 1],
            target=v[t + 1:t + 1 + horizon],
            anchor=t,
        ))
    return samples


def dataset_fingerprint(ds: SeriesDataset) -> str:
    h = hashlib.sha256()
    h.update(repr(ds.values.shape).encode())
    h.update(np.ascontiguousarray(ds.values, dtype=np.float64).tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------- synthesis


@dataclass
class SynthSpec:
    """Deterministic synthetic-series description.

    Each node is a daily sinusoid (per-node amplitude and phase) plus a
    linear mixture of shared smooth latent signals plus white noise. A
    ``mirage_fraction`` > 0 plants window pairs whose 12-step inputs are
    identical while their futures diverge; only the long history tells the
    two members apart.
    """

    n_nodes: int
    n_steps: int
    daily_period: int = 288
    node_amplitudes: tuple = ()
    node_phases: tuple = ()
    latent_mix: tuple = ()  # (n_nodes, k) mixing weights
    noise_std: float = 0.0
    mirage_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 1 or self.n_steps < 1:
            raise DataError("synthetic spec needs n_nodes >= 1 and n_steps >= 1")
        if self.daily_period < 2:
            raise DataError("daily_period must be >= 2")
        if not 0.0 <= self.mirage_fraction <= 1.0:
            raise DataError("mirage_fraction must lie in [0, 1]")
        if self.noise_std < 0:
            raise DataError("noise_std must be non-negative")
        amps = tuple(float(a) for a in self.node_amplitudes) or (0.0,) * self.n_nodes
        phases = tuple(float(p) for p in self.node_phases) or (0.0,) * self.n_nodes
        if len(amps) != self.n_nodes or len(phases) != self.n_nodes:
            raise DataError("node_amplitudes / node_phases must have one entry per node")
        mix = tuple(tuple(float(w) for w in row) for row in self.latent_mix)
        if mix and len(mix) != self.n_nodes:
            raise DataError("latent_mix must have one row per node")
        self.node_amplitudes = amps
        self.node_phases = phases
        self.latent_mix = mix

    @property
    def n_latents(self) -> int:
        return len(self.latent_mix[0]) if self.latent_mix else 0


# planted mirage geometry: 24 marker steps, then the 12-step input window,
# then 12 divergent future steps; slots are spaced so plants never overlap
# and every anchor ends on a 12-step patch boundary.
MIRAGE_SHORT = 12
MIRAGE_MARKER = 24
MIRAGE_FUTURE = 12
MIRAGE_SLOT = 48


def synth_generate(spec: SynthSpec):
    """Build the series described by ``spec``.

    Returns ``(dataset, manifest)`` where manifest is a list of planted
    mirage pair records (empty when ``mirage_fraction`` is 0). Output is a
    pure function of the spec: identical specs give bitwise-identical data.
    """
    root = np.random.SeedSequence(spec.seed)
    latent_seed, noise_seed, mirage_seed = root.spawn(3)

    t = np.arange(spec.n_steps, dtype=np.float64)
    amps = np.asarray(spec.node_amplitudes)
    phases = np.asarray(spec.node_phases)
    values = amps[None, :] * np.sin(2.0 * np.pi * t[:, None] / spec.daily_period + phases[None, :])

    if spec.n_latents:
        latents = _smooth_latents(spec, np.random.default_rng(latent_seed))
        values += latents @ np.asarray(spec.latent_mix).T

    if spec.noise_std > 0:
        rng = np.random.default_rng(noise_seed)
        values += rng.normal(scale=spec.noise_std, size=values.shape)

    manifest = []
    if spec.mirage_fraction > 0:
        manifest = _plant_mirages(values, spec, np.random.default_rng(mirage_seed))

    ds = SeriesDataset(values[:, :, None])
    return ds, manifest


def _smooth_latents(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Latents are sums of slow sinusoids: smooth, aperiodic against the day."""
    k = spec.n_latents
    t = np.arange(spec.n_steps, dtype=np.float64)
    out = np.zeros((spec.n_steps, k))
    for j in range(k):
        periods = rng.uniform(2.0 * spec.daily_period, 8.0 * spec.daily_period, size=3)
        offs = rng.uniform(0.0, 2.0 * np.pi, size=3)
        for p, o in zip(periods, offs):
            out[:, j] += 0.8 * np.sin(2.0 * np.pi * t / p + o)
    return out


def _mirage_scales(spec: SynthSpec) -> np.ndarray:
    # planted patterns scale with each node's own magnitude, floored so
    # zero-amplitude nodes still carry a visible plant
    return np.maximum(np.abs(np.asarray(spec.node_amplitudes)), 0.5)


def _candidate_anchors(n_steps: int) -> np.ndarray:
    first = MIRAGE_SLOT - 1
    anchors = np.arange(first, n_steps - MIRAGE_FUTURE, MIRAGE_SLOT)
    return anchors


def _plant_mirages(values: np.ndarray, spec: SynthSpec, rng: np.random.Generator):
    candidates = _candidate_anchors(spec.n_steps)
    n_pairs = min(int(np.floor(spec.mirage_fraction * len(candidates))), len(candidates) // 2)
    if n_pairs == 0:
        return []
    # consecutive candidate slots form a pair so both members share a split
    pair_slots = [(candidates[2 * i], candidates[2 * i + 1]) for i in range(len(candidates) // 2)]
    chosen = sorted(rng.permutation(len(pair_slots))[:n_pairs])

    scales = _mirage_scales(spec)
    tau_short = np.arange(MIRAGE_SHORT, dtype=np.float64)
    tau_marker = np.arange(MIRAGE_MARKER, dtype=np.float64)
    tau_future = np.arange(1, MIRAGE_FUTURE + 1, dtype=np.float64)

    neutral = scales[None, :] * 0.6 * np.cos(2.0 * np.pi * tau_short[:, None] / 24.0)
    marker_shape = scales[None, :] * (0.8 + 0.4 * np.sin(2.0 * np.pi * tau_marker[:, None] / 8.0))
    ramp = scales[None, :] * 1.2 * (tau_future[:, None] / MIRAGE_FUTURE)
    tail = neutral[-1][None, :]

    manifest = []
    for slot in chosen:
        t_a, t_b = pair_slots[slot]
        flip = bool(rng.integers(0, 2))
        sign_a, sign_b = (1.0, -1.0) if not flip else (-1.0, 1.0)
        for anchor, sign in ((t_a, sign_a), (t_b, sign_b)):
            values[anchor - MIRAGE_SHORT + 1:anchor + 1] = neutral
            values[anchor - MIRAGE_SHORT - MIRAGE_MARKER + 1:anchor - MIRAGE_SHORT + 1] = sign * marker_shape
            values[anchor + 1:anchor + 1 + MIRAGE_FUTURE] = tail + sign * ramp
        manifest.append({
            "window_start_a": int(t_a - MIRAGE_SHORT + 1),
            "window_start_b": int(t_b - MIRAGE_SHORT + 1),
            "divergence_step": MIRAGE_SHORT,
        })
    return manifest


def synth_spec_from_dict(raw: dict) -> SynthSpec:
    """Build a SynthSpec from explicit fields or sampled shorthand.

    Shorthand keys ``amplitude_range``, ``random_phases``, ``n_latents``,
    and ``latent_scale`` draw per-node parameters deterministically from the
    spec seed.
    """
    raw = dict(raw)
    n_nodes = int(raw["n_nodes"])
    seed = int(raw.get("seed", 0))
    param_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11]))

    amps = raw.get("node_amplitudes")
    if amps is None and "amplitude_range" in raw:
        lo, hi = raw["amplitude_range"]
        amps = param_rng.uniform(lo, hi, size=n_nodes).tolist()
    elif amps is None:
        amps = [0.0] * n_nodes

    phases = raw.get("node_phases")
    if phases is None and raw.get("random_phases"):
        phases = param_rng.uniform(0.0, 2.0 * np.pi, size=n_nodes).tolist()
    elif phases is None:
        phases = [0.0] * n_nodes

    mix = raw.get("latent_mix")
    if mix is None and raw.get("n_latents"):
        k = int(raw["n_latents"])
        scale = float(raw.get("latent_scale", 1.0))
        mix = (param_rng.normal(size=(n_nodes, k)) * scale / np.sqrt(k)).tolist()
    elif mix is None:
        mix = ()

    return SynthSpec(
        n_nodes=n_nodes,
        n_steps=int(raw["n_steps"]),
        daily_period=int(raw.get("daily_period", 288)),
        node_amplitudes=tuple(amps),
        node_phases=tuple(phases),
        latent_mix=tuple(tuple(row) for row in mix),
        noise_std=float(raw.get("noise_std", 0.0)),
        mirage_fraction=float(raw.get("mirage_fraction", 0.0)),
        seed=seed,
    )

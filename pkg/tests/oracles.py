"""Independent reference computations used to check the package.

Everything here is written against plain numpy / python loops, on purpose:
these functions never call into the package under test.
"""

from __future__ import annotations

import numpy as np


def finite_difference_grad(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of scalar-valued f at x (float64)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def scalar_metrics(pred: np.ndarray, truth: np.ndarray, zero_threshold: float):
    """Pure-loop MAE / RMSE / MAPE over flattened arrays.

    MAPE is in percent and skips truth values with |truth| < zero_threshold;
    returns None for MAPE when every element is skipped.
    """
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    assert p.shape == t.shape
    abs_sum = 0.0
    sq_sum = 0.0
    ape_sum = 0.0
    ape_n = 0
    for i in range(p.size):
        d = p[i] - t[i]
        abs_sum += abs(d)
        sq_sum += d * d
        if abs(t[i]) >= zero_threshold:
            ape_sum += abs(d) / abs(t[i])
            ape_n += 1
    mae = abs_sum / p.size
    rmse = (sq_sum / p.size) ** 0.5
    mape = (ape_sum / ape_n) * 100.0 if ape_n else None
    return mae, rmse, mape


def climatology_predictions(train_values: np.ndarray, period: int, steps: np.ndarray,
                            nodes: np.ndarray) -> np.ndarray:
    """Per-node, per-time-of-day train mean evaluated at (step, node) pairs."""
    t_train = train_values.shape[0]
    table = np.zeros((period, train_values.shape[1]))
    counts = np.zeros(period)
    for t in range(t_train):
        table[t % period] += train_values[t, :, 0]
        counts[t % period] += 1
    table /= counts[:, None]
    return np.array([table[s % period, n] for s, n in zip(steps, nodes)])

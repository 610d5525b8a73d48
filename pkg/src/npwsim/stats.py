"""Weighted-ensemble estimators, batch precision, and divergence status.

``precision`` is the standard error of the full-ensemble mean estimated
from ``batch_count`` sub-ensemble means, ``stddev(batch_means)/sqrt(B)``.
The raw standard deviation of the sub-ensemble averages is recovered by
multiplying by ``sqrt(batch_count)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DivergenceError

__all__ = [
    "BatchEstimate",
    "DivergenceStatus",
    "weighted_mean",
    "effective_sample_size",
    "batch_estimate",
    "accuracy_series",
    "detect_divergence",
]

#: |sum of weights| below this (per trajectory) counts as underflow.
WEIGHT_SUM_FLOOR = 1e-300


@dataclass
class BatchEstimate:
    value: float
    precision: float
    batch_means: np.ndarray


@dataclass
class DivergenceStatus:
    diverged: bool
    time: Optional[float] = None
    cause: Optional[str] = None   # non_finite | ess_collapse | weight_sum_underflow

    def __post_init__(self):
        if self.diverged != (self.time is not None):
            raise ValueError("diverged is true exactly when a time is present")


def weighted_mean(values, weights):
    """E_f[f] = sum(w_i f_i) / sum(w_i); weights may be complex."""
    values = np.asarray(values)
    weights = np.asarray(weights)
    if values.shape != weights.shape:
        raise ValueError(f"length mismatch: {values.shape} values vs {weights.shape} weights")
    if values.size == 0:
        raise ValueError("weighted_mean of an empty ensemble")
    total = weights.sum()
    if np.abs(total) == 0.0:
        raise DivergenceError("weight sum is zero")
    return (weights * values).sum() / total


def effective_sample_size(weights) -> float:
    """(sum|w|)^2 / sum|w|^2; 0 for an all-zero ensemble."""
    aw = np.abs(np.asarray(weights))
    if aw.size == 0:
        raise ValueError("effective_sample_size of an empty ensemble")
    denom = (aw * aw).sum()
    if denom == 0.0:
        return 0.0
    return float(aw.sum() ** 2 / denom)


def batch_estimate(values, weights, batch_count: int) -> BatchEstimate:
    """Full weighted mean plus batch-means precision.

    Batches are contiguous index ranges. Complex inputs are reduced to
    their real parts for the reported value and precision (the imaginary
    part of a physical estimate is a separate diagnostic channel).
    """
    values = np.asarray(values)
    weights = np.asarray(weights)
    if values.shape != weights.shape:
        raise ValueError(f"length mismatch: {values.shape} values vs {weights.shape} weights")
    n = values.size
    if batch_count <= 0 or n % batch_count != 0:
        raise ValueError(f"batch_count={batch_count} must divide ensemble size {n}")
    vb = values.reshape(batch_count, -1)
    wb = weights.reshape(batch_count, -1)
    sums = wb.sum(axis=1)
    dead = np.abs(sums) == 0.0
    if dead.any():
        raise DivergenceError(f"zero weight sum in batch {int(np.argmax(dead))}")
    batch_means = ((wb * vb).sum(axis=1) / sums).real.astype(float)
    value = float(weighted_mean(values, weights).real)
    precision = float(batch_means.std(ddof=1) / np.sqrt(batch_count)) if batch_count > 1 else 0.0
    return BatchEstimate(value=value, precision=precision, batch_means=batch_means)


def accuracy_series(method_means, oracle_means) -> np.ndarray:
    """Pointwise |method - oracle| on a common grid."""
    a = np.asarray(method_means, dtype=float)
    b = np.asarray(oracle_means, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")
    return np.abs(a - b)


def detect_divergence(weights, finite: bool, ess_fraction_threshold: float,
                      t: float) -> DivergenceStatus:
    """Convert ensemble-health checks into data.

    Flags when any trajectory is non-finite, when the effective sample
    size falls below ``threshold * n_traj``, or when |sum of weights|
    underflows. ``finite`` reports whether all ensemble state (not only
    the weights) is finite.
    """
    weights = np.asarray(weights)
    n = weights.size
    if not finite or not np.isfinite(weights).all():
        return DivergenceStatus(True, t, "non_finite")
    if np.abs(weights.sum()) < WEIGHT_SUM_FLOOR * n:
        return DivergenceStatus(True, t, "weight_sum_underflow")
    if effective_sample_size(weights) < ess_fraction_threshold * n:
        return DivergenceStatus(True, t, "ess_collapse")
    return DivergenceStatus(False)

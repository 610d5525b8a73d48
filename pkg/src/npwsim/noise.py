"""Deterministic, stream-separated Gaussian and Poisson draws.

Every draw is a pure function of ``(seed, tag, trajectory_index, step_index)``
through a counter-based 64-bit mixing chain, so

* the measurement stream (tag ``"W"``) is identical no matter how many
  trajectories exist or which solvers consume it, and
* per-trajectory fictitious streams can be generated in any order, in
  blocks, or in parallel, with bit-identical results.

Gaussians come from the inverse normal CDF applied to one 64-bit word per
draw; Poisson draws invert the Poisson CDF the same way.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import poisson

__all__ = ["NoiseStreams", "MEASUREMENT_TAG", "FICTITIOUS_TAGS"]

MEASUREMENT_TAG = "W"
FICTITIOUS_TAGS = ("V1", "V2")

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)


def _mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer; input and output are uint64 arrays."""
    with np.errstate(over="ignore"):
        x = x.copy()
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
    return x


def _fnv1a(text: str) -> np.uint64:
    h = _FNV_OFFSET
    with np.errstate(over="ignore"):
        for byte in text.encode("utf-8"):
            h = (h ^ np.uint64(byte)) * _FNV_PRIME
    return h


def _words(key: np.ndarray, step_index: np.ndarray) -> np.ndarray:
    """One uint64 word per (key, step) pair; either argument may broadcast."""
    with np.errstate(over="ignore"):
        c = _mix64((step_index.astype(np.uint64) + np.uint64(1)) * _GOLDEN)
    return _mix64(key ^ c)


def _uniform(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles in the open interval (0, 1)."""
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


class NoiseStreams:
    """All noise consumed by one run, keyed by a single 64-bit seed."""

    def __init__(self, seed: int):
        if not (0 <= int(seed) < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
        self.seed = int(seed)
        self._seed_word = _mix64(np.array(seed, dtype=np.uint64))
        self._key_cache: dict = {}

    # -- key derivation ------------------------------------------------

    def stream_key(self, tag: str, trajectory_index: int | None = None) -> np.uint64:
        """Derived key for one stream; ``trajectory_index=None`` is the shared stream."""
        cached = self._key_cache.get((tag, trajectory_index))
        if cached is not None:
            return cached
        with np.errstate(over="ignore"):
            k = _mix64(self._seed_word ^ _fnv1a(tag))
            if trajectory_index is not None:
                k = _mix64(k + _GOLDEN * np.uint64(trajectory_index + 1))
        key = np.uint64(k)
        self._key_cache[(tag, trajectory_index)] = key
        return key

    def _trajectory_keys(self, tag: str, n_traj: int) -> np.ndarray:
        cached = self._key_cache.get((tag, "vec", n_traj))
        if cached is not None:
            return cached
        with np.errstate(over="ignore"):
            base = _mix64(self._seed_word ^ _fnv1a(tag))
            idx = np.arange(1, n_traj + 1, dtype=np.uint64)
            keys = _mix64(base + _GOLDEN * idx)
        self._key_cache[(tag, "vec", n_traj)] = keys
        return keys

    # -- Gaussian increments --------------------------------------------

    def wiener_increment(self, stream_key: np.uint64, step_index: int, dt: float) -> float:
        """Normal(0, dt) draw for one stream at one step; repeatable."""
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt!r}")
        w = _words(np.asarray(stream_key, dtype=np.uint64),
                   np.asarray(step_index, dtype=np.uint64))
        return float(ndtri(_uniform(w)) * np.sqrt(dt))

    def wiener_block(self, stream_key: np.uint64, step_lo: int, step_hi: int,
                     dt: float) -> np.ndarray:
        """Increments for steps ``step_lo..step_hi-1`` of one stream."""
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt!r}")
        steps = np.arange(step_lo, step_hi, dtype=np.uint64)
        w = _words(np.asarray(stream_key, dtype=np.uint64), steps)
        return ndtri(_uniform(w)) * np.sqrt(dt)

    def measurement_increments(self, n_steps: int, dt: float) -> np.ndarray:
        """The shared measurement-noise path dW_0..dW_{n_steps-1}."""
        return self.wiener_block(self.stream_key(MEASUREMENT_TAG), 0, n_steps, dt)

    def fictitious_increments(self, tag: str, n_traj: int, step_index: int,
                              dt: float) -> np.ndarray:
        """Per-trajectory increments for one step, shape ``(n_traj,)``."""
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt!r}")
        keys = self._trajectory_keys(tag, n_traj)
        w = _words(keys, np.asarray(step_index, dtype=np.uint64))
        return ndtri(_uniform(w)) * np.sqrt(dt)

    # -- Poisson draws ---------------------------------------------------

    def sample_poisson(self, lam: float, tag: str, n_draws: int) -> np.ndarray:
        """``n_draws`` i.i.d. Poisson(lam) variates, keyed by ``tag``."""
        if not np.isfinite(lam) or lam < 0:
            raise ValueError(f"lambda must be finite and >= 0, got {lam!r}")
        if lam == 0.0:
            return np.zeros(n_draws, dtype=np.int64)
        key = self.stream_key(tag)
        idx = np.arange(n_draws, dtype=np.uint64)
        u = _uniform(_words(np.asarray(key, dtype=np.uint64), idx))
        return poisson.ppf(u, lam).astype(np.int64)

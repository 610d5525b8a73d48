"""Simulation configuration and time-grid bookkeeping.

A validated :class:`SimulationConfig` is immutable and shared read-only by
every solver; one config describes one run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, replace

from .errors import ConfigError

NPW_COEFFICIENT_MODES = ("derived_two", "paper_one")

#: Mean-field statistics and weight renormalisation cadence, in steps.
RENORM_INTERVAL = 100


@dataclass(frozen=True)
class SimulationConfig:
    """Physical and numerical parameters of a single run.

    Times are dimensionless (the measurement strength ``gamma`` sets the
    only rate in the problem). ``fock_cutoff`` must contain the Poisson
    number tail of the initial coherent state, ``fock_cutoff >= a^2 + 8a``
    for amplitude ``a``.
    """

    gamma: float = 1.0
    alpha_amplitude: float = 10.0
    alpha_phase: float = 0.0
    n_traj: int = 10_000
    dt: float = 1e-5
    t_final: float = 0.5
    seed: int = 7
    fock_cutoff: int = 200
    batch_count: int = 10
    ess_fraction_threshold: float = 0.01
    midpoint_iterations: int = 3
    npw_noise_coefficient: str = "derived_two"
    record_stride: int = 100

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def times(self):
        """Full integration grid, ``t_k = k*dt`` for ``k = 0..n_steps``."""
        import numpy as np

        return self.dt * np.arange(self.n_steps + 1)

    def record_indices(self):
        """Step indices written to output: every ``record_stride`` plus the end."""
        idx = list(range(0, self.n_steps + 1, self.record_stride))
        if idx[-1] != self.n_steps:
            idx.append(self.n_steps)
        return idx


def validate_config(cfg: SimulationConfig) -> SimulationConfig:
    """Check every invariant and snap ``t_final`` onto the ``dt`` grid.

    Raises :class:`ConfigError` naming the offending field.
    """
    if not (isinstance(cfg.gamma, (int, float)) and math.isfinite(cfg.gamma)) or cfg.gamma < 0:
        raise ConfigError(f"gamma must be a finite real >= 0, got {cfg.gamma!r}")
    if not math.isfinite(cfg.alpha_amplitude) or cfg.alpha_amplitude < 0:
        raise ConfigError(f"alpha_amplitude must be a finite real >= 0, got {cfg.alpha_amplitude!r}")
    if not math.isfinite(cfg.alpha_phase):
        raise ConfigError(f"alpha_phase must be a finite real, got {cfg.alpha_phase!r}")
    if not isinstance(cfg.n_traj, int) or cfg.n_traj <= 0:
        raise ConfigError(f"n_traj must be a positive integer, got {cfg.n_traj!r}")
    if not (math.isfinite(cfg.dt) and cfg.dt > 0):
        raise ConfigError(f"dt must be > 0, got {cfg.dt!r}")
    if not (math.isfinite(cfg.t_final) and cfg.t_final > 0):
        raise ConfigError(f"t_final must be > 0, got {cfg.t_final!r}")
    if not isinstance(cfg.seed, int) or not (0 <= cfg.seed < 2**64):
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {cfg.seed!r}")
    if not isinstance(cfg.fock_cutoff, int) or cfg.fock_cutoff <= 0:
        raise ConfigError(f"fock_cutoff must be a positive integer, got {cfg.fock_cutoff!r}")

    tail_bound = cfg.alpha_amplitude**2 + 8 * cfg.alpha_amplitude
    if cfg.fock_cutoff < tail_bound:
        raise ConfigError(
            f"fock_cutoff={cfg.fock_cutoff} does not contain the Poisson tail: "
            f"need fock_cutoff >= amplitude^2 + 8*amplitude = {tail_bound:g}"
        )

    if not isinstance(cfg.batch_count, int) or cfg.batch_count <= 0:
        raise ConfigError(f"batch_count must be a positive integer, got {cfg.batch_count!r}")
    if cfg.n_traj % cfg.batch_count != 0:
        raise ConfigError(
            f"batch_count={cfg.batch_count} must divide n_traj={cfg.n_traj}"
        )
    if not (0 < cfg.ess_fraction_threshold <= 1):
        raise ConfigError(
            f"ess_fraction_threshold must lie in (0, 1], got {cfg.ess_fraction_threshold!r}"
        )
    if not isinstance(cfg.midpoint_iterations, int) or cfg.midpoint_iterations <= 0:
        raise ConfigError(
            f"midpoint_iterations must be a positive integer, got {cfg.midpoint_iterations!r}"
        )
    if cfg.npw_noise_coefficient not in NPW_COEFFICIENT_MODES:
        raise ConfigError(
            f"npw_noise_coefficient must be one of {NPW_COEFFICIENT_MODES}, "
            f"got {cfg.npw_noise_coefficient!r}"
        )
    if not isinstance(cfg.record_stride, int) or cfg.record_stride <= 0:
        raise ConfigError(f"record_stride must be a positive integer, got {cfg.record_stride!r}")

    # Snap the horizon onto the step grid so t_final = n_steps*dt exactly.
    n_steps = max(1, round(cfg.t_final / cfg.dt))
    t_snap = n_steps * cfg.dt
    if t_snap != cfg.t_final:
        cfg = replace(cfg, t_final=t_snap)
    return cfg


def config_to_dict(cfg: SimulationConfig) -> dict:
    return asdict(cfg)


def config_from_dict(data: dict) -> SimulationConfig:
    """Build a validated config from a plain dict; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = set(SimulationConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = SimulationConfig(**data)
    return validate_config(cfg)


def load_config(path) -> SimulationConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: SimulationConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")

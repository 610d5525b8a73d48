"""Trajectory solvers for a continuously number-monitored bosonic mode.

Three integration routes for one conditional master equation, driven by a
shared measurement record: an exact truncated-Fock-basis filter (the
benchmark), a positive-P weighted-trajectory unraveling, and a
number-phase Wigner weighted-trajectory unraveling.
"""

__version__ = "0.1.0"

from .config import SimulationConfig, validate_config, load_config, save_config
from .errors import ConfigError, DivergenceError, IntegratorBlowupError
from .noise import NoiseStreams

__all__ = [
    "SimulationConfig",
    "validate_config",
    "load_config",
    "save_config",
    "ConfigError",
    "DivergenceError",
    "IntegratorBlowupError",
    "NoiseStreams",
    "__version__",
]

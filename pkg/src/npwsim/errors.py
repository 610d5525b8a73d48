"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration field violates one of its invariants."""


class DivergenceError(RuntimeError):
    """A weighted-ensemble estimate was requested from a degenerate ensemble."""


class IntegratorBlowupError(RuntimeError):
    """A density-matrix step produced non-finite entries."""

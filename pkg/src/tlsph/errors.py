"""Exception types shared across the solver stack."""


class NumericalFailure(RuntimeError):
    """Inverted element, divergence, or other fatal numerical breakdown."""


class ConfigError(ValueError):
    """Malformed or out-of-range run configuration."""

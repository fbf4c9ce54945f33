"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value, unknown key, or dimension mismatch."""


class NumericalError(RuntimeError):
    """A factorization or numerical routine failed beyond recovery."""


class ScheduleError(ValueError):
    """An interaction stream violates the schedule contract."""

"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point lies outside the search box or the unit cube."""


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class EvaluationError(RuntimeError):
    """A single objective evaluation failed."""


class NumericError(RuntimeError):
    """A linear-algebra step failed beyond recoverable jitter."""

"""Error types shared across modules and mapped to CLI exit codes."""

from ._linalg import NumericalError

__all__ = ["ConfigError", "NumericalError"]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""

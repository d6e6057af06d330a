"""Shared exception types."""


class CapacityError(RuntimeError):
    """A requested basis, grid, or dense operation exceeds its configured limit."""


class NumericalError(RuntimeError):
    """A numerical invariant failed (non-monotone data, broken model assumption)."""


class ConvergenceError(NumericalError):
    """An iterative solver did not reach the requested tolerance."""


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""

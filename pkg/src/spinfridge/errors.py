class SpinFridgeError(Exception):
    """Base class for package errors."""


class DomainError(SpinFridgeError, ValueError):
    """An argument lies outside the physical domain of an operation."""


class ConfigError(SpinFridgeError):
    """Malformed or inconsistent run configuration (CLI exit code 2)."""


class DataError(SpinFridgeError):
    """Input data file does not match its schema (CLI exit code 3)."""


class NumericalError(SpinFridgeError, ArithmeticError):
    """A numerical step failed, e.g. a singular or unstable network (exit code 4)."""

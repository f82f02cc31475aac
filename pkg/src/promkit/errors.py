"""Exception types raised by promkit."""


class PromkitError(Exception):
    """Base class for all promkit errors."""


class ConfigError(PromkitError, ValueError):
    """Invalid configuration or inconsistent inputs."""


class FormatError(PromkitError):
    """Malformed snapshot or bundle file."""


class NumericalError(PromkitError, ArithmeticError):
    """A numerical precondition failed (singular chart, defective operator, ...)."""

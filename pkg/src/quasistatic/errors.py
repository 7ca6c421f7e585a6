"""Exception hierarchy shared by all subpackages."""


class QuasistaticError(Exception):
    """Base class for every error raised by this package."""


class IntegrationError(QuasistaticError, RuntimeError):
    """A time integration produced a non-finite or unphysical state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class BracketError(QuasistaticError, ValueError):
    """A root or inverse could not be bracketed."""


class MonotonicityError(QuasistaticError, ValueError):
    """A function expected to be strictly monotone is not."""


class DomainError(QuasistaticError, ValueError):
    """Argument outside the domain of a special function."""


class GapCollapseError(QuasistaticError, ArithmeticError):
    """Two levels became degenerate where a finite gap is required."""


class SynthesisError(QuasistaticError, RuntimeError):
    """A driving protocol could not be constructed."""


class ConfigError(QuasistaticError, ValueError):
    """An experiment configuration is malformed or out of range."""

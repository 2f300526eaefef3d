"""Exception types shared across the package."""


class TrioscError(Exception):
    """Base class for all package-specific errors."""


class InvalidTruncationError(TrioscError):
    """A Fock-space truncation is too small to be meaningful."""


class ContractViolationError(TrioscError):
    """An input violates a numerical precondition (e.g. non-Hermitian matrix)."""


class SingularResonanceError(TrioscError):
    """A perturbative energy denominator vanishes.

    Carries the offending intermediate state label when known.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class TailMassError(TrioscError):
    """A truncated expansion leaves too much weight in the discarded tail."""


class ConfigError(TrioscError):
    """A scenario configuration file is invalid."""

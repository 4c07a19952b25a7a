"""Exception and warning types raised by the micromaser engine."""


class MicromaserError(Exception):
    """Base class for all errors raised by this package."""


class ImpossibleOutcomeError(MicromaserError):
    """A detection outcome with (numerically) zero probability was requested."""


class SingularMapError(MicromaserError):
    """A resolvent or inverse was requested where the map is not invertible."""


class AmbiguousSteadyStateError(MicromaserError):
    """The unit eigenvalue of a one-step map is not isolated."""

    def __init__(self, message, eigenvalues=()):
        super().__init__(message)
        self.eigenvalues = tuple(eigenvalues)


class BiorthogonalityError(MicromaserError):
    """Left/right eigenvectors could not be biorthonormalized reliably."""


class WindowError(MicromaserError):
    """Invalid counting window (size cap exceeded, bad duration, ...)."""


class UndefinedStatisticError(MicromaserError, ValueError):
    """A statistic is undefined for the given state (e.g. zero mean)."""


class TruncationWarning(UserWarning):
    """Probability mass leaks across the Fock-space truncation boundary."""


class RoundingWarning(UserWarning):
    """A window length had to be rounded to a whole number of slots."""

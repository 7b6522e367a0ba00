"""Exception hierarchy shared across the package."""


class AqsteerError(Exception):
    """Base class for all package errors."""


class InvalidInputError(AqsteerError, ValueError):
    """Malformed or out-of-bounds input data."""


class ScenarioTooLargeError(AqsteerError):
    """The requested word set exceeds the configured enumeration cap."""


class IllDefinedMarginalError(AqsteerError):
    """A marginal depends on the inputs of traced-out parties (signalling data)."""


class NotPSDError(AqsteerError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class SolverFailure(AqsteerError):
    """The interior-point solver stopped without meeting its tolerances.

    The last iterate is available as ``solution``.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class InconsistentMomentMatrixError(AqsteerError):
    """A moment matrix violates the structure needed to extract a realization."""


class LiftInconsistencyError(AqsteerError):
    """A lifted moment matrix violates the symmetry, trace or null constraints."""


class PreconditionError(AqsteerError):
    """An operation was called on data that does not meet its preconditions."""

"""Exception types shared across the package."""


class CmaError(Exception):
    """Base class for all package errors."""


class ValidationError(CmaError):
    """Malformed or out-of-contract input."""


class BoundaryError(CmaError):
    """A stencil or point query left the computational domain."""


class DomainTooSmallError(CmaError):
    """An operation would shrink a box domain below one interior point."""


class IterationLimitError(CmaError):
    """An iterative procedure hit its iteration budget.

    Carries the last residual so callers can decide whether the partial
    result is usable.
    """

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class NoSubsolutionError(CmaError):
    """No constant subsolution bracket exists for the given data."""


class NonCauchyError(CmaError):
    """Continuation family failed the Cauchy test within its step budget.

    Carries the trace of successive sup-distances.
    """

    def __init__(self, message, distance_trace=None):
        super().__init__(message)
        self.distance_trace = list(distance_trace or [])


class InvalidInputError(CmaError):
    """A precondition certificate failed, so the requested check is void."""


class ParseError(CmaError):
    """Config or grid file could not be parsed; carries a line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line

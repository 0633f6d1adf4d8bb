"""Exception hierarchy shared by every bggkit module."""


class BggError(Exception):
    """Base class for everything bggkit raises on purpose."""


class DomainError(BggError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedParameterError(DomainError):
    """The operation exists only for a fixed set of parameter values."""


class NonConvergenceError(BggError):
    def __init__(self, message, partial=None, iterations=None, diagnostics=None):
        super().__init__(message)
        self.partial = partial
        self.iterations = iterations
        self.diagnostics = diagnostics or {}


class BoundaryError(BggError, ValueError):
    """An estimate landed on the boundary of the parameter space."""


class DegenerateDataError(BggError, ValueError):
    pass


class DegenerateInformationError(BggError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegenerateCellError(BggError, ValueError):
    """A chi-square cell has (almost) zero expected count; re-bin."""


class OracleError(BggError, ValueError):
    """A user supplied cdf returned values that are not a distribution."""


class PreconditionError(BggError):
    pass


class ParseError(BggError, ValueError):
    def __init__(self, message, lines=None):
        super().__init__(message)
        self.lines = list(lines or [])


class ValidationError(BggError, ValueError):
    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = list(rows or [])

"""Exception types raised across the package."""


class GGMError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(GGMError, ValueError):
    """A matrix that must be positive definite is not.

    ``pivot`` is the 0-based index of the first failing Cholesky pivot when
    known, otherwise ``None``.
    """

    def __init__(self, message="matrix is not positive definite", pivot=None):
        super().__init__(message)
        self.pivot = pivot


class InvalidPenalty(GGMError, ValueError):
    pass


class SolverDiverged(GGMError, RuntimeError):
    pass


class TooLarge(GGMError, ValueError):
    pass


class EmptyModelSet(GGMError, ValueError):
    pass


class GuardViolated(GGMError, ValueError):
    pass


class DegenerateProposal(GGMError, RuntimeError):
    pass


class DataError(GGMError, ValueError):
    """Problems with user supplied data files."""


class ParseError(DataError):
    def __init__(self, message, row=None, col=None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", col {col})" if col is not None else ")")
        super().__init__(message + loc)
        self.row = row
        self.col = col


class NonNumeric(ParseError):
    pass


class TooFewRows(DataError):
    pass


class ZeroVariance(DataError):
    pass

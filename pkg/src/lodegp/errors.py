"""Exception types shared across the package."""


class LodegpError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatchError(LodegpError):
    """Matrix or array dimensions do not conform."""


class UnboundSymbolError(LodegpError):
    """A symbol required for evaluation has no assigned value."""


class SingularEvaluationError(LodegpError):
    """A denominator evaluated too close to zero."""


class NotDiagonalError(LodegpError):
    """An operation required a diagonal operator matrix."""


class SymbolicRootsUnsupportedError(LodegpError):
    """Root finding was attempted on an operator with free parameters."""


class NeedsRefactorizeModeError(LodegpError):
    """Symbolic compilation hit a parameterized diagonal entry."""


class NotPositiveDefiniteError(LodegpError):
    """Cholesky factorization failed even after jitter escalation."""


class DivergedError(LodegpError):
    """Training produced a non-finite loss."""

    def __init__(self, message, loss_trace=None):
        super().__init__(message)
        self.loss_trace = list(loss_trace or [])


class UnknownSystemError(LodegpError):
    """Requested benchmark system name is not registered."""


class NoReferenceSolutionError(LodegpError):
    """Data generation needs a closed-form reference solution."""


class EmptySelectionError(LodegpError):
    """A channel subset must not be empty."""


class UnsupportedOrderError(LodegpError):
    """The residual protocol supports derivative orders up to two."""


class ParseError(LodegpError):
    """Polynomial grammar parse failure with source position."""

    def __init__(self, message, line=1, column=1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column

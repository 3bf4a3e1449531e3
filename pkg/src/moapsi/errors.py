"""Exception hierarchy shared by every module of the package."""


class MoAError(Exception):
    """Base class for all errors raised by moapsi."""


class MoAIndexError(MoAError, IndexError):
    """An index component falls outside the extent of its axis."""

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class RankError(MoAError):
    """An operand has a rank the operation does not accept."""


class ConformanceError(MoAError, ValueError):
    """Operand shapes do not conform."""


class MoADivisionError(MoAError, ZeroDivisionError):
    """Division by an exact zero."""


class ShapeError(MoAError, ValueError):
    """Shape inference failed for a symbolic expression."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class UnboundNameError(MoAError, LookupError):
    """An array reference has no binding."""


class ParseError(MoAError):
    """Malformed expression text."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ReductionError(MoAError):
    """An expression cannot be lowered to operational normal form."""


class OnfError(MoAError):
    """A program cannot be executed against the supplied buffers."""


class SolverError(MoAError):
    """Base class for conjugate gradient precondition failures."""


class SymmetryError(SolverError, ValueError):
    """The system matrix is not symmetric."""


class NotPositiveDefiniteError(SolverError):
    """A search direction produced a non-positive curvature p.Ap."""


class FormatError(MoAError, ValueError):
    """A matrix or vector file could not be parsed."""


class UnknownIdentifierError(ParseError):
    """Expression text names an array with no declared shape."""

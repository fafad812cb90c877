"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`RankOneError`, so callers can catch the whole family at once.
Errors that signal bad arguments also derive from :class:`ValueError`.
"""


class RankOneError(Exception):
    """Base class for all package errors."""


class DimMismatchError(RankOneError, ValueError):
    pass


class BadDimsError(RankOneError, ValueError):
    pass


class ZeroTargetError(RankOneError, ValueError):
    """The target tensor has zero norm, so the normalized objective is undefined."""


class DegenerateFactorError(RankOneError, ValueError):
    """A factor that must be nonzero is the zero vector."""


class DegenerateIterateError(RankOneError):
    """An ALS update produced a (numerically) zero factor.

    Raised when the target is orthogonal to the subspace fixed by the other
    factors. ``sweep`` and ``mode`` locate the failing micro step when known.
    """

    def __init__(self, message, sweep=None, mode=None):
        if sweep is not None:
            message = f"{message} (sweep {sweep}, mode {mode})"
        super().__init__(message)
        self.sweep = sweep
        self.mode = mode


class ZeroInitialError(RankOneError, ValueError):
    pass


class OrthogonalToReferenceError(RankOneError, ValueError):
    """The tangent of the angle to the reference is infinite."""


class ZeroCoefficientError(RankOneError, ValueError):
    pass


class InsufficientTraceError(RankOneError, ValueError):
    pass


class OrderTooSmallError(RankOneError, ValueError):
    pass


class NoDominanceError(RankOneError, ValueError):
    pass


class AuditFailure(RankOneError):
    """A trace violated one of the descent properties.

    ``index`` is the position of the first offending micro-step record
    (or sweep, for sweep-level checks).
    """

    def __init__(self, message, index):
        super().__init__(f"{message} at index {index}")
        self.index = index


class NotStationaryError(RankOneError, ValueError):
    def __init__(self, residual, tol):
        super().__init__(f"point is not stationary: residual {residual:.3e} > {tol:.1e}")
        self.residual = residual


class NegativeLambdaError(RankOneError, ValueError):
    pass


class OutOfRangeError(RankOneError, ValueError):
    pass


class RankTooLargeError(RankOneError, ValueError):
    pass


class ConstraintViolatedError(RankOneError, ValueError):
    pass


class UnknownFigureError(RankOneError, ValueError):
    pass


class TensorFormatError(RankOneError, ValueError):
    """Malformed tensor file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(RankOneError, ValueError):
    """Malformed ``key=value`` config file; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line

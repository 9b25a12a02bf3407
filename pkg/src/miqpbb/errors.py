"""Exception types raised by the solver."""


class MiqpError(Exception):
    """Base class for all solver errors."""


class DimensionMismatch(MiqpError, ValueError):
    pass


class NotPositiveDefinite(MiqpError, ValueError):
    pass


class NonDescentDirection(MiqpError):
    pass


class LineSearchFailure(MiqpError):
    """Backtracking exhausted without sufficient decrease.

    Carries the last feasible point so callers can still use its
    objective value (e.g. as a dual bound).
    """

    def __init__(self, message, x=None, value=None, iterations=0):
        super().__init__(message)
        self.x = x
        self.value = value
        self.iterations = iterations


class DepthExceeded(MiqpError):
    pass


class PolishFailed(MiqpError):
    def __init__(self, message, violation):
        super().__init__(message)
        self.violation = violation


class ParseError(MiqpError, ValueError):
    def __init__(self, message, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line


class BoxTooLarge(MiqpError):
    pass


class OracleIterLimit(MiqpError):
    pass

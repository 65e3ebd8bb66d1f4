"""Exception hierarchy shared by the ucem modules."""


class UcemError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(UcemError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConsistencyError(UcemError):
    """Inputs that should agree with each other do not (e.g. gains vs thresholds)."""


class InfeasibleError(UcemError):
    """The utility floor cannot be met.

    ``u_max`` carries the best attainable utility (in U' units) so callers
    can pick a smaller target.
    """

    def __init__(self, message, u_max):
        super().__init__(message)
        self.u_max = u_max


class NumericalError(UcemError):
    """An iterative routine failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class SdHawkesError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SdHawkesError, ValueError):
    """Input violates a documented precondition."""


class ParseError(InvalidInputError):
    """A data file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(SdHawkesError, ArithmeticError):
    """A numerical routine failed (non-convergence, zero intensity, ...)."""


class ExplosionError(NumericalError):
    """Simulation exceeded the event-count guard."""

    def __init__(self, count, max_events):
        self.count = count
        self.max_events = max_events
        super().__init__(
            f"simulation produced {count} events, exceeding max_events={max_events}; "
            "the process is likely explosive for these parameters"
        )


class EstimationError(NumericalError):
    """Every optimisation start failed to produce a finite likelihood."""

    def __init__(self, message, traces=None):
        self.traces = traces or []
        super().__init__(message)

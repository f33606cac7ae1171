"""Exception hierarchy shared by all modules."""


class OttoError(Exception):
    """Base class for errors raised by otto_ldf."""


class ParameterError(OttoError, ValueError):
    """Invalid model parameters or arguments."""


class TruncationError(OttoError, RuntimeError):
    """A truncated spectrum cannot meet the requested tail tolerance."""

    def __init__(self, message, *, achieved_tail=None, required_levels=None):
        super().__init__(message)
        self.achieved_tail = achieved_tail
        self.required_levels = required_levels


class NumericalInstabilityError(OttoError, ArithmeticError):
    """Round-off has produced a result that violates a hard invariant."""


class EstimationError(OttoError, RuntimeError):
    """Monte Carlo data are insufficient for the requested estimate."""


class ConfigError(OttoError, ValueError):
    """Malformed or inconsistent run configuration."""

    def __init__(self, message, *, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field

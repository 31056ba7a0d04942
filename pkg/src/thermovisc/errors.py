"""Exception hierarchy shared by every layer of the package."""


class ThermoviscError(Exception):
    """Base class for all package errors."""


class InvalidSpec(ThermoviscError):
    """A coefficient specification violates a structural assumption.

    ``report`` holds the full :class:`~thermovisc.model.ValidationReport`
    when the error was raised by :func:`~thermovisc.model.validate_spec`.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AlphaOutOfRange(InvalidSpec):
    pass


class BoundViolated(InvalidSpec):
    def __init__(self, message, xi=None, report=None):
        super().__init__(message, report=report)
        self.xi = xi


class NegativeArgument(ThermoviscError, ValueError):
    pass


class GridTooCoarse(ThermoviscError, ValueError):
    pass


class EmptyTrajectory(ThermoviscError, ValueError):
    pass


class SolveFailure(ThermoviscError, RuntimeError):
    pass


class NonFiniteState(ThermoviscError, RuntimeError):
    pass


class BlowupDetected(ThermoviscError, RuntimeError):
    def __init__(self, norm_name, value, t):
        super().__init__(f"blow-up guard fired: {norm_name} = {value:.6g} at t = {t:.6g}")
        self.norm_name = norm_name
        self.value = value
        self.t = t


class LambdaTooSmall(ThermoviscError, ValueError):
    pass


class ExponentOutOfRange(ThermoviscError, ValueError):
    pass


class InsufficientHistory(ThermoviscError, ValueError):
    pass


class HNotMultipleOfDt(ThermoviscError, ValueError):
    pass


class BadTestFunction(ThermoviscError, ValueError):
    pass


class MismatchedGrids(ThermoviscError, ValueError):
    pass


class NonNestedGrids(ThermoviscError, ValueError):
    pass


class ConfigError(ThermoviscError):
    """Configuration could not be parsed; ``errors`` lists ``(line, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"line {ln}: {msg}" if ln else msg for ln, msg in self.errors]
        super().__init__("; ".join(lines))

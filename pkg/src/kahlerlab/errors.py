"""Exception types shared across the package."""


class KahlerLabError(Exception):
    """Base class for all package errors."""


class PositivityError(KahlerLabError):
    """A potential left the space of Kaehler potentials (min density too small).

    ``iterate`` carries the offending field or path for post-mortem, ``where``
    a short human-readable location (a path parameter, an eps level, a flow time).
    """

    def __init__(self, message, iterate=None, where=None):
        super().__init__(message)
        self.iterate = iterate
        self.where = where


class ConvergenceError(KahlerLabError):
    def __init__(self, message, iterate=None, where=None):
        super().__init__(message)
        self.iterate = iterate
        self.where = where


class StepError(KahlerLabError):
    """The implicit solve of a flow step produced non-finite values."""


class FlowInvariantError(KahlerLabError):
    """A Lyapunov quantity increased beyond tolerance along a flow."""


class FlagDegenerate(KahlerLabError):
    """A Jacobi field is too small at the far end to normalize against."""


class ConfigError(KahlerLabError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))

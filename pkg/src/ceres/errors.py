"""Exception types shared across the toolkit."""


class CeresError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(CeresError, ValueError):
    """An argument violates an operation's precondition."""


class DimensionMismatch(CeresError, ValueError):
    """Shapes or lengths of related arguments disagree."""


class SpecError(CeresError, ValueError):
    """A structural causal model specification is malformed."""


class ConditionUnsupported(CeresError, ValueError):
    """A conditioning event has zero probability."""


class ParseError(CeresError, ValueError):
    """A corpus query could not be parsed into a (verb, noun) pair."""


class InvalidProblem(CeresError, ValueError):
    """A quadratic program violates its symmetry/PSD requirements."""


class MaxIterations(CeresError, RuntimeError):
    """An iterative solver exhausted its budget.

    The best iterate found so far is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class OracleDisagreement(CeresError, RuntimeError):
    """Two independent routes to the same quantity disagree beyond tolerance."""


class TimeOrderError(CeresError, ValueError):
    """A memory-bank push went backwards in time."""


class InvalidState(CeresError, RuntimeError):
    """An operation was called on an object in the wrong state."""


class ConfigError(CeresError, ValueError):
    """An experiment configuration knob is outside its documented range."""

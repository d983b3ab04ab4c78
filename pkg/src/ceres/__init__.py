"""Causal-estimation toolkit: adjustment formulas, attention mechanisms,
and memory-bank estimators verified against exact brute-force oracles on
discrete structural causal models.
"""

from .errors import (
    CeresError,
    ConditionUnsupported,
    ConfigError,
    DimensionMismatch,
    InvalidInput,
    InvalidProblem,
    InvalidState,
    MaxIterations,
    OracleDisagreement,
    ParseError,
    SpecError,
    TimeOrderError,
)
from .numeric import convex_combine, log_sum_exp, simplex_project, softmax

__version__ = "0.1.0"

__all__ = [
    "CeresError",
    "ConditionUnsupported",
    "ConfigError",
    "DimensionMismatch",
    "InvalidInput",
    "InvalidProblem",
    "InvalidState",
    "MaxIterations",
    "OracleDisagreement",
    "ParseError",
    "SpecError",
    "TimeOrderError",
    "convex_combine",
    "log_sum_exp",
    "simplex_project",
    "softmax",
    "__version__",
]

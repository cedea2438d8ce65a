"""Exact verification engine for FRT-type R-matrix and quantum vertex algebra
identities over h-adically truncated iterated Laurent series."""

from .series import (Context, LinearForm, LF, Rational, TruncatedSeries, VarSpec,
                     EXP_VAR, LAURENT_VAR, exp_linear, geom_inv_binomial,
                     substitute, subst_linear)
from .errors import (EngineError, ContextMismatchError, DomainError, BudgetError,
                     InternalInvariantError)

__all__ = [
    "Context", "LinearForm", "LF", "Rational", "TruncatedSeries", "VarSpec",
    "EXP_VAR", "LAURENT_VAR", "exp_linear", "geom_inv_binomial", "substitute",
    "subst_linear", "EngineError", "ContextMismatchError", "DomainError",
    "BudgetError", "InternalInvariantError",
]

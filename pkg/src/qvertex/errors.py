"""Exception hierarchy shared by all engine layers."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ContextMismatchError(EngineError):
    """Two series from structurally different expansion contexts were combined."""


class DomainError(EngineError):
    """An operation was applied outside its mathematical domain."""


class BudgetError(EngineError):
    """A window, mode bound or pole budget was exhausted.

    Carries a human-readable hint describing which bound to enlarge.
    """

    def __init__(self, message: str, hint: str = ""):
        super().__init__(message)
        self.hint = hint or message


class InternalInvariantError(EngineError):
    """An internal consistency assertion failed; signals an implementation bug."""

"""Exception hierarchy shared by the numerical modules."""


class SolitonLabError(Exception):
    """Base class for all errors raised by solitonlab."""


class PreconditionError(SolitonLabError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(SolitonLabError, ArithmeticError):
    """A quantity left its domain of definition (metric collapse, underflow)."""


class CollapseError(DomainError):
    """One of the warping functions reached zero or became negative."""

    def __init__(self, which: str, message: str | None = None):
        self.which = which
        super().__init__(message or f"metric collapse: {which} <= 0")


class BlowUpError(DomainError):
    """A state component became non-finite or exceeded the blow-up threshold."""


class UnknownPresetError(SolitonLabError, KeyError):
    pass

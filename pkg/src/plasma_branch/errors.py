"""Exception hierarchy shared by the numerical modules."""


class PlasmaBranchError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PlasmaBranchError, ValueError):
    """An argument lies outside the documented domain of an operation."""


class SingularSystemError(PlasmaBranchError, ArithmeticError):
    """A linear solve met a zero or negligible pivot."""


class BracketError(PlasmaBranchError, ValueError):
    """A root bracket has no sign change or produced a non-finite value."""


class ConvergenceError(PlasmaBranchError, ArithmeticError):
    """An iteration failed to reach its tolerance.

    ``lam`` carries the load parameter at which the failure happened, when
    there is one.
    """

    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


class StabilityError(PlasmaBranchError):
    """A stability sweep found a non-positive first eigenvalue."""

    def __init__(self, message, lam=None, sigma1=None):
        super().__init__(message)
        self.lam = lam
        self.sigma1 = sigma1


class BendingPatternError(PlasmaBranchError):
    """The sampled bell curve does not bend exactly once."""

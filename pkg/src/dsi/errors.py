"""Exception hierarchy shared by all modules."""


class DsiError(Exception):
    """Base class for every error raised by this package."""


class ModelError(DsiError, ValueError):
    """Malformed model: dimension mismatch, non-stochastic rows, bad parameters."""


class InfeasibleError(DsiError, ValueError):
    """Requested distortion lies outside the feasible range."""


class ConvergenceError(DsiError, RuntimeError):
    """An iterative solver or quadrature failed to reach its tolerance."""


class SingularSystemError(DsiError, ArithmeticError):
    """Interpolation system too ill-conditioned to solve reliably."""

    def __init__(self, message, kappa):
        super().__init__(message)
        self.kappa = kappa


class BudgetError(DsiError, RuntimeError):
    """A brute-force search would exceed its candidate budget."""

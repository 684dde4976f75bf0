"""Exception hierarchy shared across the package."""


class RobustAsympError(Exception):
    """Base class for all package errors."""


class InvalidStateError(RobustAsympError):
    """An order-parameter state violates a feasibility constraint (e.g. zeta <= 0)."""


class ConvergenceError(RobustAsympError):
    """An iterative solve did not converge within the iteration budget.

    Carries the last iterate and the residual at the point of failure so
    callers can inspect or restart.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class QuadratureError(RobustAsympError):
    """Numerical integration failed to reach the requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SolverError(RobustAsympError):
    """A finite-size ERM or message-passing solver failed."""


class OptimizationError(RobustAsympError):
    """Hyperparameter search could not produce a valid optimum."""

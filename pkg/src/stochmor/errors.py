"""Exception hierarchy shared across the package."""


class StochmorError(Exception):
    """Base class for all errors raised by this package."""


class SizeCapError(StochmorError):
    """A dense operation was requested beyond its configured size cap."""


class UnstableSystemError(StochmorError):
    """An operation required mean-square stability that does not hold."""


class ConvergenceError(StochmorError):
    """An iteration reached its iteration budget without converging."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class DivergenceError(StochmorError):
    """A fixed-point iteration produced growing residuals."""


class SingularOperatorError(StochmorError):
    """A linear operator to invert is numerically singular."""


class ShiftCollisionError(SingularOperatorError):
    """A shifted solve hit a shift close to an eigenvalue of the coefficient."""

    def __init__(self, message, column):
        super().__init__(message)
        self.column = column


class ProjectionError(StochmorError):
    """The Petrov-Galerkin projector W^T V is numerically singular."""


class DecompositionError(StochmorError):
    """A spectral decomposition is too ill-conditioned to use."""


class StabilityLossError(StochmorError):
    """A reduced iterate lost mean-square stability during a reduction run."""

    def __init__(self, message, history=None, iterations=None):
        super().__init__(message)
        self.history = history if history is not None else []
        self.iterations = iterations


class RankDeficiencyError(StochmorError):
    """A basis matrix has numerical rank below the requested dimension."""

    def __init__(self, message, rank):
        super().__init__(message)
        self.rank = rank


class QuadratureError(StochmorError):
    """Adaptive quadrature failed to reach the requested accuracy."""


class SimulationDivergenceError(StochmorError):
    """A simulated trajectory blew up."""

    def __init__(self, message, path, step):
        super().__init__(message)
        self.path = path
        self.step = step

"""Exception hierarchy shared across the package."""


class MeshError(Exception):
    """Base class for all modmesh errors."""


class DimensionError(MeshError, ValueError):
    pass


class ModeIndexError(MeshError, IndexError):
    pass


class ValidationError(MeshError, ValueError):
    pass


class DegenerateMeasurementError(MeshError, ValueError):
    pass


class RoutingError(MeshError):
    pass


class UnreachablePhaseError(MeshError, ValueError):
    pass


class FitError(MeshError):
    """Raised when a fringe scan does not constrain the tuning-curve fit."""


class ConvergenceError(MeshError):
    """Raised by iterative protocols that stop short of their tolerance.

    The best configuration found is kept on ``result`` and its objective
    value on ``objective``.
    """

    def __init__(self, message, objective, result=None):
        super().__init__(message)
        self.objective = objective
        self.result = result

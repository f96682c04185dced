"""Exception types raised across the package."""


class CutFracError(Exception):
    """Base class for all package errors."""


class GeometryError(CutFracError, ValueError):
    pass


class EdgeCrossing(GeometryError):
    pass


class DanglingEndpoint(GeometryError):
    pass


class OnInterface(GeometryError):
    pass


class MultipleCrossings(GeometryError):
    pass


class NotIncident(GeometryError):
    pass


class SnapTooFar(GeometryError):
    pass


class EmptyCut(GeometryError):
    pass


class NodeNotVertex(GeometryError):
    pass


class OutsideCoverage(CutFracError, ValueError):
    pass


class SolverError(CutFracError, RuntimeError):
    pass


class NotConverged(SolverError):
    """Iterative solve or eigenvalue estimate did not reach its tolerance.

    ``best`` holds the last iterate so callers can inspect it.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class IndefiniteDetected(SolverError):
    pass


class MissingExact(CutFracError, ValueError):
    pass


class OracleFailed(CutFracError, AssertionError):
    def __init__(self, equation, point, residual):
        super().__init__(
            f"{equation} residual {residual:.3e} at point ({point[0]:.6g}, {point[1]:.6g})"
        )
        self.equation = equation
        self.point = tuple(point)
        self.residual = residual

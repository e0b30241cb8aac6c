"""Exception types raised across the package."""


class BergmanLabError(Exception):
    """Base class for all package errors."""


class NotInDomain(BergmanLabError):
    pass


class OutsideDomain(NotInDomain):
    pass


class NoChart(BergmanLabError):
    pass


class UnsupportedDomain(BergmanLabError):
    pass


class UnsupportedIntersection(UnsupportedDomain):
    pass


class QuadratureUnavailable(BergmanLabError):
    pass


class DegenerateMetric(BergmanLabError):
    pass


class LeftDomain(BergmanLabError):
    """A geodesic came closer to the boundary than the safety margin."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class NoConvergence(BergmanLabError):
    pass


class UnknownClass(BergmanLabError):
    pass


class ApproachLeavesCone(BergmanLabError):
    pass


class NotInNormalForm(BergmanLabError):
    pass


class NoEmbeddingFound(BergmanLabError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(BergmanLabError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key

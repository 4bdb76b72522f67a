"""Exception types shared across the toolkit."""


class LcnavError(Exception):
    """Base class for all toolkit errors."""


class NearSingular(LcnavError):
    """Input too close to a singular configuration (e.g. Earth's center)."""


class FrameMismatch(LcnavError):
    """Frame tags of the operands do not line up."""


class EmptyScan(LcnavError):
    pass


class EmptySet(LcnavError):
    pass


class LengthMismatch(LcnavError):
    pass


class Degenerate(LcnavError):
    """Point configuration too degenerate for a rigid solve."""


class RepeatedSingularValues(LcnavError):
    """Singular values too close for the SVD derivative to exist."""


class NoConvergence(LcnavError):
    """Iteration budget exhausted; carries the best result so far."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class LowElevation(LcnavError):
    pass


class InsufficientSatellites(LcnavError):
    pass


class SingularGeometry(LcnavError):
    pass


class SingularCovariance(LcnavError):
    pass


class EmptyEpoch(LcnavError):
    pass


class TooFewSatellites(LcnavError):
    pass


class DegenerateBaseline(LcnavError):
    pass


class OptAtGnss(LcnavError):
    pass


class ZeroCovariance(LcnavError):
    pass


class EpochMismatch(LcnavError):
    pass


class LogMapSingular(LcnavError):
    pass


class NotObservable(LcnavError):
    pass


class StaleData(LcnavError):
    pass


class BadWaypoints(LcnavError):
    pass


class ZeroObservations(LcnavError):
    pass


class Empty(LcnavError):
    pass

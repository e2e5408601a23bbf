"""Exception hierarchy.  Everything numeric derives from :class:`NumericalError`."""


class MsClimateError(Exception):
    pass


class InvalidParameters(MsClimateError, ValueError):
    pass


class NumericalError(MsClimateError, RuntimeError):
    pass


class StepLimitExceeded(NumericalError):
    pass


class NonFiniteState(NumericalError):
    def __init__(self, msg, last_time=None):
        super().__init__(msg)
        self.last_time = last_time


class NotConverged(NumericalError):
    pass


class NoCycleFound(NumericalError):
    pass


class NonConvergentReturns(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class NotOnHopfCurve(MsClimateError, ValueError):
    pass


class BoundaryPoint(MsClimateError, ValueError):
    def __init__(self, msg, curves=()):
        super().__init__(msg)
        self.curves = tuple(curves)


class AtThreshold(MsClimateError, ValueError):
    pass


class DetectorFailed(NumericalError):
    pass

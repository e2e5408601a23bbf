"""Analysis toolkit for the Maasch-Saltzman glacial-cycle model."""
from .errors import (AtThreshold, BoundaryPoint, DetectorFailed, InvalidParameters,
                     MsClimateError, NoCycleFound, NonConvergentReturns, NonFiniteState,
                     NotConverged, NotOnHopfCurve, NumericalError, QuadratureNotConverged,
                     StepLimitExceeded)
from .models import (AsymParams, HatParams, Model, MsParams, SymParams, UnfoldParams,
                     nondimensionalize, pencil_line, pencil_slope, unfolding_map)

__version__ = "0.1.0"

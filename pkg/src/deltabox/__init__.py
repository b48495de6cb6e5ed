"""Quantum particle in a 1-D box with a delta barrier of time-dependent strength.

The main entry point is :func:`deltabox.volterra.run`, which solves the
barrier-insertion problem through its integral-equation formulation.
"""

from .core import (BoxGeometry, Constant, Linear, Reversed, SpatialGrid, Table, TangentDivergent, TimeGrid,
                   eigenenergy, eigenmode, kernel_coeff, protocol_value)
from .errors import (ConfigurationError, DeltaBoxError, DivergenceError, DomainError, InstabilityError,
                     InterpolationError, NumericalError, ResolutionError, SingularityError)
from .volterra import Trajectory, WavefunctionSnapshot, run

__all__ = [
    "BoxGeometry", "Constant", "Linear", "Reversed", "SpatialGrid", "Table", "TangentDivergent", "TimeGrid",
    "eigenenergy", "eigenmode", "kernel_coeff", "protocol_value",
    "ConfigurationError", "DeltaBoxError", "DivergenceError", "DomainError", "InstabilityError",
    "InterpolationError", "NumericalError", "ResolutionError", "SingularityError",
    "Trajectory", "WavefunctionSnapshot", "run",
]
__version__ = "0.1.0"

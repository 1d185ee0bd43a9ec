"""Numerical laboratory for the 2-D Prandtl boundary-layer equation."""

__version__ = "0.1.0"

from .errors import (CFLError, MonotonicityError, NumericalGateError, PicardError, PrandtlLabError,
                     QuadratureError, ValidationError)
from .grid import Field, GridSpec
from .shear import ShearFlow, ShearProfile, solve_heat_kernel

__all__ = [
    "CFLError", "Field", "GridSpec", "MonotonicityError", "NumericalGateError", "PicardError",
    "PrandtlLabError", "QuadratureError", "ShearFlow", "ShearProfile", "ValidationError",
    "solve_heat_kernel", "__version__",
]

"""Pseudodifferential symbol calculus on the noncommutative two torus."""

__version__ = "0.1.0"

from .algebra import AlgebraElement, DEFAULT_THETA  # noqa: E402,F401
from .quadrature import QuadratureConfig  # noqa: E402,F401
from .symbols import Context, OperatorSymbol  # noqa: E402,F401
from .xi import CoefficientFunction, Cutoff  # noqa: E402,F401

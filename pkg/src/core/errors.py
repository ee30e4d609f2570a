"""
Exception hierarchy shared by the verification tools and the CLI.

The CLI maps these onto exit codes, so every operation raises one of these
instead of a bare ValueError / RuntimeError.
"""
from typing import List, Optional


class PerforationError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(PerforationError, ValueError):
    # Invalid or inadmissible input parameters
    pass


class ResourceError(PerforationError, RuntimeError):
    # A configured cap (points, grid cells) would be exceeded
    pass


class DomainError(PerforationError, ValueError):
    # The geometry leaves nothing to compute on (e.g. no interior cells)
    pass


class GeometryError(PerforationError, ValueError):
    # A construction precondition on the hole arrangement does not hold
    pass


class SolverConvergenceError(PerforationError, RuntimeError):
    def __init__(self, message: str, residual_history: Optional[List[float]] = None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


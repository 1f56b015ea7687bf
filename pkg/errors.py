"""
Toolkit Exceptions
Error types raised by the solvers, the reconstruction routines and the command-line front end
"""


class ToolkitError(Exception):
    """Base class for every error the toolkit raises on purpose"""

    exit_code = 3


class ValidationError(ToolkitError):
    """Bad input detected before any numerical work starts"""

    exit_code = 2


class InvalidParameterError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class UnsupportedTableError(ValidationError):
    pass


class UnsupportedOrderError(ToolkitError):
    pass


class DomainError(ToolkitError):
    """Argument outside the domain of a function, or an operation given the wrong geometry"""


class FactorizationError(ToolkitError):
    pass


class RegimeError(ToolkitError):
    """Coefficient contrast outside the regime a formulation is valid for"""


class DegenerateContrastError(ToolkitError):
    pass


class NumericalResonanceError(ToolkitError):
    pass


class OutOfRangeError(ToolkitError):
    pass


class MonotonicityError(ToolkitError):
    """Forward map failed its monotonicity check; bisection would return a wrong root"""


class SolverError(ToolkitError):
    """A numerical library call failed inside a solver (no convergence, singular system)"""

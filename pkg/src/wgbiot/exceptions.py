"""Exception types raised across the solver."""


class WGError(Exception):
    """Base class for all solver errors."""


class ArgumentError(WGError, ValueError):
    """An argument is outside its admissible range."""


class GeometryError(WGError):
    """Degenerate or non-simple polygon, or a failed point lookup."""


class ConditioningError(WGError):
    """A local Gram matrix is singular to machine precision."""


class ScenarioError(WGError):
    """A data field could not be evaluated or is inconsistent."""


class SingularSystemError(WGError):
    """The saddle-point system could not be solved reliably."""


class UnsupportedError(WGError):
    """The requested quantity is not available for this scenario."""


class ConfigError(WGError):
    """Invalid run configuration."""

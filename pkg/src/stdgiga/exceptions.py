"""Exception hierarchy used across the package."""


class StdgigaError(Exception):
    """Base class for all errors raised by stdgiga."""


class DomainError(StdgigaError, ValueError):
    """A parametric coordinate lies outside the unit interval."""


class GeometryError(StdgigaError):
    """Degenerate or inverted geometry mapping."""


class TopologyError(StdgigaError):
    """A patch face could not be classified."""


class UnsupportedConfigurationError(StdgigaError):
    """Patch faces overlap partially or match only through a non-affine map."""


class ConstraintError(StdgigaError):
    """Boundary data could not be interpolated."""


class SolverError(StdgigaError):
    """The sparse factorization failed."""


class ConfigError(StdgigaError, ValueError):
    """Invalid study configuration."""

"""Exception types shared across the package."""


class CanoError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CanoError):
    """An operation received an empty or malformed input."""


class DegenerateGeometryError(CanoError):
    """Geometry has too little extent for the requested operation."""


class SemanticUnavailableError(CanoError):
    """Object and template share no usable semantic parts."""


class NoStablePoseError(CanoError):
    """No support facet keeps the object in static equilibrium."""


class PcaDegenerateError(CanoError):
    """Principal frame is ambiguous (near-isotropic covariance)."""


class UnregisteredCategoryError(CanoError):
    """No template registered for the requested category."""


class DataFormatError(CanoError):
    """A file could not be parsed; message names the offending path."""


class StaleAnnotationError(CanoError):
    """Annotation hash does not match the current candidate set."""

"""Exception hierarchy used across the toolkit."""


class GliakitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(GliakitError, ValueError):
    """Data violates a container or schema invariant."""


class GeometryMismatchError(ValidationError):
    """Two volumes that must share a grid do not."""


class NiftiFormatError(GliakitError):
    """Malformed NIfTI-1 header or payload."""


class UnsupportedDatatypeError(NiftiFormatError):
    """NIfTI datatype code outside the supported set."""


class EmptyMaskError(GliakitError, ValueError):
    """An operation that needs foreground voxels received none."""

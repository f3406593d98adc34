"""Exception types shared across the library."""


class RigdepthError(Exception):
    """Base class for all library-specific errors."""


class DimensionError(RigdepthError, ValueError):
    """Raster or vector dimensions do not match what an operation requires."""


class ParameterError(RigdepthError, ValueError):
    """A scalar or matrix parameter violates its domain (singular, non-rigid, ...)."""


class OnAxisError(ParameterError):
    """A 3D point lies on (or too close to) the cylinder axis."""


class NoOverlapError(RigdepthError, RuntimeError):
    """A masked photometric comparison has no valid pixels."""


class EmptyEvaluationError(RigdepthError, RuntimeError):
    """A metric was requested over zero valid pixels or zero correspondences."""


class TokenMismatchError(RigdepthError, ValueError):
    """A SparseAttention object does not match the feature maps it is applied to."""


class SchemaError(RigdepthError, ValueError):
    """A configuration file violates its schema; message carries the field path."""


class RasterFormatError(RigdepthError, ValueError):
    """A raster file is malformed (bad magic, truncated payload, wrong scale)."""

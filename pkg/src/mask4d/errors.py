"""Exception hierarchy shared across the package."""


class Mask4DError(Exception):
    """Base class for all package-specific errors."""


class InvalidGeometryError(Mask4DError):
    """Non-finite coordinates, non-rotation matrices, degenerate transforms."""


class InvalidDepthError(Mask4DError):
    """Depth value outside the valid (strictly positive, finite) range."""


class ValidationError(Mask4DError):
    """Structurally inconsistent data (dimension mismatch, bad counts)."""


class FormatError(Mask4DError):
    """Corrupt or malformed file content (bad magic bytes, truncation)."""


class UnsupportedFormatError(FormatError):
    """Well-formed file using a variant we deliberately do not support."""


class SchemaError(FormatError):
    """File parses but lacks required fields (e.g. PLY without x/y/z)."""


class MissingComponentError(Mask4DError):
    """A required file of a multi-file artifact is absent."""


class NoGeometryError(Mask4DError):
    """An operation needing scene geometry was given an empty point set."""


class DegenerateEmbeddingError(Mask4DError):
    """A zero-norm embedding vector where a direction is required."""


class ConflictError(Mask4DError):
    """Operation rejected because of session state (job running, stale)."""


class ResourceLimitError(Mask4DError):
    """A configured resource cap (e.g. session limit) was exceeded."""

"""Shared exception types."""


class SkewdynError(Exception):
    """Base class for all library-specific failures."""


class DegenerateDivisorError(SkewdynError):
    """Some fractional multiple of the rotation is exactly zero.

    Raised when a divisor table or a normalization recursion would divide
    by a vanishing unit-circle difference (the rotation is rational to the
    working precision).
    """


class PrecisionError(SkewdynError):
    """Requested computation exceeds the configured fixed-point precision."""


class TruncationMismatchError(SkewdynError):
    """Series operands carry different truncation orders."""


class LinearFiberError(SkewdynError):
    """The vertical map restricted to the invariant fiber is the identity.

    The normalization pipeline delegates this case to a genuinely
    two-dimensional linearization and refuses to proceed.
    """

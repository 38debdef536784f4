"""Exception hierarchy shared across the package.

``InputError`` covers contract violations on data handed to the library
(shapes, ranges, file formats); ``NumericError`` covers failures caused by
the values themselves. The CLI maps the two branches onto distinct exit
codes (2 and 3).
"""


class DtmError(Exception):
    """Base class for every package-specific failure."""


class InputError(DtmError):
    """Invalid argument, shape, range, or on-disk format."""


class NumericError(DtmError):
    """Computation hit a numerically degenerate configuration."""


class EmptyMatrixError(InputError):
    pass


class NonFiniteError(InputError):
    """A NaN or infinity where only finite values are allowed.

    ``index`` locates the first offending entry: a ``(row, col)`` tuple for
    matrices, a flat integer for vectors and raw payloads.
    """

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"non-finite value at index {index}")


class DimensionMismatchError(InputError):
    pass


class InvalidRangeError(InputError):
    pass


class TooFewTokensError(InputError):
    pass


class ScheduleMismatchError(InputError):
    pass


class DegenerateNormError(NumericError):
    pass


class TensorFormatError(InputError):
    """Base for tensor-container parsing failures."""


class BadMagicError(TensorFormatError):
    pass


class BadVersionError(TensorFormatError):
    pass


class UnsupportedDtypeError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass


class GridMismatchError(InputError):
    pass


class IndivisibleGridError(InputError):
    pass

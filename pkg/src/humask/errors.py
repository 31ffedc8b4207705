"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`HumaskError`, so callers (and the CLI) can catch them in one place.
"""


class HumaskError(Exception):
    """Base class for package errors."""


class ParseError(HumaskError):
    """Malformed or truncated NIfTI-1 file."""


class UnsupportedDatatype(HumaskError):
    """NIfTI datatype code outside the supported set."""


class DimensionError(HumaskError):
    """Volume does not reduce to three spatial dimensions."""


class IoError(HumaskError, OSError):
    """File could not be written or read at the OS level."""


class SpecError(HumaskError, ValueError):
    """Invalid phantom specification."""


class UnitError(HumaskError, ValueError):
    """Volume carries the wrong intensity unit for the operation."""


class EmptyInput(HumaskError, ValueError):
    pass


class DivisibilityError(HumaskError, ValueError):
    """Volume shape is not a multiple of the subvolume shape.

    ``axis`` is 1-based; ``nearest`` holds the closest divisible sizes
    below and above the offending extent.
    """

    def __init__(self, axis, size, sub, nearest):
        self.axis = axis
        self.size = size
        self.sub = sub
        self.nearest = nearest
        super().__init__(
            f"axis {axis}: size {size} is not divisible by {sub} "
            f"(nearest divisible sizes: {nearest[0]} and {nearest[1]})"
        )


class ShapeError(HumaskError, ValueError):
    pass


class NoForegroundError(HumaskError):
    """No subvolume reached the foreground threshold."""


class DegenerateRatioError(HumaskError, ValueError):
    """The masking ratio selects zero subvolumes."""


class NoSeparation(HumaskError):
    """Foreground and background histograms overlap too much to calibrate."""


class InsufficientPairs(HumaskError, ValueError):
    pass


class DivergenceError(HumaskError):
    """Training produced a non-finite loss.

    ``state`` holds the last parameter set whose loss was finite.
    """

    def __init__(self, message, state=None, history=None):
        super().__init__(message)
        self.state = state
        self.history = history or []

"""Exception hierarchy shared across the package."""


class TTGOError(Exception):
    """Base class for all package errors."""


class InvalidGridError(TTGOError, ValueError):
    pass


class InvalidValueError(TTGOError, ValueError):
    pass


class MalformedModelError(TTGOError, ValueError):
    pass


class EmptyConditionError(TTGOError, ValueError):
    """Raised when conditioning would leave no free dimensions."""


class PivotError(TTGOError, ArithmeticError):
    """maxvol could not find a non-singular starting submatrix."""


class PoisonedEvaluationError(TTGOError, ValueError):
    """An oracle returned a non-finite value.

    ``index`` holds the offending multi-index (or point) when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ModelFormatError(TTGOError):
    """Base class for model-file errors; ``code`` distinguishes the cause."""

    code = "format"


class ChecksumError(ModelFormatError):
    code = "crc"


class HeaderError(ModelFormatError):
    code = "header"


class UnsupportedVersionError(HeaderError):
    code = "version"


class RankChainError(ModelFormatError):
    code = "rank"


class SizeError(ModelFormatError):
    code = "size"
